#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "roughflow/fields.hpp"
#include "roughflow/sewing.hpp"

namespace roughflow::cli {

// ---------------------------------------------------------------- config

json config_to_json(const RunConfig& c) {
  return json{{"command", c.command},   {"driver", c.driver},   {"hurst", c.hurst},
              {"grid_n", c.grid_n},     {"seed", c.seed},       {"field", c.field},
              {"x0", c.x0},             {"tol", c.tol},         {"output", c.output},
              {"method", c.method},     {"sweep", c.sweep},     {"levels", c.levels},
              {"order", c.order},       {"n", c.sphere_dim},    {"dt", c.dt},
              {"steps", c.steps},       {"scheme", c.scheme},   {"h_spec", c.h_spec},
              {"s", c.s},               {"samples", c.samples}, {"f", c.f_fn},
              {"g", c.g_fn},            {"threads", c.threads}};
}

RunConfig config_from_json(const json& j, RunConfig base) {
  require(j.is_object(), "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "command") base.command = value.get<std::string>();
      else if (key == "driver") base.driver = value.get<std::string>();
      else if (key == "hurst") base.hurst = value.get<double>();
      else if (key == "grid_n") base.grid_n = value.get<Index>();
      else if (key == "seed") base.seed = value.get<std::uint64_t>();
      else if (key == "field") base.field = value.get<std::string>();
      else if (key == "x0") base.x0 = value.get<std::vector<double>>();
      else if (key == "tol") base.tol = value.get<double>();
      else if (key == "output") base.output = value.get<std::string>();
      else if (key == "method") base.method = value.get<std::string>();
      else if (key == "sweep") base.sweep = value.get<bool>();
      else if (key == "levels") base.levels = value.get<int>();
      else if (key == "order") base.order = value.get<int>();
      else if (key == "n") base.sphere_dim = value.get<Index>();
      else if (key == "dt") base.dt = value.get<double>();
      else if (key == "steps") base.steps = value.get<int>();
      else if (key == "scheme") base.scheme = value.get<std::string>();
      else if (key == "h_spec") base.h_spec = value.get<std::string>();
      else if (key == "s") base.s = value.get<double>();
      else if (key == "samples") base.samples = value.get<Index>();
      else if (key == "f") base.f_fn = value.get<std::string>();
      else if (key == "g") base.g_fn = value.get<std::string>();
      else if (key == "threads") base.threads = value.get<unsigned>();
      else throw InputError("unknown config key '" + key + "'");
    } catch (const json::exception&) {
      throw InputError("config key '" + key + "' has the wrong type");
    }
  }
  return base;
}

namespace {

bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

std::string smooth_id(const std::string& driver) { return driver.substr(std::string("smooth:").size()); }

bool is_smooth(const std::string& driver) { return driver.rfind("smooth:", 0) == 0; }

}  // namespace

bool is_field_id(const std::string& id) {
  for (const char* known : {"zero", "scalar-linear", "rotation", "sin-bounded", "random-smooth", "identity",
                            "quadratic", "sphere-projector"})
    if (id == known) return true;
  return false;
}

Eigen::VectorXd default_x0(const std::string& id) {
  if (id == "scalar-linear" || id == "quadratic") return Eigen::VectorXd::Ones(1);
  if (id == "rotation") return Eigen::Vector2d(1.0, 0.0);
  if (id == "sphere-projector") return Eigen::Vector3d(0.0, 0.0, 1.0);
  if (id == "zero") return Eigen::VectorXd::Zero(1);
  return Eigen::Vector2d(0.1, -0.2);
}

FieldSpec make_field(const std::string& id, Index dim, std::uint64_t seed) {
  require(dim >= 1, "field dimension must be positive");
  if (id == "scalar-linear") {
    require(dim == 1, "field 'scalar-linear' is one-dimensional");
    return {scalar_linear_field(), 1, 1};
  }
  if (id == "quadratic") {
    require(dim == 1, "field 'quadratic' is one-dimensional");
    return {MatrixField::generic(
                1, 1, 1,
                [](const auto& x) {
                  using S = typename std::decay_t<decltype(x)>::Scalar;
                  return Mat<S>::Constant(1, 1, x(0) * x(0));
                },
                kMaxJetLevel, "quadratic"),
            1, 1};
  }
  if (id == "rotation") {
    require(dim == 2, "field 'rotation' is two-dimensional");
    return {rotation_field(), 2, 1};
  }
  if (id == "zero") return {zero_field(dim, dim, dim), dim, dim};
  if (id == "identity") return {constant_field(dim, Eigen::MatrixXd::Identity(dim, dim)), dim, dim};
  if (id == "sin-bounded") return {sin_bounded_field(dim), dim, dim};
  if (id == "random-smooth") return {random_smooth_field(dim, dim, seed), dim, dim};
  if (id == "sphere-projector") return {sphere_projector_field(dim).field(), dim, dim};
  throw InputError("unknown field '" + id + "'");
}

void validate(RunConfig& c) {
  bool known = false;
  for (const std::string& k : kCommands) known = known || k == c.command;
  require(known, "unknown command '" + c.command + "'");
  require(c.hurst > 1.0 / 3.0 && c.hurst <= 1.0, "hurst outside (1/3, 1]");
  require(is_power_of_two(c.grid_n) && c.grid_n >= kMinGrid && c.grid_n <= kMaxGrid,
          "grid_n must be a power of two in [8, 16384]");
  require(c.tol > 0.0 && std::isfinite(c.tol), "tol must be positive");
  require(is_field_id(c.field), "unknown field '" + c.field + "'");
  require(c.driver == "fbm" || (is_smooth(c.driver) && is_smooth_driver_id(smooth_id(c.driver))),
          "unknown driver '" + c.driver + "'");
  require(c.method == "picard" || c.method == "davie", "unknown method '" + c.method + "'");
  require(c.levels >= 4, "a convergence study needs at least 4 levels");
  require(c.order >= 0 && c.order <= 2, "order must be 0, 1 or 2");
  require(c.sphere_dim >= 1, "sphere dimension n must be positive");
  require(c.dt > 0.0 && std::isfinite(c.dt), "dt must be positive");
  require(c.steps >= 0, "steps must be nonnegative");
  (void)parse_flow_scheme(c.scheme);
  require(c.s >= 0.0 && std::isfinite(c.s), "s must be nonnegative");
  require(c.samples >= 100, "samples must be at least 100");
  if (c.x0.empty()) {
    const Eigen::VectorXd d = default_x0(c.field);
    c.x0.assign(d.data(), d.data() + d.size());
  }
  for (double v : c.x0) require(std::isfinite(v), "x0 must be finite");
}

RoughPathPtr make_driver(const RunConfig& c, Index dim) {
  const Grid grid = Grid::uniform(c.grid_n);
  if (c.driver == "fbm")
    return std::make_shared<const RoughPath>(
        lift_piecewise_linear(grid, FbmSampler(c.hurst, grid).sample(dim, c.seed), lift_exponent(c.hurst)));
  const Eigen::MatrixXd samples = smooth_driver_samples(smooth_id(c.driver), grid);
  require(samples.rows() == dim, "driver '" + c.driver + "' has dimension " + std::to_string(samples.rows()) +
                                     ", the experiment needs " + std::to_string(dim));
  return std::make_shared<const RoughPath>(lift_piecewise_linear(grid, samples, 0.5));
}

// ---------------------------------------------------------------- studies

csv::Table StudyResult::table(const std::string& metric_name) const {
  csv::Table t;
  t.header = {"scale", metric_name};
  for (std::size_t i = 0; i < scales.size(); ++i) t.rows.push_back({scales[i], metrics[i]});
  return t;
}

StudyResult convergence_study(const std::vector<double>& scales, const std::vector<double>& metrics) {
  require(scales.size() == metrics.size(), "convergence_study: scales and metrics differ in length");
  require(scales.size() >= 4, "convergence_study: need at least 4 scales");
  std::size_t coarsest = 0;
  for (std::size_t i = 1; i < scales.size(); ++i)
    if (scales[i] > scales[coarsest]) coarsest = i;
  if (!(metrics[coarsest] >= kMetricFloor))
    throw ScaleRangeError("convergence_study: metric " + csv::format(metrics[coarsest]) +
                          " at the coarsest scale is below the round-off floor");
  const auto n = static_cast<Index>(scales.size());
  Eigen::VectorXd lx(n), ly(n);
  for (Index i = 0; i < n; ++i) {
    require(scales[static_cast<std::size_t>(i)] > 0.0, "convergence_study: scales must be positive");
    lx(i) = std::log2(scales[static_cast<std::size_t>(i)]);
    ly(i) = std::log2(std::max(metrics[static_cast<std::size_t>(i)], std::numeric_limits<double>::min()));
  }
  return {scales, metrics, fit_line(lx, ly)};
}

StudyResult young_sewing_study(Index finest, int levels) {
  require(levels >= 4, "young_sewing_study: need at least 4 levels");
  require(finest >> (levels - 1) >= 1, "young_sewing_study: finest grid too coarse for the level count");
  const Germ germ{1, 2.0, [](double s, double t) { return Eigen::VectorXd::Constant(1, s * (t - s)); }};
  std::vector<double> scales, errors;
  for (int k = levels - 1; k >= 0; --k) {
    const Grid grid = Grid::uniform(finest >> k);
    const Eigen::MatrixXd path = sew(germ, grid);
    scales.push_back(grid.mesh());
    errors.push_back(std::abs(path(0, path.cols() - 1) - 0.5));
  }
  return convergence_study(scales, errors);
}

StudyResult davie_order_study(const OneForm& f, const RoughPathPtr& fine, const Eigen::VectorXd& x0,
                              const std::vector<Index>& steps, double tol) {
  const Index fine_steps = fine->grid().steps();
  const ControlledPath reference = solve_picard(f, from_reference(fine), x0, tol).x;
  std::vector<double> scales, errors;
  for (Index n : steps) {
    require(n >= 1 && fine_steps % n == 0, "davie_order_study: coarse steps must divide the fine grid");
    const Index stride = fine_steps / n;
    std::vector<Index> nodes;
    for (Index k = 0; k <= n; ++k) nodes.push_back(k * stride);
    const RoughPathPtr coarse = std::make_shared<const RoughPath>(fine->restrict(nodes));
    const ControlledPath davie = solve_davie(f, coarse, x0).x;
    double err = 0.0;
    for (Index k = 0; k <= n; ++k) err = std::max(err, (davie.value(k) - reference.value(k * stride)).norm());
    scales.push_back(coarse->grid().mesh());
    errors.push_back(err);
  }
  return convergence_study(scales, errors);
}

namespace {

template <class Solve>
FdCheck fd_check(Solve&& solve_at, const Eigen::MatrixXd& base, const Eigen::MatrixXd& v,
                 const std::vector<double>& eps) {
  require(eps.size() >= 2, "fd check needs at least two step sizes");
  FdCheck out;
  out.eps = eps;
  for (double e : eps) out.remainders.push_back(sup_distance(solve_at(e), base + e * v) / e);
  const auto n = static_cast<Index>(eps.size());
  Eigen::VectorXd lx(n), ly(n);
  for (Index i = 0; i < n; ++i) {
    lx(i) = std::log(eps[static_cast<std::size_t>(i)]);
    ly(i) = std::log(std::max(out.remainders[static_cast<std::size_t>(i)], std::numeric_limits<double>::min()));
  }
  out.fit = fit_line(lx, ly);
  return out;
}

}  // namespace

FdCheck fd_check_y(const OneForm& f, const ControlledPath& y, const Eigen::VectorXd& x0, const ControlledPath& h,
                   const std::vector<double>& eps) {
  const ControlledPath v = directional_derivative_y(f, y, x0, h);
  const Eigen::MatrixXd base = solve_picard(f, y, x0).x.values();
  return fd_check([&](double e) { return solve_picard(f, y + e * h, x0).x.values(); }, base, v.values(), eps);
}

FdCheck fd_check_F(const OneForm& f, const ControlledPath& y, const Eigen::VectorXd& x0, const OneForm& df,
                   const std::vector<double>& eps) {
  const ControlledPath w = directional_derivative_F(f, y, x0, df);
  const Eigen::MatrixXd base = solve_picard(f, y, x0).x.values();
  return fd_check([&](double e) { return solve_picard(f + e * df, y, x0).x.values(); }, base, w.values(), eps);
}

FdCheck fd_check_connection(const ProjectorField& p, const MatrixField& q, const ManifoldPath& y,
                            const std::vector<double>& eps) {
  const DevelopmentSetup setup = development_setup(p, y);
  const Eigen::MatrixXd base = development(p.field(), setup.z, y.value(0), setup.t0).values();
  const ControlledPath v = connection_variation_field(p, q, y);
  return fd_check(
      [&](double e) { return development(p.field() + e * q, setup.z, y.value(0), setup.t0).values(); }, base,
      v.values(), eps);
}

ControlledPath sine_direction(const ControlledPath& y) {
  const Index d = y.dim();
  return compose_smooth(MatrixField::generic(
                            d, d, 1,
                            [d](const auto& x) {
                              using S = typename std::decay_t<decltype(x)>::Scalar;
                              using std::sin;
                              Mat<S> out(d, 1);
                              for (Index i = 0; i < d; ++i) out(i, 0) = sin(x(i));
                              return out;
                            },
                            kMaxJetLevel, "sine"),
                        y);
}

Eigen::MatrixXd parse_h_spec(const std::string& spec, Index n, const Grid& grid) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, grid.size());
  if (spec.empty()) {
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(n);
    dir(0) = 1.0;
    if (n > 1) dir(1) = 0.5;
    for (Index k = 0; k < grid.size(); ++k) h.col(k) = (grid.t(k) - grid.start()) * dir;
    return h;
  }
  std::vector<double> times;
  std::vector<Eigen::VectorXd> values;
  std::stringstream points(spec);
  std::string point;
  while (std::getline(points, point, ',')) {
    const auto colon = point.find(':');
    require(colon != std::string::npos, "h-spec breakpoint '" + point + "' lacks ':'");
    std::vector<double> v;
    std::stringstream comps(point.substr(colon + 1));
    std::string c;
    try {
      times.push_back(std::stod(point.substr(0, colon)));
      while (std::getline(comps, c, ';')) v.push_back(std::stod(c));
    } catch (const std::exception&) {
      throw InputError("h-spec breakpoint '" + point + "' is not numeric");
    }
    require(static_cast<Index>(v.size()) == n, "h-spec breakpoint '" + point + "' needs " + std::to_string(n) +
                                                   " components");
    values.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), n));
    require(times.size() == 1 || times.back() > times[times.size() - 2], "h-spec times must increase");
  }
  require(!times.empty() && times.front() == grid.start(), "h-spec must start at s = 0");
  require(values.front().norm() == 0.0, "h-spec needs h_0 = 0");
  std::size_t seg = 0;
  for (Index k = 0; k < grid.size(); ++k) {
    const double t = grid.t(k);
    while (seg + 1 < times.size() && times[seg + 1] < t) ++seg;
    if (seg + 1 == times.size()) {
      h.col(k) = values.back();
      continue;
    }
    const double w = (t - times[seg]) / (times[seg + 1] - times[seg]);
    h.col(k) = (1.0 - w) * values[seg] + w * values[seg + 1];
  }
  return h;
}

ScalarFunction make_test_function(const std::string& id, Index dim) {
  if (id == "const") return [](const Eigen::VectorXd&) { return 1.0; };
  if (id.size() >= 2 && id[0] == 'x') {
    Index i = 0;
    try {
      i = std::stol(id.substr(1));
    } catch (const std::exception&) {
      i = 0;
    }
    require(i >= 1 && i <= dim, "test function '" + id + "' is not a coordinate of the state");
    return [i](const Eigen::VectorXd& x) { return x(i - 1); };
  }
  throw InputError("unknown test function '" + id + "'");
}

// ---------------------------------------------------------------- commands

namespace {

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

csv::Table state_table(const ControlledPath& x) {
  csv::Table t;
  t.header.push_back("t");
  for (Index i = 1; i <= x.dim(); ++i) t.header.push_back("x" + std::to_string(i));
  for (Index k = 0; k < x.size(); ++k) {
    std::vector<double> row{x.grid().t(k)};
    for (Index i = 0; i < x.dim(); ++i) row.push_back(x.value(k)(i));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Eigen::VectorXd start_of(const RunConfig& c) {
  return Eigen::Map<const Eigen::VectorXd>(c.x0.data(), static_cast<Index>(c.x0.size()));
}

FieldSpec field_of(const RunConfig& c) { return make_field(c.field, static_cast<Index>(c.x0.size()), c.seed); }

CommandOutput cmd_lift(const RunConfig& c) {
  const Index dim = c.driver == "fbm" ? field_of(c).driver_dim : smooth_driver_samples(smooth_id(c.driver), Grid::uniform(1)).rows();
  const RoughPathPtr x = make_driver(c, dim);
  CommandOutput out;
  const double chen = chen_defect(*x);
  const double geo = geometric_defect(*x);
  out.metrics = {{"dim", dim},
                 {"chen_defect", chen},
                 {"geometric_defect", geo},
                 {"holder_level1", holder_norm_level1(*x, x->alpha()).norm},
                 {"holder_level2", holder_norm_level2(*x, x->alpha()).norm},
                 {"alpha", x->alpha()}};
  out.verdicts = {{"chen", chen <= 1e-12}, {"geometric", geo <= 1e-10}};
  out.tables.emplace_back("", rough_path_csv(*x));
  return out;
}

CommandOutput cmd_sew(const RunConfig& c) {
  const StudyResult r = young_sewing_study(c.grid_n, c.levels);
  CommandOutput out;
  out.metrics = {{"slope", r.fit.slope}, {"r_squared", r.fit.r_squared}, {"errors", r.metrics}};
  out.verdicts = {{"slope_near_one", std::abs(r.fit.slope - 1.0) <= 0.15}};
  out.tables.emplace_back("", csv::to_string(r.table("error")));
  return out;
}

CommandOutput cmd_solve(const RunConfig& c) {
  const FieldSpec fs = field_of(c);
  const Eigen::VectorXd x0 = start_of(c);
  CommandOutput out;
  if (c.sweep) {
    RunConfig fine_cfg = c;
    fine_cfg.grid_n = c.grid_n << 2;
    require(fine_cfg.grid_n <= kMaxGrid, "solve --sweep: the reference grid 4 * grid_n exceeds 16384");
    const RoughPathPtr fine = make_driver(fine_cfg, fs.driver_dim);
    std::vector<Index> steps;
    for (int k = c.levels - 1; k >= 0; --k) {
      require((c.grid_n >> k) >= 1, "solve --sweep: grid_n too coarse for the level count");
      steps.push_back(c.grid_n >> k);
    }
    const StudyResult r = davie_order_study(fs.field, fine, x0, steps, c.tol);
    const double alpha = c.driver == "fbm" ? c.hurst : 1.0;
    const double threshold = 3.0 * std::min(alpha, 0.5) - 1.0 - 0.1;
    out.metrics = {{"slope", r.fit.slope}, {"r_squared", r.fit.r_squared}, {"errors", r.metrics},
                   {"threshold", threshold}};
    out.verdicts = {{"davie_order", r.fit.slope >= threshold}};
    out.tables.emplace_back("", csv::to_string(r.table("sup_distance")));
    return out;
  }
  const RoughPathPtr x = make_driver(c, fs.driver_dim);
  SolveOptions options;
  options.method = c.method == "davie" ? Method::davie : Method::picard;
  options.tol = c.tol;
  const Solution sol = solve(fs.field, from_reference(x), x0, options);
  out.metrics = {{"x_final", to_json(Eigen::VectorXd(sol.x.value(sol.x.size() - 1)))},
                 {"iterations", sol.total_iterations()},
                 {"patches", sol.patches.size()},
                 {"method", c.method}};
  out.verdicts = {{"finite", sol.x.values().allFinite()}};
  out.tables.emplace_back("", csv::to_string(state_table(sol.x)));
  return out;
}

CommandOutput cmd_deriv(const RunConfig& c) {
  const FieldSpec fs = field_of(c);
  const Eigen::VectorXd x0 = start_of(c);
  const RoughPathPtr x = make_driver(c, fs.driver_dim);
  const ControlledPath y = from_reference(x);
  const ControlledPath h = sine_direction(y);
  const OneForm df = random_smooth_field(fs.state_dim, fs.driver_dim, c.seed + 1);
  const FdCheck fy = fd_check_y(fs.field, y, x0, h);
  const FdCheck ff = fd_check_F(fs.field, y, x0, df);
  CommandOutput out;
  out.metrics = {{"slope_y", fy.fit.slope}, {"slope_F", ff.fit.slope},
                 {"remainders_y", fy.remainders}, {"remainders_F", ff.remainders}};
  out.verdicts = {{"fd_slope_y", fy.fit.slope >= 0.9}, {"fd_slope_F", ff.fit.slope >= 0.9}};
  if (c.field == "scalar-linear") {
    // v_t = x0 e^{g_t - g_0} (h_t - h_0)
    const ControlledPath v = directional_derivative_y(fs.field, y, x0, h);
    double err = 0.0;
    for (Index k = 0; k < y.size(); ++k) {
      const double g = y.value(k)(0) - y.value(0)(0);
      const double hk = h.value(k)(0) - h.value(0)(0);
      err = std::max(err, std::abs(v.value(k)(0) - x0(0) * std::exp(g) * hk));
    }
    out.metrics["closed_form_error"] = err;
    out.verdicts["closed_form"] = err <= 1e-6;
  }
  csv::Table t;
  t.header = {"epsilon", "remainder_y", "remainder_F"};
  for (std::size_t i = 0; i < fy.eps.size(); ++i) t.rows.push_back({fy.eps[i], fy.remainders[i], ff.remainders[i]});
  out.tables.emplace_back("", csv::to_string(t));
  return out;
}

CommandOutput cmd_taylor(const RunConfig& c) {
  // sigma(eps, x) = eps x on the scalar state: z^eps = x0 exp(eps (g - g_0)).
  require(c.x0.size() == 1, "taylor uses the scalar scaled family; x0 must be one-dimensional");
  const MatrixField sigma = MatrixField::generic(
      2, 1, 1,
      [](const auto& xi) {
        using S = typename std::decay_t<decltype(xi)>::Scalar;
        return Mat<S>::Constant(1, 1, xi(1) * xi(0));
      },
      kMaxJetLevel, "scaled");
  const RoughPathPtr x = make_driver(c, 1);
  std::vector<double> eps;
  for (int i = 0; i < c.levels; ++i) eps.push_back(0.1 * std::pow(10.0, -2.0 * i / (c.levels - 1)));
  SolveOptions options;
  options.tol = c.tol;
  const TaylorResult r = taylor_expand({sigma, {}}, Eigen::MatrixXd(), *x, start_of(c), c.order, eps, options);
  double z1 = 0.0, z2 = 0.0;
  const double a = c.x0[0];
  for (Index k = 0; k < x->size(); ++k) {
    const double g = x->value(k)(0) - x->value(0)(0);
    if (c.order >= 1) z1 = std::max(z1, std::abs(r.terms[1].value(k)(0) - a * g));
    if (c.order >= 2) z2 = std::max(z2, std::abs(r.terms[2].value(k)(0) - 0.5 * a * g * g));
  }
  CommandOutput out;
  out.metrics = {{"slope", r.fit.slope}, {"r_squared", r.fit.r_squared}, {"z1_error", z1}, {"z2_error", z2},
                 {"residuals", to_json(r.residuals)}};
  out.verdicts = {{"residual_order", r.fit.slope >= c.order + 1 - 0.1},
                  {"closed_forms", z1 <= 1e-6 && z2 <= 1e-6}};
  csv::Table t;
  t.header = {"epsilon", "residual"};
  for (Index i = 0; i < r.epsilons.size(); ++i) t.rows.push_back({r.epsilons(i), r.residuals(i)});
  out.tables.emplace_back("", csv::to_string(t));
  return out;
}

CommandOutput cmd_flow(const RunConfig& c) {
  const Index n = c.sphere_dim;
  const RoughPathPtr x = make_driver(c, n + 1);
  Eigen::VectorXd north = Eigen::VectorXd::Zero(n + 1);
  north(n) = 1.0;
  const ManifoldPath y0 = sphere_path(x, north);
  const Eigen::MatrixXd h = parse_h_spec(c.h_spec, n, x->grid());
  const FlowResult r = flow_integrate(y0, h, c.dt, c.steps, parse_flow_scheme(c.scheme));
  double constraint = 0.0, frame = 0.0;
  bool start_fixed = true;
  csv::Table traj, diag;
  traj.header = {"flow_time", "s"};
  for (Index i = 1; i <= n + 1; ++i) traj.header.push_back("y" + std::to_string(i));
  diag.header = {"flow_time", "max_constraint_violation", "frame_orthonormality_defect"};
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
    const FlowDiagnostics& d = r.diagnostics[i];
    constraint = std::max(constraint, d.constraint);
    frame = std::max(frame, d.frame_defect);
    start_fixed = start_fixed && r.trajectory[i].value(0) == y0.value(0);
    diag.rows.push_back({d.time, d.constraint, d.frame_defect});
    for (Index k = 0; k < x->size(); ++k) {
      std::vector<double> row{d.time, x->grid().t(k)};
      const Eigen::VectorXd v = r.trajectory[i].value(k);
      row.insert(row.end(), v.data(), v.data() + v.size());
      traj.rows.push_back(std::move(row));
    }
  }
  CommandOutput out;
  out.metrics = {{"max_constraint_violation", constraint}, {"max_frame_orthonormality_defect", frame},
                 {"start_fixed", start_fixed}, {"horizon", c.dt * c.steps}};
  out.verdicts = {{"constraint", constraint <= 1e-6}, {"frame", frame <= 1e-6}, {"start_fixed", start_fixed}};
  out.tables.emplace_back("", csv::to_string(traj));
  out.tables.emplace_back("_diagnostics", csv::to_string(diag));
  return out;
}

CommandOutput cmd_gamma(const RunConfig& c) {
  const FieldSpec fs = field_of(c);
  const RoughPathPtr x = make_driver(c, fs.driver_dim);
  const CovarianceMatrix g = malliavin_covariance(fs.field, x, start_of(c));
  CommandOutput out;
  out.metrics = {{"gamma", to_json(g.gamma)},
                 {"min_eigenvalue", g.min_eigenvalue()},
                 {"symmetry_defect", g.symmetry_defect()}};
  out.verdicts = {{"symmetric", g.symmetry_defect() <= kSymmetryTol}, {"psd", g.min_eigenvalue() >= kEigenFloor}};
  csv::Table t;
  for (Index j = 1; j <= g.gamma.cols(); ++j) t.header.push_back("g" + std::to_string(j));
  for (Index i = 0; i < g.gamma.rows(); ++i) {
    const Eigen::VectorXd row = g.gamma.row(i).transpose();
    t.rows.emplace_back(row.data(), row.data() + row.size());
  }
  out.tables.emplace_back("", csv::to_string(t));
  return out;
}

CommandOutput cmd_ibp(const RunConfig& c) {
  require(c.driver == "fbm", "ibp-check needs the isotropic fbm driver");
  const FieldSpec fs = field_of(c);
  IbpConfig ic;
  ic.s = c.s;
  ic.n_samples = c.samples;
  ic.hurst = c.hurst;
  ic.grid_n = c.grid_n;
  ic.seed = c.seed;
  ic.threads = c.threads;
  const MCReport r = ibp_reversibility_mc(fs.field, start_of(c), make_test_function(c.f_fn, fs.state_dim),
                                          make_test_function(c.g_fn, fs.state_dim), ic);
  bool nonnegative = true;
  for (const McSample& s : r.samples)
    if (!s.failed) nonnegative = nonnegative && s.lhs >= 0.0;
  CommandOutput out;
  out.metrics = {{"lhs_estimate", r.lhs_estimate}, {"rhs_estimate", r.rhs_estimate}, {"lhs_se", r.lhs_se},
                 {"rhs_se", r.rhs_se},             {"combined_se", r.combined_se()}, {"n_samples", r.n_samples},
                 {"failures", r.failures},         {"s", r.s_parameter},             {"seed", r.seed}};
  out.verdicts = {{"identity_3se", r.agrees(3.0)}};
  if (c.f_fn == c.g_fn) out.verdicts["lhs_nonnegative"] = nonnegative;
  csv::Table t;
  t.header = {"sample_id", "lhs_term", "rhs_term"};
  for (const McSample& s : r.samples)
    if (!s.failed) t.rows.push_back({static_cast<double>(s.id), s.lhs, s.rhs});
  out.tables.emplace_back("", csv::to_string(t));
  return out;
}

}  // namespace

CommandOutput execute(const RunConfig& c) {
  if (c.command == "lift") return cmd_lift(c);
  if (c.command == "sew-convergence") return cmd_sew(c);
  if (c.command == "solve") return cmd_solve(c);
  if (c.command == "deriv-check") return cmd_deriv(c);
  if (c.command == "taylor") return cmd_taylor(c);
  if (c.command == "driver-flow") return cmd_flow(c);
  if (c.command == "gamma") return cmd_gamma(c);
  if (c.command == "ibp-check") return cmd_ibp(c);
  throw InputError("unknown command '" + c.command + "'");
}

// ---------------------------------------------------------------- entry point

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"roughflow: controlled rough path experiments"};
  app.set_version_flag("--version", std::string(kVersion));
  RunConfig flags;
  std::string config_file;
  std::string x0_text;
  app.add_option("--config", config_file, "JSON run configuration; flags given explicitly override it");
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;
  auto add = [&]<class T>(const std::string& name, T RunConfig::*member, const std::string& help) {
    CLI::Option* opt = app.add_option(name, flags.*member, help);
    overrides.emplace_back(opt, [&flags, member](RunConfig& target) { target.*member = flags.*member; });
  };
  add("--driver", &RunConfig::driver, "smooth:<linear|sin|circle|wave> or fbm");
  add("--hurst", &RunConfig::hurst, "Hurst index of the fbm driver, in (1/3, 1]");
  add("--grid-n", &RunConfig::grid_n, "grid steps, a power of two in [8, 16384]");
  add("--seed", &RunConfig::seed, "master seed");
  add("--field", &RunConfig::field, "field-spec id");
  add("--tol", &RunConfig::tol, "Picard tolerance");
  add("--out", &RunConfig::output, "output file prefix");
  add("--method", &RunConfig::method, "solve: picard or davie");
  add("--levels", &RunConfig::levels, "levels of a convergence study");
  add("--order", &RunConfig::order, "taylor order");
  add("--n", &RunConfig::sphere_dim, "driver-flow: sphere dimension");
  add("--dt", &RunConfig::dt, "driver-flow: flow time step");
  add("--steps", &RunConfig::steps, "driver-flow: flow steps");
  add("--scheme", &RunConfig::scheme, "driver-flow: euler or rk4");
  add("--h-spec", &RunConfig::h_spec, "driver-flow: breakpoints s:v1;..;vn,...");
  add("--s", &RunConfig::s, "ibp-check: rotation time");
  add("--samples", &RunConfig::samples, "ibp-check: Monte Carlo samples");
  add("--f", &RunConfig::f_fn, "ibp-check: test function f");
  add("--g", &RunConfig::g_fn, "ibp-check: test function g");
  add("--threads", &RunConfig::threads, "ibp-check: worker count (0: ROUGHFLOW_THREADS or hardware)");
  CLI::Option* x0_opt = app.add_option("--x0", x0_text, "initial state, comma separated");
  CLI::Option* sweep_opt = app.add_flag("--sweep", flags.sweep, "solve: Davie-vs-Picard convergence study");
  app.require_subcommand(1);
  for (const std::string& name : kCommands) app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  RunConfig config;
  const auto start = std::chrono::steady_clock::now();
  try {
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      require(static_cast<bool>(in), "cannot read config " + config_file);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw InputError("config " + config_file + " is not valid JSON");
      }
      config = config_from_json(j, config);
    }
    for (auto& [opt, apply] : overrides)
      if (opt->count() > 0) apply(config);
    if (sweep_opt->count() > 0) config.sweep = flags.sweep;
    if (x0_opt->count() > 0) {
      config.x0.clear();
      std::stringstream ss(x0_text);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        try {
          config.x0.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw InputError("x0 entry '" + cell + "' is not a number");
        }
      }
    }
    config.command = app.get_subcommands().front()->get_name();
    validate(config);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  json summary;
  int code = 0;
  try {
    const CommandOutput result = execute(config);
    const auto wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    summary = {{"command", config.command}, {"config", config_to_json(config)}, {"metrics", result.metrics},
               {"verdicts", result.verdicts}, {"version", kVersion},          {"wall_ms", wall}};
    if (!config.output.empty()) {
      for (const auto& [suffix, text] : result.tables) {
        std::ofstream f(config.output + suffix + ".csv", std::ios::binary);
        require(static_cast<bool>(f), "cannot write " + config.output + suffix + ".csv");
        f << text;
      }
      std::ofstream js(config.output + ".json");
      require(static_cast<bool>(js), "cannot write " + config.output + ".json");
      js << summary.dump(2) << '\n';
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    code = 3;
    const auto wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    summary = {{"command", config.command}, {"config", config_to_json(config)},
               {"metrics", {{"error", e.what()}}}, {"verdicts", json::object()},
               {"version", kVersion},        {"wall_ms", wall}};
  }
  out << summary.dump(2) << '\n';
  return code;
}

}  // namespace roughflow::cli
