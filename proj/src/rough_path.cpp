#include "roughflow/rough_path.hpp"

#include <algorithm>
#include <random>

#include "roughflow/csv.hpp"

namespace roughflow {

// ---------------------------------------------------------------- Grid

Grid::Grid(Eigen::VectorXd nodes) : nodes_(std::move(nodes)) {
  require(nodes_.size() >= 2, "grid needs at least two nodes");
  for (Index i = 0; i + 1 < nodes_.size(); ++i) {
    require(std::isfinite(nodes_(i)) && std::isfinite(nodes_(i + 1)), "grid nodes must be finite");
    require(nodes_(i + 1) > nodes_(i), "grid nodes must be strictly increasing");
    mesh_ = std::max(mesh_, nodes_(i + 1) - nodes_(i));
  }
}

Grid Grid::uniform(Index steps, double horizon) {
  require(steps >= 1, "uniform grid needs at least one step");
  require(horizon > 0.0, "uniform grid needs a positive horizon");
  Eigen::VectorXd nodes(steps + 1);
  for (Index i = 0; i <= steps; ++i)
    nodes(i) = horizon * static_cast<double>(i) / static_cast<double>(steps);
  return Grid(std::move(nodes));
}

bool Grid::is_uniform(double rel_tol) const {
  const double h = horizon() / static_cast<double>(steps());
  for (Index i = 0; i < steps(); ++i)
    if (std::abs((nodes_(i + 1) - nodes_(i)) - h) > rel_tol * h * 8.0) return false;
  return true;
}

Grid Grid::restrict(const std::vector<Index>& indices) const {
  require(indices.size() >= 2, "sub-grid needs at least two nodes");
  Eigen::VectorXd sub(static_cast<Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    require(indices[k] >= 0 && indices[k] < size(), "sub-grid index out of range");
    sub(static_cast<Index>(k)) = nodes_(indices[k]);
  }
  return Grid(std::move(sub));
}

Index Grid::index_of(double time) const {
  const double* begin = nodes_.data();
  const double* end = begin + nodes_.size();
  const double* it = std::lower_bound(begin, end, time);
  if (it == end || *it != time) throw InputError("time " + csv::format(time) + " is not a grid node");
  return static_cast<Index>(it - begin);
}

// ---------------------------------------------------------------- Hoelder

namespace detail {

std::vector<Index> holder_lags(Index span) {
  std::vector<Index> lags;
  constexpr Index kDense = 64;
  for (Index lag = 1; lag <= std::min(span, kDense); ++lag) lags.push_back(lag);
  double next = static_cast<double>(kDense);
  while (true) {
    next *= 1.05;
    const auto lag = static_cast<Index>(std::ceil(next));
    if (lag >= span) break;
    if (lag > lags.back()) lags.push_back(lag);
  }
  if (lags.back() != span) lags.push_back(span);
  return lags;
}

}  // namespace detail

HolderReport holder_norm(const Grid& grid, const Eigen::MatrixXd& values, double exponent) {
  require(values.cols() >= 1, "holder_norm: empty data");
  return holder_norm(grid, values, exponent, 0, values.cols() - 1);
}

HolderReport holder_norm(const Grid& grid, const Eigen::MatrixXd& values, double exponent,
                         Index first, Index last) {
  require(values.cols() == grid.size(), "holder_norm: data and grid sizes differ");
  return holder_norm_pairs(grid, first, last, exponent, [&values](Index i, Index j) {
    return (values.col(j) - values.col(i)).norm();
  });
}

// ---------------------------------------------------------------- RoughPath

namespace {

Eigen::Map<const Eigen::MatrixXd> as_square(const Eigen::MatrixXd& cols, Index k, Index dim) {
  return {cols.col(k).data(), dim, dim};
}

}  // namespace

RoughPath::RoughPath(Grid grid, Eigen::MatrixXd path, const std::vector<Eigen::MatrixXd>& step_areas,
                     double alpha)
    : grid_(std::move(grid)), path_(std::move(path)), alpha_(alpha) {
  require(path_.rows() >= 1, "rough path dimension must be at least 1");
  require(path_.cols() == grid_.size(), "rough path: sample count differs from grid size");
  require(static_cast<Index>(step_areas.size()) == grid_.steps(),
          "rough path: one area per grid step expected");
  require(alpha_ > 1.0 / 3.0 && alpha_ <= 0.5, "rough path: alpha must lie in (1/3, 1/2]");
  require(path_.allFinite(), "rough path: non-finite samples");
  const Index l = dim();
  step_areas_.resize(l * l, grid_.steps());
  for (Index k = 0; k < grid_.steps(); ++k) {
    const auto& a = step_areas[static_cast<std::size_t>(k)];
    require(a.rows() == l && a.cols() == l, "rough path: area shape must be dim x dim");
    require(a.allFinite(), "rough path: non-finite area");
    step_areas_.col(k) = Eigen::Map<const Eigen::VectorXd>(a.data(), l * l);
  }
  prefix_ = Eigen::MatrixXd::Zero(l * l, grid_.size());
  for (Index k = 0; k < grid_.steps(); ++k) {
    Eigen::MatrixXd next = as_square(prefix_, k, l) + as_square(step_areas_, k, l) +
                           (path_.col(k) - path_.col(0)) * (path_.col(k + 1) - path_.col(k)).transpose();
    prefix_.col(k + 1) = Eigen::Map<const Eigen::VectorXd>(next.data(), l * l);
  }
}

Eigen::MatrixXd RoughPath::area(Index i, Index j) const {
  require(0 <= i && i <= j && j < size(), "area: need 0 <= i <= j < nodes");
  const Index l = dim();
  if (i == j) return Eigen::MatrixXd::Zero(l, l);
  if (j == i + 1) return step_area(i);
  return as_square(prefix_, j, l) - as_square(prefix_, i, l) -
         (path_.col(i) - path_.col(0)) * (path_.col(j) - path_.col(i)).transpose();
}

Eigen::MatrixXd RoughPath::step_area(Index k) const { return as_square(step_areas_, k, dim()); }

std::vector<Eigen::MatrixXd> RoughPath::step_areas() const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(grid_.steps()));
  for (Index k = 0; k < grid_.steps(); ++k) out.push_back(step_area(k));
  return out;
}

RoughPath RoughPath::restrict(const std::vector<Index>& indices) const {
  Grid sub = grid_.restrict(indices);
  Eigen::MatrixXd samples(dim(), static_cast<Index>(indices.size()));
  std::vector<Eigen::MatrixXd> areas;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    samples.col(static_cast<Index>(k)) = path_.col(indices[k]);
    if (k + 1 < indices.size()) areas.push_back(area(indices[k], indices[k + 1]));
  }
  return RoughPath(std::move(sub), std::move(samples), areas, alpha_);
}

RoughPath RoughPath::with_alpha(double alpha) const {
  return RoughPath(grid_, path_, step_areas(), alpha);
}

// ---------------------------------------------------------------- audits

PairTable tabulate(const RoughPath& x, const std::vector<Index>& indices) {
  PairTable table;
  table.grid = x.grid().restrict(indices);
  const auto n = indices.size();
  table.increments.assign(n, std::vector<Eigen::VectorXd>(n));
  table.areas.assign(n, std::vector<Eigen::MatrixXd>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      table.increments[i][j] = x.increment(indices[i], indices[j]);
      table.areas[i][j] = x.area(indices[i], indices[j]);
    }
  return table;
}

PairTable tabulate(const RoughPath& x) {
  std::vector<Index> all(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i) all[static_cast<std::size_t>(i)] = i;
  return tabulate(x, all);
}

RoughPath lift_piecewise_linear(const Grid& grid, const Eigen::MatrixXd& samples, double alpha) {
  require(samples.rows() >= 1, "lift: dimension must be at least 1");
  require(samples.cols() == grid.size(), "lift: sample count differs from grid size");
  std::vector<Eigen::MatrixXd> areas;
  areas.reserve(static_cast<std::size_t>(grid.steps()));
  for (Index k = 0; k < grid.steps(); ++k) {
    const Eigen::VectorXd dx = samples.col(k + 1) - samples.col(k);
    areas.push_back(0.5 * dx * dx.transpose());
  }
  return RoughPath(grid, samples, areas, alpha);
}

double chen_defect(const PairTable& table) {
  const std::size_t n = table.areas.size();
  double worst = 0.0;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = s + 2; t < n; ++t) {
      const Eigen::MatrixXd& ast = table.areas[s][t];
      for (std::size_t u = s + 1; u < t; ++u) {
        const double defect = (ast - table.areas[u][t] - table.areas[s][u] -
                               table.increments[s][u] * table.increments[u][t].transpose())
                                  .norm();
        worst = std::max(worst, defect);
      }
    }
  return worst;
}

double chen_defect(const RoughPath& x, Index exhaustive_nodes, Index window_steps) {
  if (x.size() <= exhaustive_nodes) return chen_defect(tabulate(x));
  const Index n = x.size();
  std::vector<Index> strided;
  for (Index k = 0; k < exhaustive_nodes; ++k) {
    const Index idx = (k * (n - 1)) / (exhaustive_nodes - 1);
    if (strided.empty() || idx > strided.back()) strided.push_back(idx);
  }
  double worst = chen_defect(tabulate(x, strided));
  const Index step = std::max<Index>(1, window_steps / 2);
  for (Index start = 0; start < n - 1; start += step) {
    const Index stop = std::min(n - 1, start + window_steps);
    std::vector<Index> window;
    for (Index i = start; i <= stop; ++i) window.push_back(i);
    if (window.size() >= 3) worst = std::max(worst, chen_defect(tabulate(x, window)));
  }
  return worst;
}

double geometric_defect(const RoughPath& x) {
  // Symmetric part of A_{ij} minus dx dx^T / 2, written out entrywise to keep
  // the all-pairs sweep allocation free.
  const Index l = x.dim();
  const Eigen::MatrixXd& path = x.path();
  double worst = 0.0;
  Eigen::MatrixXd a(l, l);
  Eigen::VectorXd dx(l);
  for (Index i = 0; i < x.size(); ++i)
    for (Index j = i + 1; j < x.size(); ++j) {
      a = x.area(i, j);
      dx.noalias() = path.col(j) - path.col(i);
      double sq = 0.0;
      for (Index c = 0; c < l; ++c)
        for (Index r = 0; r < l; ++r) {
          const double e = 0.5 * (a(r, c) + a(c, r)) - 0.5 * dx(r) * dx(c);
          sq += e * e;
        }
      worst = std::max(worst, std::sqrt(sq));
    }
  return worst;
}

HolderReport holder_norm_level1(const RoughPath& x, double exponent) {
  return holder_norm(x.grid(), x.path(), exponent);
}

HolderReport holder_norm_level2(const RoughPath& x, double exponent) {
  return holder_norm_pairs(x.grid(), 0, x.size() - 1, exponent,
                           [&x](Index i, Index j) { return x.area(i, j).norm(); });
}

// ---------------------------------------------------------------- drivers

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

FbmSampler::FbmSampler(double hurst, Grid grid) : hurst_(hurst), grid_(std::move(grid)) {
  require(hurst_ > 1.0 / 3.0 && hurst_ <= 1.0, "hurst outside (1/3, 1]");
  require(grid_.is_uniform(), "fBM sampler needs a uniform grid");
  const Index n = grid_.steps();
  if (hurst_ == 1.0) return;  // X_t = t * xi, rank one
  Eigen::MatrixXd cov(n, n);
  const double two_h = 2.0 * hurst_;
  for (Index i = 0; i < n; ++i) {
    const double s = grid_.t(i + 1) - grid_.start();
    for (Index j = 0; j <= i; ++j) {
      const double t = grid_.t(j + 1) - grid_.start();
      cov(i, j) = 0.5 * (std::pow(s, two_h) + std::pow(t, two_h) - std::pow(std::abs(t - s), two_h));
      cov(j, i) = cov(i, j);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
    return;
  }
  // Nearly singular for H close to 1: symmetric square root instead.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  factor_ = eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::MatrixXd FbmSampler::sample(Index dim, std::uint64_t seed) const {
  require(dim >= 1, "fBM sample dimension must be at least 1");
  const Index n = grid_.steps();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim, n + 1);
  Eigen::VectorXd xi(n);
  for (Index c = 0; c < dim; ++c) {
    if (hurst_ == 1.0) {
      const double g = normal(rng);
      for (Index i = 1; i <= n; ++i) out(c, i) = (grid_.t(i) - grid_.start()) * g;
      continue;
    }
    for (Index i = 0; i < n; ++i) xi(i) = normal(rng);
    out.row(c).tail(n) = (factor_.triangularView<Eigen::Lower>() * xi).transpose();
  }
  return out;
}

double lift_exponent(double hurst) {
  require(hurst > 1.0 / 3.0 && hurst <= 1.0, "hurst outside (1/3, 1]");
  const double top = std::min(hurst, 0.5);
  return top - 0.05 > 1.0 / 3.0 ? top - 0.05 : 0.5 * (top + 1.0 / 3.0);
}

Eigen::MatrixXd sample_gaussian_driver(double hurst, Index dim, const Grid& grid,
                                       std::uint64_t seed) {
  require(grid.is_uniform(), "fBM driver needs a uniform grid");
  return FbmSampler(hurst, grid).sample(dim, seed);
}

// ---------------------------------------------------------------- group actions

RoughPath rotate(const Eigen::MatrixXd& m, const RoughPath& x) {
  require(m.rows() == x.dim() && m.cols() == x.dim(), "rotate: matrix must be dim x dim");
  std::vector<Eigen::MatrixXd> areas;
  areas.reserve(static_cast<std::size_t>(x.grid().steps()));
  for (Index k = 0; k < x.grid().steps(); ++k) areas.push_back(m * x.step_area(k) * m.transpose());
  return RoughPath(x.grid(), m * x.path(), areas, x.alpha());
}

RoughPath project(const RoughPath& x, const std::vector<Index>& coords) {
  require(!coords.empty(), "project: empty coordinate set");
  for (Index c : coords) require(c >= 0 && c < x.dim(), "project: coordinate out of range");
  const auto k = static_cast<Index>(coords.size());
  Eigen::MatrixXd samples(k, x.size());
  for (Index r = 0; r < k; ++r) samples.row(r) = x.path().row(coords[static_cast<std::size_t>(r)]);
  std::vector<Eigen::MatrixXd> areas;
  areas.reserve(static_cast<std::size_t>(x.grid().steps()));
  for (Index s = 0; s < x.grid().steps(); ++s) {
    const Eigen::MatrixXd full = x.step_area(s);
    Eigen::MatrixXd sub(k, k);
    for (Index i = 0; i < k; ++i)
      for (Index j = 0; j < k; ++j)
        sub(i, j) = full(coords[static_cast<std::size_t>(i)], coords[static_cast<std::size_t>(j)]);
    areas.push_back(std::move(sub));
  }
  return RoughPath(x.grid(), std::move(samples), areas, x.alpha());
}

RoughPath joint_lift(const Grid& grid, const Eigen::MatrixXd& x_samples,
                     const Eigen::MatrixXd& lambda_samples, double alpha) {
  require(x_samples.cols() == grid.size() && lambda_samples.cols() == grid.size(),
          "joint_lift: both sample sets must live on the grid");
  Eigen::MatrixXd joint(x_samples.rows() + lambda_samples.rows(), grid.size());
  joint.topRows(x_samples.rows()) = x_samples;
  joint.bottomRows(lambda_samples.rows()) = lambda_samples;
  return lift_piecewise_linear(grid, joint, alpha);
}

RoughPath joint_lift(const RoughPath& x, const Eigen::MatrixXd& lambda_samples) {
  require(lambda_samples.cols() == x.size(), "joint_lift: lambda must live on the grid of x");
  const Index l = x.dim();
  const Index k = lambda_samples.rows();
  Eigen::MatrixXd joint(l + k, x.size());
  joint.topRows(l) = x.path();
  joint.bottomRows(k) = lambda_samples;
  std::vector<Eigen::MatrixXd> areas;
  areas.reserve(static_cast<std::size_t>(x.grid().steps()));
  for (Index s = 0; s < x.grid().steps(); ++s) {
    const Eigen::VectorXd dz = joint.col(s + 1) - joint.col(s);
    Eigen::MatrixXd a = 0.5 * dz * dz.transpose();
    a.topLeftCorner(l, l) = x.step_area(s);
    areas.push_back(std::move(a));
  }
  return RoughPath(x.grid(), std::move(joint), areas, x.alpha());
}

// ---------------------------------------------------------------- CSV

namespace {

csv::Table path_table(const Grid& grid, const Eigen::MatrixXd& samples,
                      const std::vector<Eigen::MatrixXd>* areas) {
  const Index l = samples.rows();
  csv::Table table;
  table.header.push_back("t");
  for (Index i = 1; i <= l; ++i) table.header.push_back("x" + std::to_string(i));
  if (areas)
    for (Index i = 1; i <= l; ++i)
      for (Index j = 1; j <= l; ++j) table.header.push_back("a" + std::to_string(i) + std::to_string(j));
  for (Index k = 0; k < grid.size(); ++k) {
    std::vector<double> row;
    row.push_back(grid.t(k));
    for (Index i = 0; i < l; ++i) row.push_back(samples(i, k));
    if (areas)
      for (Index i = 0; i < l; ++i)
        for (Index j = 0; j < l; ++j)
          row.push_back(k == 0 ? 0.0 : (*areas)[static_cast<std::size_t>(k - 1)](i, j));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace

void write_path_csv(const std::string& file, const Grid& grid, const Eigen::MatrixXd& samples) {
  require(samples.cols() == grid.size(), "write_path_csv: sample count differs from grid size");
  csv::write(file, path_table(grid, samples, nullptr));
}

std::string rough_path_csv(const RoughPath& x) {
  const auto areas = x.step_areas();
  return csv::to_string(path_table(x.grid(), x.path(), &areas));
}

void write_rough_path_csv(const std::string& file, const RoughPath& x) {
  const auto areas = x.step_areas();
  csv::write(file, path_table(x.grid(), x.path(), &areas));
}

PathCsv read_path_csv(const std::string& file) {
  const csv::Table table = csv::read(file);
  require(!table.header.empty() && table.header[0] == "t", file + ": first column must be t");
  Index l = 0;
  while (static_cast<std::size_t>(l + 1) < table.header.size() &&
         table.header[static_cast<std::size_t>(l + 1)].rfind('x', 0) == 0)
    ++l;
  require(l >= 1, file + ": no path columns");
  const auto extra = static_cast<Index>(table.header.size()) - 1 - l;
  require(extra == 0 || extra == l * l, file + ": area columns must number dim^2");
  const auto n = static_cast<Index>(table.rows.size());
  require(n >= 2, file + ": need at least two rows");
  Eigen::VectorXd nodes(n);
  PathCsv out;
  out.samples.resize(l, n);
  for (Index k = 0; k < n; ++k) {
    const auto& row = table.rows[static_cast<std::size_t>(k)];
    nodes(k) = row[0];
    for (Index i = 0; i < l; ++i) out.samples(i, k) = row[static_cast<std::size_t>(1 + i)];
    if (extra > 0 && k > 0) {
      Eigen::MatrixXd a(l, l);
      for (Index i = 0; i < l; ++i)
        for (Index j = 0; j < l; ++j) a(i, j) = row[static_cast<std::size_t>(1 + l + i * l + j)];
      out.step_areas.push_back(std::move(a));
    }
  }
  out.grid = Grid(std::move(nodes));
  return out;
}

RoughPath read_rough_path_csv(const std::string& file, double alpha) {
  PathCsv data = read_path_csv(file);
  require(!data.step_areas.empty(), file + ": no area columns");
  return RoughPath(std::move(data.grid), std::move(data.samples), data.step_areas, alpha);
}

}  // namespace roughflow
