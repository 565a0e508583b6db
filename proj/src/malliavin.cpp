#include "roughflow/malliavin.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <string>
#include <thread>

namespace roughflow {

double CovarianceMatrix::min_eigenvalue() const {
  if (gamma.size() == 0) return 0.0;
  const Eigen::MatrixXd sym = 0.5 * (gamma + gamma.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

CovarianceMatrix malliavin_covariance(const OneForm& f, const RoughPathPtr& x, const Eigen::VectorXd& x0) {
  require(x != nullptr, "malliavin_covariance: missing driver");
  require(f.in_dim() == x0.size() && f.rows() == x0.size(), "malliavin_covariance: x0 does not match F");
  require(f.cols() == x->dim(), "malliavin_covariance: F and driver dimensions differ");
  const Index d = f.in_dim();
  const DerivativeFlow flow = derivative_flow(f, x, x0);
  const Grid& grid = x->grid();

  auto integrand = [&](Index k) {
    const Eigen::MatrixXd u_inv = flow.u_inv_at(k);
    if (!u_inv.allFinite()) throw NumericalError("malliavin_covariance: non-finite inverse flow at node " + std::to_string(k));
    const Eigen::MatrixXd kk = u_inv * f.value(flow.solution.x.value(k));
    return Eigen::MatrixXd(kk * kk.transpose());
  };
  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd left = integrand(0);
  for (Index k = 0; k < grid.steps(); ++k) {
    Eigen::MatrixXd right = integrand(k + 1);
    gamma += 0.5 * (grid.t(k + 1) - grid.t(k)) * (left + right);
    left = std::move(right);
  }
  // Exact symmetry; each summand is symmetric up to rounding.
  gamma = 0.5 * (gamma + gamma.transpose()).eval();
  return {std::move(gamma), grid};
}

Eigen::MatrixXd plane_rotation(Index l, double angle) {
  require(l >= 2, "rotation needs at least two driver coordinates");
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(l, l);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  m(0, 0) = c;
  m(0, 1) = -s;
  m(1, 0) = s;
  m(1, 1) = c;
  return m;
}

RotationAngles sample_rotation_angles(double s, std::uint64_t seed) {
  require(s >= 0.0 && std::isfinite(s), "rotation time s must be finite and nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> normal(0.0, 1.0);
  RotationAngles out;
  out.w0 = uniform(rng);
  out.ws = out.w0 + std::sqrt(s) * normal(rng);
  return out;
}

RoughPath rotation_path(const RoughPath& x, double w) { return rotate(plane_rotation(x.dim(), w), x); }

unsigned worker_count() {
  if (const char* env = std::getenv("ROUGHFLOW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

/// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  [[nodiscard]] double value() const { return sum + carry; }
};

std::pair<double, double> mean_and_se(const std::vector<McSample>& samples, double McSample::*field) {
  CompensatedSum total;
  Index n = 0;
  for (const McSample& s : samples)
    if (!s.failed) {
      total.add(s.*field);
      ++n;
    }
  if (n == 0) return {0.0, 0.0};
  const double mean = total.value() / static_cast<double>(n);
  if (n < 2) return {mean, 0.0};
  CompensatedSum squares;
  for (const McSample& s : samples)
    if (!s.failed) squares.add((s.*field - mean) * (s.*field - mean));
  const double var = squares.value() / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace

double MCReport::combined_se() const { return std::sqrt(lhs_se * lhs_se + rhs_se * rhs_se); }

bool MCReport::agrees(double k) const { return std::abs(lhs_estimate - rhs_estimate) <= k * combined_se(); }

MCReport ibp_reversibility_mc(const OneForm& f, const Eigen::VectorXd& x0, const ScalarFunction& fn,
                              const ScalarFunction& g, const IbpConfig& config) {
  require(config.n_samples >= 100, "ibp_reversibility_mc: need at least 100 samples");
  require(f.cols() >= 2, "ibp_reversibility_mc: the driver needs at least two coordinates");
  require(f.in_dim() == x0.size() && f.rows() == x0.size(), "ibp_reversibility_mc: x0 does not match F");
  require(fn && g, "ibp_reversibility_mc: missing test functions");
  const Index l = f.cols();
  const Grid grid = Grid::uniform(config.grid_n);
  const FbmSampler sampler(config.hurst, grid);
  const double alpha = lift_exponent(config.hurst);

  MCReport report;
  report.n_samples = config.n_samples;
  report.seed = config.seed;
  report.s_parameter = config.s;
  report.samples.resize(static_cast<std::size_t>(config.n_samples));

  auto endpoint = [&](const RoughPath& x) -> Eigen::VectorXd {
    const Solution sol = solve_davie(f, std::make_shared<const RoughPath>(x), x0);
    const Eigen::VectorXd end = sol.x.value(sol.x.size() - 1);
    if (!end.allFinite()) throw DivergenceError("non-finite endpoint");
    return end;
  };
  auto run_sample = [&](Index i) {
    McSample out;
    out.id = i;
    const std::uint64_t sample_seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
    const RoughPath x = lift_piecewise_linear(grid, sampler.sample(l, derive_seed(sample_seed, 0)), alpha);
    const RotationAngles w = sample_rotation_angles(config.s, derive_seed(sample_seed, 1));
    try {
      Eigen::VectorXd j0 = endpoint(rotation_path(x, w.w0));
      Eigen::VectorXd js = config.s == 0.0 ? j0 : endpoint(rotation_path(x, w.ws));
      if (config.swap_roles) std::swap(j0, js);
      const double f0 = fn(j0);
      const double f1 = fn(js);
      const double g0 = g(j0);
      const double g1 = g(js);
      out.lhs = (f1 - f0) * (g1 - g0);
      out.rhs = -2.0 * f0 * (g1 - g0);
      if (!std::isfinite(out.lhs) || !std::isfinite(out.rhs)) out.failed = true;
    } catch (const NumericalError&) {
      out.failed = true;
    }
    return out;
  };

  const unsigned workers =
      std::min<unsigned>(config.threads ? config.threads : worker_count(), static_cast<unsigned>(config.n_samples));
  std::atomic<Index> next{0};
  std::atomic<Index> failed{0};
  const auto max_failures = static_cast<Index>(kMaxFailureFraction * static_cast<double>(config.n_samples));
  auto work = [&] {
    for (Index i = next++; i < config.n_samples; i = next++) {
      if (failed.load() > max_failures) return;
      McSample s = run_sample(i);
      if (s.failed) ++failed;
      report.samples[static_cast<std::size_t>(i)] = s;
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();

  report.failures = failed.load();
  if (report.failures > max_failures)
    throw NumericalError("ibp_reversibility_mc: more than 1% of the samples failed (" +
                         std::to_string(report.failures) + ")");
  std::tie(report.lhs_estimate, report.lhs_se) = mean_and_se(report.samples, &McSample::lhs);
  std::tie(report.rhs_estimate, report.rhs_se) = mean_and_se(report.samples, &McSample::rhs);
  return report;
}

}  // namespace roughflow
