#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "roughflow/types.hpp"

namespace roughflow {

/// Strictly increasing time nodes t_0 < t_1 < ... < t_N.
class Grid {
 public:
  Grid() = default;
  explicit Grid(Eigen::VectorXd nodes);

  /// N equal steps on [0, horizon].
  static Grid uniform(Index steps, double horizon = 1.0);

  [[nodiscard]] Index size() const { return nodes_.size(); }
  [[nodiscard]] Index steps() const { return nodes_.size() - 1; }
  [[nodiscard]] double t(Index i) const { return nodes_(i); }
  [[nodiscard]] double start() const { return nodes_(0); }
  [[nodiscard]] double end() const { return nodes_(nodes_.size() - 1); }
  [[nodiscard]] double horizon() const { return end() - start(); }
  [[nodiscard]] double mesh() const { return mesh_; }
  [[nodiscard]] const Eigen::VectorXd& nodes() const { return nodes_; }
  [[nodiscard]] bool is_uniform(double rel_tol = 1e-12) const;
  /// Sub-grid on the given (strictly increasing) node indices.
  [[nodiscard]] Grid restrict(const std::vector<Index>& indices) const;
  /// Index of a node time; throws if `time` is not a node.
  [[nodiscard]] Index index_of(double time) const;

  bool operator==(const Grid& other) const { return nodes_ == other.nodes_; }

 private:
  Eigen::VectorXd nodes_;
  double mesh_ = 0.0;
};

/// Grid supremum of |value_{ts}| / |t - s|^exponent.
struct HolderReport {
  double exponent = 0.0;
  double norm = 0.0;
  std::pair<Index, Index> argmax_pair{0, 0};
  /// false when the sampled approximation was used (large grids).
  bool exhaustive = true;
};

/// Above this many nodes the Hoelder sup switches to a sampled lag set.
inline constexpr Index kHolderExhaustiveNodes = 2049;

namespace detail {
std::vector<Index> holder_lags(Index span);
}

/// Hoelder sup over node pairs first <= i < j <= last of
/// `pair_norm(i, j) / |t_j - t_i|^exponent`.
template <class PairNorm>
HolderReport holder_norm_pairs(const Grid& grid, Index first, Index last, double exponent,
                               PairNorm&& pair_norm, bool force_exhaustive = false) {
  require(grid.size() >= 1, "holder_norm: empty grid");
  require(exponent > 0.0 && exponent <= 1.0, "holder_norm: exponent must lie in (0, 1]");
  require(0 <= first && first <= last && last < grid.size(), "holder_norm: bad node range");
  HolderReport report;
  report.exponent = exponent;
  report.argmax_pair = {first, last};
  const Index span = last - first;
  if (span == 0) return report;
  const bool exhaustive = force_exhaustive || span + 1 <= kHolderExhaustiveNodes;
  report.exhaustive = exhaustive;
  const bool uniform = grid.is_uniform();
  // Lag-major traversal; on uniform grids |t_j - t_i|^exponent depends on the lag only.
  auto visit_lag = [&](Index lag) {
    const double uniform_scale = uniform ? std::pow(grid.t(first + lag) - grid.t(first), exponent) : 0.0;
    for (Index i = first; i + lag <= last; ++i) {
      const Index j = i + lag;
      const double scale = uniform ? uniform_scale : std::pow(grid.t(j) - grid.t(i), exponent);
      const double ratio = pair_norm(i, j) / scale;
      if (ratio > report.norm) {
        report.norm = ratio;
        report.argmax_pair = {i, j};
      }
    }
  };
  if (exhaustive) {
    for (Index lag = 1; lag <= span; ++lag) visit_lag(lag);
  } else {
    for (Index lag : detail::holder_lags(span)) visit_lag(lag);
  }
  return report;
}

/// Hoelder norm of 1-index data: columns are node values, increments are
/// formed first. The Euclidean norm of each column difference is used.
HolderReport holder_norm(const Grid& grid, const Eigen::MatrixXd& values, double exponent);
HolderReport holder_norm(const Grid& grid, const Eigen::MatrixXd& values, double exponent,
                         Index first, Index last);

/// Two-level weak geometric rough path sampled on a grid. Level 1 is stored as
/// node values, level 2 as the area of each consecutive interval. Areas over
/// arbitrary node pairs come from Chen's relation
///   A_{ts} = A_{tu} + A_{us} + X_{us} (x) X_{tu},   (a (x) b)_{ij} = a_i b_j,
/// through a prefix of A_{t_k, t_0}.
class RoughPath {
 public:
  RoughPath(Grid grid, Eigen::MatrixXd path, const std::vector<Eigen::MatrixXd>& step_areas,
            double alpha);

  [[nodiscard]] Index dim() const { return path_.rows(); }
  [[nodiscard]] const Grid& grid() const { return grid_; }
  [[nodiscard]] Index size() const { return grid_.size(); }
  [[nodiscard]] double alpha() const { return alpha_; }
  /// dim x nodes
  [[nodiscard]] const Eigen::MatrixXd& path() const { return path_; }
  [[nodiscard]] Eigen::VectorXd value(Index i) const { return path_.col(i); }
  /// X_{t_j t_i} = x_j - x_i
  [[nodiscard]] Eigen::VectorXd increment(Index i, Index j) const {
    return path_.col(j) - path_.col(i);
  }
  /// Area over [t_i, t_j], i <= j.
  [[nodiscard]] Eigen::MatrixXd area(Index i, Index j) const;
  /// Stored area of [t_k, t_{k+1}].
  [[nodiscard]] Eigen::MatrixXd step_area(Index k) const;
  [[nodiscard]] std::vector<Eigen::MatrixXd> step_areas() const;

  /// The rough path seen only at the given node indices (areas composed).
  [[nodiscard]] RoughPath restrict(const std::vector<Index>& indices) const;
  [[nodiscard]] RoughPath with_alpha(double alpha) const;

 private:
  Grid grid_;
  Eigen::MatrixXd path_;
  Eigen::MatrixXd step_areas_;  // (dim*dim) x steps, column-major vec
  Eigen::MatrixXd prefix_;      // (dim*dim) x nodes, A_{t_k, t_0}
  double alpha_;
};

using RoughPathPtr = std::shared_ptr<const RoughPath>;

/// Increments and areas for every pair of a node subset, for audits.
struct PairTable {
  Grid grid;
  /// increments[i][j], areas[i][j] for i < j.
  std::vector<std::vector<Eigen::VectorXd>> increments;
  std::vector<std::vector<Eigen::MatrixXd>> areas;
};

PairTable tabulate(const RoughPath& x);
/// Pair table on the node subset `indices` (strictly increasing).
PairTable tabulate(const RoughPath& x, const std::vector<Index>& indices);

/// Canonical lift of the piecewise-linear interpolation of `samples`
/// (dim x nodes): each step area is 1/2 X (x) X.
RoughPath lift_piecewise_linear(const Grid& grid, const Eigen::MatrixXd& samples,
                                double alpha = 0.5);

/// max over s <= u <= t of |A_ts - A_tu - A_us - X_us (x) X_tu|.
double chen_defect(const PairTable& table);
/// Exhaustive for up to `exhaustive_nodes` nodes; above that, exhaustive on
/// an evenly strided sub-grid plus every triple inside windows of
/// `window_steps` consecutive steps.
double chen_defect(const RoughPath& x, Index exhaustive_nodes = 257, Index window_steps = 32);

/// max over node pairs of |Sym(A_ts) - 1/2 X_ts (x) X_ts|.
double geometric_defect(const RoughPath& x);

/// Hoelder norms of the two levels: |X_ts|/|t-s|^a and |A_ts|/|t-s|^(2a).
HolderReport holder_norm_level1(const RoughPath& x, double exponent);
HolderReport holder_norm_level2(const RoughPath& x, double exponent);

/// Exact fractional Brownian motion on a uniform grid by Cholesky
/// factorization of the covariance 1/2 (s^2H + t^2H - |t-s|^2H).
class FbmSampler {
 public:
  FbmSampler(double hurst, Grid grid);
  [[nodiscard]] double hurst() const { return hurst_; }
  [[nodiscard]] const Grid& grid() const { return grid_; }
  /// dim x nodes, every coordinate an independent fBM started at 0.
  [[nodiscard]] Eigen::MatrixXd sample(Index dim, std::uint64_t seed) const;

 private:
  double hurst_;
  Grid grid_;
  Eigen::MatrixXd factor_;  // lower triangular, nodes 1..N
};

/// Hoelder exponent used for fBM lifts: min(H, 1/2) - 0.05, or the midpoint
/// between 1/3 and min(H, 1/2) when that would not exceed 1/3.
double lift_exponent(double hurst);

Eigen::MatrixXd sample_gaussian_driver(double hurst, Index dim, const Grid& grid,
                                       std::uint64_t seed);

/// Level 1 -> M X, level 2 -> M A M^T.
RoughPath rotate(const Eigen::MatrixXd& m, const RoughPath& x);
/// Sub-rough-path on the given coordinates (0-based).
RoughPath project(const RoughPath& x, const std::vector<Index>& coords);
/// Lift of the concatenated path (x, lambda) in R^{l + l'}.
RoughPath joint_lift(const Grid& grid, const Eigen::MatrixXd& x_samples,
                     const Eigen::MatrixXd& lambda_samples, double alpha = 0.5);
/// Joint rough path over (x, lambda) that keeps the areas of `x` in its
/// diagonal block; lambda is interpolated linearly, so the remaining blocks
/// are 1/2 increment products.
RoughPath joint_lift(const RoughPath& x, const Eigen::MatrixXd& lambda_samples);

/// Mixes a master seed with a stream index (splitmix64).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// CSV: header `t,x1..xl[,a11..all]`, one row per node, each step area on the
// row of its right endpoint (zeros on the first row), 17 significant digits.
void write_path_csv(const std::string& file, const Grid& grid, const Eigen::MatrixXd& samples);
void write_rough_path_csv(const std::string& file, const RoughPath& x);
std::string rough_path_csv(const RoughPath& x);
struct PathCsv {
  Grid grid;
  Eigen::MatrixXd samples;
  std::vector<Eigen::MatrixXd> step_areas;  // empty when the file has no area columns
};
PathCsv read_path_csv(const std::string& file);
RoughPath read_rough_path_csv(const std::string& file, double alpha = 0.5);

}  // namespace roughflow
