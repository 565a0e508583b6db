#pragma once

// Command-line front end: run configuration, the named experiments, and the
// reusable convergence studies behind them.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "roughflow/csv.hpp"
#include "roughflow/malliavin.hpp"
#include "roughflow/manifold.hpp"
#include "roughflow/rde.hpp"

namespace roughflow::cli {

using json = nlohmann::ordered_json;

inline constexpr Index kMinGrid = 8;
inline constexpr Index kMaxGrid = 16384;
/// Metric floor at the coarsest scale of a convergence study.
inline constexpr double kMetricFloor = 1e-14;

inline const std::vector<std::string> kCommands{"lift",         "sew-convergence", "solve", "deriv-check",
                                                "taylor",       "driver-flow",     "gamma", "ibp-check"};

struct RunConfig {
  std::string command;
  std::string driver = "smooth:sin";  // smooth:<id> or fbm
  double hurst = 0.5;
  Index grid_n = 256;
  std::uint64_t seed = 1;
  std::string field = "scalar-linear";
  std::vector<double> x0;  // empty: the field's default start
  double tol = 1e-12;
  std::string output;  // file prefix; empty writes nothing

  std::string method = "picard";  // solve: picard | davie
  bool sweep = false;             // solve: Davie-vs-Picard convergence study
  int levels = 5;                 // dyadic levels of a convergence study
  int order = 2;                  // taylor
  Index sphere_dim = 2;           // driver-flow: n
  double dt = 1e-2;
  int steps = 100;
  std::string scheme = "euler";
  std::string h_spec;  // driver-flow: "s:v1;..;vn,..." breakpoints; empty: h_s = s (1, 1/2, 0, ..)
  double s = 0.1;      // ibp-check rotation time
  Index samples = 10000;
  std::string f_fn = "x1";
  std::string g_fn = "x1";
  unsigned threads = 0;
};

json config_to_json(const RunConfig& c);
/// Overrides the fields of `base` present in `j`; unknown keys are input errors.
RunConfig config_from_json(const json& j, RunConfig base);
/// Checks ranges and registry ids; fills x0 from the field's default.
void validate(RunConfig& c);

/// Field registry: zero, scalar-linear, rotation, sin-bounded, random-smooth,
/// identity, quadratic, sphere-projector. Dimension comes from x0 where free.
struct FieldSpec {
  OneForm field;
  Index state_dim = 0;
  Index driver_dim = 0;
};
FieldSpec make_field(const std::string& id, Index dim, std::uint64_t seed);
bool is_field_id(const std::string& id);
Eigen::VectorXd default_x0(const std::string& id);

/// Lifted driver of the configured kind with the given dimension.
RoughPathPtr make_driver(const RunConfig& c, Index dim);

/// Least squares in log2-log2 over >= 4 scales.
struct StudyResult {
  std::vector<double> scales;
  std::vector<double> metrics;
  LineFit fit;
  [[nodiscard]] csv::Table table(const std::string& metric_name) const;
};
/// Throws ScaleRangeError when the metric at the coarsest scale is below
/// kMetricFloor.
StudyResult convergence_study(const std::vector<double>& scales, const std::vector<double>& metrics);

/// |sew(s (t - s)) at t = 1 - 1/2| on grids finest / 2^(levels-1), ..., finest.
StudyResult young_sewing_study(Index finest, int levels);

/// Davie on sub-grids of `fine` (areas kept) against the Picard solution on
/// `fine`, sup over the coarse nodes; steps are the coarse step counts.
StudyResult davie_order_study(const OneForm& f, const RoughPathPtr& fine, const Eigen::VectorXd& x0,
                              const std::vector<Index>& steps, double tol = 1e-12);

/// Finite-difference remainders |J(eps) - J(0) - eps v| / eps and their slope.
struct FdCheck {
  std::vector<double> eps;
  std::vector<double> remainders;
  LineFit fit;
};
inline const std::vector<double> kFdEps{1e-1, 1e-2, 1e-3, 1e-4};
FdCheck fd_check_y(const OneForm& f, const ControlledPath& y, const Eigen::VectorXd& x0, const ControlledPath& h,
                   const std::vector<double>& eps = kFdEps);
FdCheck fd_check_F(const OneForm& f, const ControlledPath& y, const Eigen::VectorXd& x0, const OneForm& df,
                   const std::vector<double>& eps = kFdEps);
/// d/deps of the development of the anti-development under P + eps Q against
/// differences of the developments themselves.
FdCheck fd_check_connection(const ProjectorField& p, const MatrixField& q, const ManifoldPath& y,
                            const std::vector<double>& eps = kFdEps);

/// h_s = sin applied componentwise to the values of y.
ControlledPath sine_direction(const ControlledPath& y);

/// Piecewise-linear h on the grid from "s:v1;..;vn,..." (h_0 must be 0).
Eigen::MatrixXd parse_h_spec(const std::string& spec, Index n, const Grid& grid);

/// Test functions "x<i>" (coordinate i, 1-based) and "const".
ScalarFunction make_test_function(const std::string& id, Index dim);

struct CommandOutput {
  json metrics = json::object();
  json verdicts = json::object();
  /// (suffix, CSV text): written to <output><suffix>.csv; the first suffix is "".
  std::vector<std::pair<std::string, std::string>> tables;
};
CommandOutput execute(const RunConfig& c);

/// Full run: parse, validate, execute, write artifacts, print the JSON
/// summary. Returns 0, 2 (validation) or 3 (numerical failure).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace roughflow::cli
