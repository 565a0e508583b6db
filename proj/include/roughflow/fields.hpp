#pragma once

// Built-in one-forms and smooth drivers. Every CLI field-spec and
// smooth-driver id resolves to one of these.

#include <cstdint>
#include <string>
#include <vector>

#include "roughflow/field.hpp"
#include "roughflow/rough_path.hpp"

namespace roughflow {

/// F(x) = [A_1 x | ... | A_l x].
OneForm linear_field(const std::vector<Eigen::MatrixXd>& generators);
/// Scalar F(x) = c x (d = l = 1).
OneForm scalar_linear_field(double c = 1.0);
/// F(x) = J x with J the quarter-turn generator on R^2 (l = 1).
OneForm rotation_field();
/// Bounded field on R^d with l = d columns:
/// F_ia(x) = delta_ia (1 + 0.5 sin x_i) + 0.3 (1 - delta_ia) cos(x_a + x_i).
OneForm sin_bounded_field(Index d);
/// F_ia(x) = c_ia + s_ia sin(w_ia . x + phi_ia) with random coefficients.
OneForm random_smooth_field(Index d, Index l, std::uint64_t seed);

/// Smooth scalar and planar driver samples on a grid (dim x nodes).
/// ids: "linear" (t), "sin" (sin t), "circle" (cos 2 pi t, sin 2 pi t),
/// "wave" (sin 2t, cos 3t - 1, t^2 / 2).
Eigen::MatrixXd smooth_driver_samples(const std::string& id, const Grid& grid);
bool is_smooth_driver_id(const std::string& id);

}  // namespace roughflow
