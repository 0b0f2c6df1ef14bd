#pragma once

#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace banditstop {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A Gram matrix is treated as singular when
///   lambda_min <= kSingularRelTol * max(lambda_max, 1).
inline constexpr double kSingularRelTol = 1e-10;

bool is_singular_gram(const Matrix& gram);

/// Cholesky factor of a symmetric PSD matrix, or nullopt when it is singular
/// under the threshold above.
std::optional<Eigen::LLT<Matrix>> factor_gram(const Matrix& gram);

/// max |a_ij - a_ji| <= tol * max(1, max |a_ij|)
bool is_symmetric(const Matrix& m, double tol = 1e-9);

}  // namespace banditstop
