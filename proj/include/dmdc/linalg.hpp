#pragma once

#include <Eigen/Dense>

namespace dmdc {

/// Largest singular value. Eigenvalues of the Gram matrix on the smaller
/// side; the top eigenvalue is relatively accurate to machine precision.
double spectral_norm(const Eigen::Ref<const Eigen::MatrixXd>& m);

/// ‖L·R‖₂ for a thin left factor L (rows × k) without forming the product.
double spectral_norm_of_product(const Eigen::Ref<const Eigen::MatrixXd>& left,
                                const Eigen::Ref<const Eigen::MatrixXd>& right);

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m);

}  // namespace dmdc
