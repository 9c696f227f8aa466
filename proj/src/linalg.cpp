#include "dmdc/linalg.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "dmdc/error.hpp"

namespace dmdc {

double spectral_norm(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  Eigen::MatrixXd gram;
  if (m.rows() <= m.cols()) {
    gram.noalias() = m * m.transpose();
  } else {
    gram.noalias() = m.transpose() * m;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalFailure("spectral norm: eigen solver failed");
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double spectral_norm_of_product(const Eigen::Ref<const Eigen::MatrixXd>& left,
                                const Eigen::Ref<const Eigen::MatrixXd>& right) {
  // ‖L R‖ = ‖T R‖ where L = Q T is a thin QR of L.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(left);
  const Eigen::Index k = std::min(left.rows(), left.cols());
  Eigen::MatrixXd t = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  Eigen::MatrixXd reduced = t * right;
  return spectral_norm(reduced);
}

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.allFinite(); }

}  // namespace dmdc
