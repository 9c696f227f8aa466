#pragma once

// Reference computations used as oracles: slow, explicit, and built on
// different Eigen routines than the library where possible.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace testing {

// Largest singular value via a two-sided Jacobi SVD.
inline double norm2(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

// Random A with spectral radius `rho` (scaled Gaussian) and Gaussian B.
inline void random_system(int n, int q, double rho, unsigned seed, Eigen::MatrixXd& A,
                          Eigen::MatrixXd& B) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  A = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return nd(gen); });
  const double r = Eigen::EigenSolver<Eigen::MatrixXd>(A).eigenvalues().cwiseAbs().maxCoeff();
  A *= rho / r;
  B = Eigen::MatrixXd::NullaryExpr(n, q, [&] { return nd(gen); });
}

inline Eigen::MatrixXd random_matrix(int rows, int cols, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return nd(gen); });
}

// max_k ‖L·A^k‖ / ρ̄^k for 0 ≤ k ≤ K, powers formed explicitly.
inline double envelope_scan(const Eigen::MatrixXd& L, const Eigen::MatrixXd& A, double rho_bar,
                            int K) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  double best = 0.0;
  for (int k = 0; k <= K; ++k) {
    best = std::max(best, norm2(L * P) / std::pow(rho_bar, k));
    P = A * P;
  }
  return best;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dmdc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
