#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dmdc/dmdc.hpp"
#include "dmdc/snapshots.hpp"

namespace dmdc {

/// max |λᵢ| over the eigenvalues of a square matrix.
double spectral_radius(const Eigen::MatrixXd& a);

/// Full-order system x_{k+1} = A x_k + B u_k with ρ(A) < 1 enforced on
/// construction (throws AssumptionViolated otherwise).
class TruthModel {
 public:
  TruthModel(Eigen::MatrixXd A, Eigen::MatrixXd B);

  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::MatrixXd& B() const { return B_; }
  double rho() const { return rho_; }
  Eigen::Index n() const { return A_.rows(); }
  Eigen::Index q() const { return B_.cols(); }

  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    return A_ * x + B_ * u;
  }
  StepOracle oracle() const;

 private:
  Eigen::MatrixXd A_;
  Eigen::MatrixXd B_;
  double rho_ = 0.0;
};

struct ThetaError {
  double eps_s = 0.0;    // ‖Θ(I − Û_sÛ_sᵀ)‖₂
  double eps_s_A = 0.0;  // state block of the same residual
  double eps_s_B = 0.0;  // input block
};

/// Residual of projecting the rows of Θ = [A B] onto span(Û_s). On noise-free
/// data this is exactly Θ − Θ̂, so the blocks equal ‖A − Â‖₂ and ‖B − B̂‖₂.
ThetaError theta_projection_error(const TruthModel& truth, const TruncatedSvd& svd_omega);

/// Every scalar entering the prediction bound, plus the diagnostics needed to
/// judge the certificate. Envelope constants are maxima over 0 ≤ k ≤ K_est, so
/// the certificate is valid on that horizon only.
struct BoundConstants {
  double rho_A = 0.0;
  double rho_bar = 0.0;
  double M = 1.0;     // ‖U_r Ã^k U_rᵀ‖ ≤ M ρ̄^k
  double M_sm = 0.0;  // ‖(A − Â) A^k‖ ≤ M_sm ρ̄^k
  double M_rm = 0.0;  // ‖(Â − U_r Ã U_rᵀ) A^k‖ ≤ M_rm ρ̄^k
  double eps_s = 0.0;
  double eps_s_A = 0.0;
  double eps_s_B = 0.0;
  double eps_r_B = 0.0;  // ‖(I − U_r U_rᵀ) B̂‖
  double c_rm = 0.0;     // ‖Â − U_r Ã U_rᵀ‖, reported only
  std::size_t K_est = 0;
  std::optional<double> u_bar;

  // k at which each envelope maximum was attained.
  std::size_t M_argmax = 0;
  std::size_t M_sm_argmax = 0;
  std::size_t M_rm_argmax = 0;
  double rho_tilde = 0.0;
  // ρ(Ã) ≥ ρ̄: the reduced model decays no faster than the envelope rate.
  bool reduced_slower_than_envelope = false;
  // Some envelope maximum sits at k = K_est, so the constant may keep growing
  // past the certified horizon.
  bool horizon_limited = false;

  std::vector<std::pair<std::string, std::string>> to_rows() const;
};

BoundConstants estimate_constants(const TruthModel& truth, const DmdcModel& model,
                                  const Eigen::MatrixXd& A_hat, const Eigen::MatrixXd& B_hat,
                                  std::size_t K_est, double rho_margin = 0.5);

/// Norms fed to the bound: u_norms[j] = ‖u_{m+j}‖, bu_norms[j] = ‖B u_{m+j}‖
/// (or an upper bound on it).
struct InputNorms {
  std::vector<double> u_norms;
  std::vector<double> bu_norms;
};

/// ‖B u‖ evaluated exactly from the truth model.
InputNorms exact_input_norms(const TruthModel& truth, const InputSequence& window);
/// ‖B u‖ replaced by ‖B‖₂·‖u‖.
InputNorms bounded_input_norms(double B_norm, const InputSequence& window);
/// Every ‖u‖ replaced by ū and every ‖B u‖ by ‖B‖₂·ū.
InputNorms uniform_input_norms(double u_bar, double B_norm, std::size_t steps);

/// Scalar sequence indexed k = m, m+1, …, m+K.
struct ErrorTrajectory {
  std::vector<double> values;
  std::size_t m = 0;

  std::size_t size() const { return values.size(); }
  double at_time(std::size_t k) const { return values.at(k - m); }
  double terminal() const { return values.back(); }
};

struct BoundTrajectory {
  ErrorTrajectory bound;
  // The four summands of the bound, same indexing.
  std::vector<double> term1, term2, term3, term4;
};

/// Evaluates the four-term prediction bound at k = m … m+K by direct
/// summation. At k = m the bound reduces to M‖e_m‖.
BoundTrajectory bound_trajectory(const BoundConstants& consts, double e_m_norm, double x_m_norm,
                                 const InputNorms& inputs, std::size_t m, std::size_t K);

/// Limit of the bound for ‖u_k‖ ≤ ū:
/// Mū/(1−ρ̄)·(ε_s^B+ε_r^B) + M‖B‖ū/(1−ρ̄)²·(M_sm+M_rm).
double asymptotic_bound(const BoundConstants& consts, double B_norm);

/// ‖x_k − U_r x̃_k‖ for k = m … m+K, truth and reduced model driven by the
/// same inputs from x̃_m = U_rᵀ x_m.
ErrorTrajectory actual_error_trajectory(const TruthModel& truth, const DmdcModel& model,
                                        const Eigen::VectorXd& x_m, const InputSequence& window,
                                        std::size_t K, std::size_t m = 0);

/// Writes k,bound,actual,term1..term4 with a header row.
void write_certificate_csv(const std::filesystem::path& path, const BoundTrajectory& bound,
                           const ErrorTrajectory& actual);

}  // namespace dmdc
