#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <optional>

#include <Eigen/Dense>

#include "dmdc/snapshots.hpp"

namespace dmdc {

/// Rank-limited SVD M ≈ U·diag(S)·Vᵀ keeping the leading `order` triplets.
///
/// Each left singular vector has its largest-magnitude entry non-negative (V
/// is flipped with it), so stored factors are reproducible. Only the span of
/// U is guaranteed when singular values tie at the truncation boundary.
struct TruncatedSvd {
  Eigen::MatrixXd U;
  Eigen::VectorXd S;
  Eigen::MatrixXd V;
  Eigen::Index order = 0;
};

/// max(rows, cols) · σ₁ · 1e-12. Singular values below it are treated as zero.
double rank_tolerance(Eigen::Index rows, Eigen::Index cols, double sigma_max);

/// Throws RankDeficient (with the largest admissible order) when σ_order falls
/// below the rank tolerance, InvalidArgument when order is out of range.
TruncatedSvd truncated_svd(const Eigen::MatrixXd& m, Eigen::Index order);

/// All singular values, descending.
Eigen::VectorXd singular_values(const Eigen::MatrixXd& m);

/// Number of singular values above the rank tolerance.
Eigen::Index numerical_rank(const Eigen::MatrixXd& m);

/// Smallest order whose cumulative energy Σσᵢ² reaches `energy` of the total.
Eigen::Index suggest_order(const Eigen::VectorXd& singular_values, double energy = 0.9999);

struct DmdcModel {
  Eigen::MatrixXd A_tilde;  // r × r
  Eigen::MatrixXd B_tilde;  // r × q
  Eigen::MatrixXd U_r;      // n × r
  Eigen::Index s = 0;
  Eigen::Index r = 0;
  Eigen::Index m = 0;
  Eigen::MatrixXcd W;       // eigenvectors of A_tilde
  Eigen::VectorXcd Lambda;  // eigenvalues of A_tilde
  // SVD of Ω at order s; rows [0, n) form Û₁, rows [n, n+q) form Û₂.
  // Absent for models loaded from disk.
  std::optional<TruncatedSvd> svd_omega;

  Eigen::Index n() const { return U_r.rows(); }
  Eigen::Index q() const { return B_tilde.cols(); }
};

/// Reduced operators Ã = U_rᵀ Y V̂ Σ̂⁻¹ Û₁ᵀ U_r and B̃ = U_rᵀ Y V̂ Σ̂⁻¹ Û₂ᵀ.
/// Nothing of size n × n is formed.
DmdcModel fit_dmdc(const SnapshotSet& data, Eigen::Index s, Eigen::Index r);

struct FullOrderEstimate {
  Eigen::MatrixXd A_hat;  // n × n
  Eigen::MatrixXd B_hat;  // n × q
};

/// Â = Y V̂ Σ̂⁻¹ Û₁ᵀ, B̂ = Y V̂ Σ̂⁻¹ Û₂ᵀ. O(n²) memory; diagnostics only.
FullOrderEstimate estimate_full_order(const SnapshotSet& data, Eigen::Index s);

struct ReducedTrajectory {
  Eigen::MatrixXd states;  // r × (K+1)
  Eigen::Index start_index = 0;
};

/// x̃₀ = U_rᵀ x_start, x̃_{k+1} = Ã x̃_k + B̃ u_k for k < steps.
ReducedTrajectory predict(const DmdcModel& model, const Eigen::VectorXd& x_start,
                          const InputSequence& inputs, Eigen::Index steps,
                          Eigen::Index start_index = 0);

/// Column k is U_r x̃_k.
Eigen::MatrixXd reconstruct(const DmdcModel& model, const ReducedTrajectory& traj);

struct DmdModes {
  Eigen::VectorXcd Lambda;
  Eigen::MatrixXcd Phi;  // n × r, Φ = U_r W
};

/// Projected DMD modes. Throws IllConditioned when cond(W) ≥ max_condition.
DmdModes dmd_modes(const DmdcModel& model, double max_condition = 1e12);

/// Writes A_tilde.csv, B_tilde.csv, U_r.csv, lambda_re.csv, lambda_im.csv and
/// meta.csv (one row: n,q,s,r,m) into `dir`, creating it if needed.
void save_model(const DmdcModel& model, const std::filesystem::path& dir);
DmdcModel load_model(const std::filesystem::path& dir);

}  // namespace dmdc
