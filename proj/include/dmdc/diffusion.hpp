#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "dmdc/bounds.hpp"
#include "dmdc/snapshots.hpp"

namespace dmdc {

/// 2D heat equation ∂ξ/∂t = α∇²ξ + f on [0, L_a] × [0, L_b], constant
/// Dirichlet edges (ξ_a on a = 0 and a = L_a, ξ_b on b = 0 and b = L_b),
/// central differences in space and backward Euler in time.
struct DiffusionConfig {
  double L_a = 40.0;
  double L_b = 40.0;
  int N_a = 21;  // grid points including the boundary
  int N_b = 21;
  double alpha = 0.45;
  double dt = 1.0;
  // Observation window: starts `inner_margin` nodes in from each edge. Its
  // size defaults to what the margin leaves on both sides; set inner_a/inner_b
  // to use an asymmetric window (e.g. 50 nodes of a 71-node axis).
  int inner_margin = 3;
  int inner_a = 0;
  int inner_b = 0;
  int actuator_span = 5;  // heating points per edge source
  int num_sources = 4;    // bottom, right, top, left edge of the window
  double xi_a = 0.0;
  double xi_b = 0.0;
  double initial_value = 0.0;

  int inner_size_a() const { return inner_a > 0 ? inner_a : N_a - 2 * inner_margin; }
  int inner_size_b() const { return inner_b > 0 ? inner_b : N_b - 2 * inner_margin; }
  int state_dim() const { return inner_size_a() * inner_size_b(); }
  int input_dim() const { return num_sources * actuator_span; }
  double delta_a() const { return L_a / (N_a - 1); }
  double delta_b() const { return L_b / (N_b - 1); }

  /// Throws InvalidArgument naming the first violated constraint.
  void validate() const;
};

/// 21×21 grid, 15×15 window (n = 225), 4 × 5 heating points (q = 20).
DiffusionConfig desk_config();
/// 71×71 grid, 50×50 window (n = 2500), 4 × 21 heating points (q = 84).
DiffusionConfig full_size_config();

void to_json(nlohmann::json& j, const DiffusionConfig& c);
void from_json(const nlohmann::json& j, DiffusionConfig& c);

/// Temperature on the full grid, row-major with b as the row index.
struct FieldState {
  Eigen::VectorXd values;
};

class DiffusionSystem {
 public:
  explicit DiffusionSystem(DiffusionConfig config);

  const DiffusionConfig& config() const { return config_; }
  Eigen::Index grid_size() const { return static_cast<Eigen::Index>(config_.N_a) * config_.N_b; }
  Eigen::Index interior_size() const { return static_cast<Eigen::Index>(interior_.size()); }
  Eigen::Index state_dim() const { return static_cast<Eigen::Index>(inner_.size()); }
  Eigen::Index input_dim() const { return actuator_map_.cols(); }

  /// 5-point Laplacian on interior nodes (Dirichlet values eliminated).
  const Eigen::SparseMatrix<double>& laplacian() const { return laplacian_; }
  /// Grid nodes × q; column i is the 0/1 indicator of heating point i.
  const Eigen::SparseMatrix<double>& actuator_map() const { return actuator_map_; }
  /// Grid node of each observation-window entry, row-major.
  const std::vector<Eigen::Index>& inner_index() const { return inner_; }

  Eigen::Index node(int ia, int jb) const { return static_cast<Eigen::Index>(jb) * config_.N_a + ia; }

  /// Uniform initial_value inside, Dirichlet values on the edges.
  FieldState initial_state() const;

  /// One backward Euler step: (I − α·dt·L) x⁺ = x + dt·(F u) + boundary terms.
  FieldState step(const FieldState& state, const Eigen::VectorXd& u) const;

  /// The same step with homogeneous Dirichlet data: the linear part of `step`.
  FieldState step_linear(const FieldState& state, const Eigen::VectorXd& u) const;

  /// Window state → full field, zero outside the window and on the edges.
  FieldState embed(const Eigen::VectorXd& inner) const;
  Eigen::VectorXd restrict(const FieldState& state) const;

  /// Window-to-window dynamics with everything outside the window held at
  /// zero: the map x ↦ restrict(step_linear(embed(x), u)).
  StepOracle window_oracle() const;

  /// Window vector as an inner_b × inner_a grid; full field as N_b × N_a.
  Eigen::MatrixXd window_grid(const Eigen::VectorXd& inner) const;
  Eigen::MatrixXd field_grid(const FieldState& state) const;

 private:
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  DiffusionConfig config_;
  std::vector<Eigen::Index> interior_;       // interior slot → grid node
  std::vector<Eigen::Index> grid_to_interior_;  // grid node → slot or -1
  std::vector<Eigen::Index> inner_;
  Eigen::SparseMatrix<double> laplacian_;
  Eigen::SparseMatrix<double> implicit_;     // I − α·dt·L
  Eigen::SparseMatrix<double> actuator_map_;
  Eigen::VectorXd boundary_rhs_;             // α·dt × Dirichlet neighbour terms
  Eigen::VectorXd boundary_values_;          // full grid, zero inside
  std::shared_ptr<const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> factor_;
};

DiffusionSystem build_system(const DiffusionConfig& config);

/// Window restriction of the implicit one-step map, column by column through
/// step_linear. Throws AssumptionViolated if the result is not stable.
TruthModel extract_truth(const DiffusionSystem& system);

/// [A B] = Y Ω⁺ by full-rank least squares. Needs m−1 ≥ n+q and Ω of full
/// row rank (RankDeficient otherwise); unstable results are AssumptionViolated.
TruthModel identify_truth(const SnapshotSet& data);

}  // namespace dmdc
