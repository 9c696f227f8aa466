#include "dmdc/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "dmdc/csv.hpp"
#include "dmdc/dmdc.hpp"
#include "dmdc/error.hpp"

namespace dmdc {

void DiffusionConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("diffusion config: " + msg); };
  if (!(L_a > 0.0) || !(L_b > 0.0)) fail("domain lengths must be positive");
  if (N_a < 3 || N_b < 3) fail("need at least 3 grid points per axis");
  if (!(alpha > 0.0)) fail("alpha must be positive");
  if (!(dt > 0.0)) fail("dt must be positive");
  if (inner_margin < 1) fail("inner_margin must be at least 1 so the window avoids the edges");
  if (inner_a < 0 || inner_b < 0) fail("inner window sizes must be non-negative");
  const int na = inner_size_a();
  const int nb = inner_size_b();
  if (na < 1 || nb < 1) fail("inner window is empty");
  if (inner_margin + na > N_a - 1 || inner_margin + nb > N_b - 1) {
    fail("inner window reaches the boundary");
  }
  if (num_sources < 1 || num_sources > 4) fail("num_sources must be between 1 and 4");
  if (actuator_span < 1) fail("actuator_span must be positive");
  if (actuator_span > std::min(na, nb)) fail("actuator_span exceeds the inner edge length");
  if (!std::isfinite(xi_a) || !std::isfinite(xi_b) || !std::isfinite(initial_value)) {
    fail("boundary and initial values must be finite");
  }
}

DiffusionConfig desk_config() { return DiffusionConfig{}; }

DiffusionConfig full_size_config() {
  DiffusionConfig c;
  c.N_a = 71;
  c.N_b = 71;
  c.inner_margin = 10;
  c.inner_a = 50;
  c.inner_b = 50;
  c.actuator_span = 21;
  return c;
}

void to_json(nlohmann::json& j, const DiffusionConfig& c) {
  j = nlohmann::json{{"L_a", c.L_a},
                     {"L_b", c.L_b},
                     {"N_a", c.N_a},
                     {"N_b", c.N_b},
                     {"alpha", c.alpha},
                     {"dt", c.dt},
                     {"inner_margin", c.inner_margin},
                     {"inner_a", c.inner_a},
                     {"inner_b", c.inner_b},
                     {"actuator_span", c.actuator_span},
                     {"num_sources", c.num_sources},
                     {"xi_a", c.xi_a},
                     {"xi_b", c.xi_b},
                     {"initial_value", c.initial_value}};
}

void from_json(const nlohmann::json& j, DiffusionConfig& c) {
  // Missing keys keep their current value so partial files override defaults.
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("L_a", c.L_a);
  get("L_b", c.L_b);
  get("N_a", c.N_a);
  get("N_b", c.N_b);
  get("alpha", c.alpha);
  get("dt", c.dt);
  get("inner_margin", c.inner_margin);
  get("inner_a", c.inner_a);
  get("inner_b", c.inner_b);
  get("actuator_span", c.actuator_span);
  get("num_sources", c.num_sources);
  get("xi_a", c.xi_a);
  get("xi_b", c.xi_b);
  get("initial_value", c.initial_value);
}

DiffusionSystem::DiffusionSystem(DiffusionConfig config) : config_(std::move(config)) {
  config_.validate();
  const int Na = config_.N_a;
  const int Nb = config_.N_b;
  const Eigen::Index nodes = grid_size();

  grid_to_interior_.assign(static_cast<std::size_t>(nodes), -1);
  boundary_values_ = Eigen::VectorXd::Zero(nodes);
  for (int jb = 0; jb < Nb; ++jb) {
    for (int ia = 0; ia < Na; ++ia) {
      const Eigen::Index id = node(ia, jb);
      if (ia == 0 || ia == Na - 1) {
        boundary_values_(id) = config_.xi_a;
      } else if (jb == 0 || jb == Nb - 1) {
        boundary_values_(id) = config_.xi_b;
      } else {
        grid_to_interior_[static_cast<std::size_t>(id)] = static_cast<Eigen::Index>(interior_.size());
        interior_.push_back(id);
      }
    }
  }

  const double ia2 = 1.0 / (config_.delta_a() * config_.delta_a());
  const double ib2 = 1.0 / (config_.delta_b() * config_.delta_b());
  const double coupling = config_.alpha * config_.dt;
  const Eigen::Index ni = interior_size();

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(ni) * 5);
  boundary_rhs_ = Eigen::VectorXd::Zero(ni);
  for (Eigen::Index slot = 0; slot < ni; ++slot) {
    const Eigen::Index id = interior_[static_cast<std::size_t>(slot)];
    const int ia = static_cast<int>(id % Na);
    const int jb = static_cast<int>(id / Na);
    trips.emplace_back(slot, slot, -2.0 * ia2 - 2.0 * ib2);
    const std::pair<Eigen::Index, double> neighbours[] = {
        {node(ia - 1, jb), ia2}, {node(ia + 1, jb), ia2},
        {node(ia, jb - 1), ib2}, {node(ia, jb + 1), ib2}};
    for (const auto& [nb, w] : neighbours) {
      const Eigen::Index other = grid_to_interior_[static_cast<std::size_t>(nb)];
      if (other >= 0) {
        trips.emplace_back(slot, other, w);
      } else {
        boundary_rhs_(slot) += coupling * w * boundary_values_(nb);
      }
    }
  }
  laplacian_.resize(ni, ni);
  laplacian_.setFromTriplets(trips.begin(), trips.end());

  Eigen::SparseMatrix<double> identity(ni, ni);
  identity.setIdentity();
  implicit_ = identity - coupling * laplacian_;
  auto factor = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(implicit_);
  if (factor->info() != Eigen::Success) {
    throw NumericalFailure("factorization of the implicit step matrix failed");
  }
  factor_ = std::move(factor);

  const int i0 = config_.inner_margin;
  const int j0 = config_.inner_margin;
  const int na = config_.inner_size_a();
  const int nb = config_.inner_size_b();
  for (int jb = j0; jb < j0 + nb; ++jb)
    for (int ia = i0; ia < i0 + na; ++ia) inner_.push_back(node(ia, jb));

  // Sources centred on the window edges: bottom, right, top, left. Each
  // heating point is a separate input column.
  const int span = config_.actuator_span;
  const int off_a = (na - span) / 2;
  const int off_b = (nb - span) / 2;
  std::vector<Eigen::Triplet<double>> act;
  Eigen::Index col = 0;
  for (int src = 0; src < config_.num_sources; ++src) {
    for (int p = 0; p < span; ++p, ++col) {
      Eigen::Index id = 0;
      switch (src) {
        case 0: id = node(i0 + off_a + p, j0); break;
        case 1: id = node(i0 + na - 1, j0 + off_b + p); break;
        case 2: id = node(i0 + na - 1 - off_a - p, j0 + nb - 1); break;
        default: id = node(i0, j0 + nb - 1 - off_b - p); break;
      }
      act.emplace_back(id, col, 1.0);
    }
  }
  actuator_map_.resize(nodes, col);
  actuator_map_.setFromTriplets(act.begin(), act.end());
}

FieldState DiffusionSystem::initial_state() const {
  FieldState s{boundary_values_};
  for (const Eigen::Index id : interior_) s.values(id) = config_.initial_value;
  return s;
}

Eigen::VectorXd DiffusionSystem::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = factor_->solve(rhs);
  if (factor_->info() != Eigen::Success || !x.allFinite()) {
    throw NumericalFailure("implicit step solve failed");
  }
  const double residual = (implicit_ * x - rhs).norm();
  if (residual > 1e-10 * std::max(rhs.norm(), 1e-300) && residual > 1e-300) {
    throw NumericalFailure("implicit step residual " + format_double(residual) +
                           " exceeds tolerance");
  }
  return x;
}

namespace {

void check_step_args(const DiffusionSystem& sys, const FieldState& state, const Eigen::VectorXd& u) {
  if (state.values.size() != sys.grid_size()) {
    throw InvalidArgument("field has " + std::to_string(state.values.size()) +
                          " entries, grid has " + std::to_string(sys.grid_size()));
  }
  if (u.size() != sys.input_dim()) {
    throw InvalidArgument("input has dimension " + std::to_string(u.size()) + ", expected " +
                          std::to_string(sys.input_dim()));
  }
}

}  // namespace

FieldState DiffusionSystem::step_linear(const FieldState& state, const Eigen::VectorXd& u) const {
  check_step_args(*this, state, u);
  const Eigen::VectorXd source = config_.dt * (actuator_map_ * u);
  const Eigen::Index ni = interior_size();
  Eigen::VectorXd rhs(ni);
  for (Eigen::Index slot = 0; slot < ni; ++slot) {
    const Eigen::Index id = interior_[static_cast<std::size_t>(slot)];
    rhs(slot) = state.values(id) + source(id);
  }
  const Eigen::VectorXd x = solve(rhs);
  FieldState out{Eigen::VectorXd::Zero(grid_size())};
  for (Eigen::Index slot = 0; slot < ni; ++slot) out.values(interior_[static_cast<std::size_t>(slot)]) = x(slot);
  return out;
}

FieldState DiffusionSystem::step(const FieldState& state, const Eigen::VectorXd& u) const {
  check_step_args(*this, state, u);
  const Eigen::VectorXd source = config_.dt * (actuator_map_ * u);
  const Eigen::Index ni = interior_size();
  Eigen::VectorXd rhs(ni);
  for (Eigen::Index slot = 0; slot < ni; ++slot) {
    const Eigen::Index id = interior_[static_cast<std::size_t>(slot)];
    rhs(slot) = state.values(id) + source(id) + boundary_rhs_(slot);
  }
  const Eigen::VectorXd x = solve(rhs);
  FieldState out{boundary_values_};
  for (Eigen::Index slot = 0; slot < ni; ++slot) out.values(interior_[static_cast<std::size_t>(slot)]) = x(slot);
  return out;
}

FieldState DiffusionSystem::embed(const Eigen::VectorXd& inner) const {
  if (inner.size() != state_dim()) {
    throw InvalidArgument("window state has dimension " + std::to_string(inner.size()) +
                          ", expected " + std::to_string(state_dim()));
  }
  FieldState out{Eigen::VectorXd::Zero(grid_size())};
  for (std::size_t i = 0; i < inner_.size(); ++i) out.values(inner_[i]) = inner(static_cast<Eigen::Index>(i));
  return out;
}

Eigen::VectorXd DiffusionSystem::restrict(const FieldState& state) const {
  Eigen::VectorXd out(state_dim());
  for (std::size_t i = 0; i < inner_.size(); ++i) out(static_cast<Eigen::Index>(i)) = state.values(inner_[i]);
  return out;
}

StepOracle DiffusionSystem::window_oracle() const {
  return [sys = *this](const Eigen::VectorXd& x, const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return sys.restrict(sys.step_linear(sys.embed(x), u));
  };
}

Eigen::MatrixXd DiffusionSystem::window_grid(const Eigen::VectorXd& inner) const {
  const int na = config_.inner_size_a();
  const int nb = config_.inner_size_b();
  if (inner.size() != static_cast<Eigen::Index>(na) * nb) {
    throw InvalidArgument("window grid: wrong vector length");
  }
  Eigen::MatrixXd g(nb, na);
  for (int jb = 0; jb < nb; ++jb)
    for (int ia = 0; ia < na; ++ia) g(jb, ia) = inner(static_cast<Eigen::Index>(jb) * na + ia);
  return g;
}

Eigen::MatrixXd DiffusionSystem::field_grid(const FieldState& state) const {
  if (state.values.size() != grid_size()) throw InvalidArgument("field grid: wrong vector length");
  Eigen::MatrixXd g(config_.N_b, config_.N_a);
  for (int jb = 0; jb < config_.N_b; ++jb)
    for (int ia = 0; ia < config_.N_a; ++ia) g(jb, ia) = state.values(node(ia, jb));
  return g;
}

DiffusionSystem build_system(const DiffusionConfig& config) { return DiffusionSystem(config); }

TruthModel extract_truth(const DiffusionSystem& system) {
  const Eigen::Index n = system.state_dim();
  const Eigen::Index q = system.input_dim();
  Eigen::MatrixXd A(n, n);
  Eigen::MatrixXd B(n, q);
  const Eigen::VectorXd zero_u = Eigen::VectorXd::Zero(q);
  for (Eigen::Index j = 0; j < n; ++j) {
    A.col(j) = system.restrict(system.step_linear(system.embed(Eigen::VectorXd::Unit(n, j)), zero_u));
  }
  const FieldState zero_field{Eigen::VectorXd::Zero(system.grid_size())};
  for (Eigen::Index i = 0; i < q; ++i) {
    B.col(i) = system.restrict(system.step_linear(zero_field, Eigen::VectorXd::Unit(q, i)));
  }
  return TruthModel(std::move(A), std::move(B));
}

TruthModel identify_truth(const SnapshotSet& data) {
  validate(data);
  const Eigen::Index n = data.n();
  const Eigen::Index q = data.q();
  const Eigen::Index rows = n + q;
  if (data.X.cols() < rows) {
    throw RankDeficient("identify_truth: " + std::to_string(data.X.cols()) +
                            " snapshot pairs cannot determine " + std::to_string(rows) +
                            " regressors",
                        static_cast<std::size_t>(data.X.cols()));
  }
  const Eigen::MatrixXd omega = data.omega();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(omega, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double tol = rank_tolerance(omega.rows(), omega.cols(), sv(0));
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > 0.0 && sv(rank) >= tol) ++rank;
  if (rank < rows) {
    throw RankDeficient("identify_truth: Omega has numerical rank " + std::to_string(rank) +
                            ", need full row rank " + std::to_string(rows),
                        static_cast<std::size_t>(rank));
  }
  const Eigen::MatrixXd theta =
      ((data.Y * svd.matrixV()) * sv.cwiseInverse().asDiagonal()) * svd.matrixU().transpose();
  return TruthModel(theta.leftCols(n), theta.rightCols(q));
}

}  // namespace dmdc
