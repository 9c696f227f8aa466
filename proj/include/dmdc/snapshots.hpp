#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include <Eigen/Dense>

namespace dmdc {

/// Input samples, one column per time step (q × N).
struct InputSequence {
  Eigen::MatrixXd values;
  double dt = 1.0;

  Eigen::Index dim() const { return values.rows(); }
  Eigen::Index steps() const { return values.cols(); }

  // Columns [first, first + count) as a new sequence with the same dt.
  InputSequence window(Eigen::Index first, Eigen::Index count) const;
};

/// Shifted snapshot matrices: X = [x_1 … x_{m-1}], Y = [x_2 … x_m] and the
/// inputs U = [u_1 … u_{m-1}] that drove each transition.
struct SnapshotSet {
  Eigen::MatrixXd X;
  Eigen::MatrixXd Y;
  Eigen::MatrixXd U;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index q() const { return U.rows(); }
  // Sample count m; the matrices carry m-1 columns.
  Eigen::Index m() const { return X.cols() + 1; }

  /// Ω = [X; U], (n+q) × (m-1).
  Eigen::MatrixXd omega() const;

  // First `m` samples of this set (m ≥ 2).
  SnapshotSet leading(Eigen::Index m) const;
};

/// Checks the shape invariants; throws InvalidArgument on mismatch.
void validate(const SnapshotSet& data);

/// Seeded two-level signal, one fair coin per hold-block and channel.
InputSequence generate_prbs(Eigen::Index q, Eigen::Index steps, double amplitude,
                            Eigen::Index hold, std::uint64_t seed, double dt = 1.0);

/// Identical sine on every channel: amplitude·sin(2π·freq·k·dt).
InputSequence generate_sinusoid(Eigen::Index q, Eigen::Index steps, double amplitude,
                                double freq_hz, double dt);

using StepOracle = std::function<Eigen::VectorXd(const Eigen::VectorXd& state,
                                                 const Eigen::VectorXd& input)>;

/// Runs the oracle from x0 for m-1 transitions and stacks the snapshots.
SnapshotSet collect_snapshots(const StepOracle& oracle, const Eigen::VectorXd& x0,
                              const InputSequence& inputs, Eigen::Index m);

/// Full state trajectory (n × (steps+1)) from the same oracle.
Eigen::MatrixXd simulate(const StepOracle& oracle, const Eigen::VectorXd& x0,
                         const InputSequence& inputs, Eigen::Index steps);

/// Concatenates `bursts` runs of `burst_length` samples each. Every run
/// starts from a fresh two-level random state (±amplitude per entry) and
/// consumes the next burst_length−1 input columns, so pairs never straddle
/// a restart. The shift property holds within each run only.
SnapshotSet collect_burst_snapshots(const StepOracle& oracle, Eigen::Index n,
                                    const InputSequence& inputs, Eigen::Index bursts,
                                    Eigen::Index burst_length, double state_amplitude,
                                    std::uint64_t seed);

SnapshotSet snapshots_from_trajectory(const Eigen::MatrixXd& states, const Eigen::MatrixXd& inputs,
                                      Eigen::Index m);

}  // namespace dmdc
