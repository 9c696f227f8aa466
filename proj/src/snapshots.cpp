#include "dmdc/snapshots.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "dmdc/error.hpp"

namespace dmdc {

InputSequence InputSequence::window(Eigen::Index first, Eigen::Index count) const {
  if (first < 0 || count < 0 || first + count > steps()) {
    throw InvalidArgument("input window [" + std::to_string(first) + ", " +
                          std::to_string(first + count) + ") outside " +
                          std::to_string(steps()) + " steps");
  }
  return InputSequence{values.middleCols(first, count), dt};
}

Eigen::MatrixXd SnapshotSet::omega() const {
  Eigen::MatrixXd out(X.rows() + U.rows(), X.cols());
  out.topRows(X.rows()) = X;
  out.bottomRows(U.rows()) = U;
  return out;
}

SnapshotSet SnapshotSet::leading(Eigen::Index samples) const {
  if (samples < 2 || samples > m()) {
    throw InvalidArgument("cannot take " + std::to_string(samples) + " samples from a set of " +
                          std::to_string(m()));
  }
  return SnapshotSet{X.leftCols(samples - 1), Y.leftCols(samples - 1), U.leftCols(samples - 1)};
}

void validate(const SnapshotSet& data) {
  if (data.X.rows() < 1 || data.X.cols() < 1) throw InvalidArgument("snapshot set is empty");
  if (data.Y.rows() != data.X.rows() || data.Y.cols() != data.X.cols()) {
    throw InvalidArgument("X and Y must have identical shape");
  }
  if (data.U.cols() != data.X.cols() || data.U.rows() < 1) {
    throw InvalidArgument("input matrix must have q >= 1 rows and as many columns as X");
  }
}

InputSequence generate_prbs(Eigen::Index q, Eigen::Index steps, double amplitude,
                            Eigen::Index hold, std::uint64_t seed, double dt) {
  if (q < 1 || steps < 1 || hold < 1 || !(amplitude > 0.0) || !(dt > 0.0)) {
    throw InvalidArgument("prbs: q, steps, hold, amplitude and dt must be positive");
  }
  // mt19937_64 output is fixed by the standard; only the top bit is used so
  // no distribution object (whose output is implementation defined) is needed.
  std::mt19937_64 rng(seed);
  InputSequence seq{Eigen::MatrixXd(q, steps), dt};
  for (Eigen::Index block = 0; block * hold < steps; ++block) {
    const Eigen::Index first = block * hold;
    const Eigen::Index len = std::min(hold, steps - first);
    for (Eigen::Index ch = 0; ch < q; ++ch) {
      const double level = (rng() >> 63) ? amplitude : -amplitude;
      seq.values.block(ch, first, 1, len).setConstant(level);
    }
  }
  return seq;
}

InputSequence generate_sinusoid(Eigen::Index q, Eigen::Index steps, double amplitude,
                                double freq_hz, double dt) {
  if (q < 1 || steps < 1) throw InvalidArgument("sinusoid: q and steps must be positive");
  if (!(amplitude > 0.0) || !(freq_hz > 0.0) || !(dt > 0.0)) {
    throw InvalidArgument("sinusoid: amplitude, frequency and dt must be positive");
  }
  InputSequence seq{Eigen::MatrixXd(q, steps), dt};
  for (Eigen::Index k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    seq.values.col(k).setConstant(amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * t));
  }
  return seq;
}

Eigen::MatrixXd simulate(const StepOracle& oracle, const Eigen::VectorXd& x0,
                         const InputSequence& inputs, Eigen::Index steps) {
  if (steps < 0 || inputs.steps() < steps) {
    throw InvalidArgument("simulate: need " + std::to_string(steps) + " input columns, have " +
                          std::to_string(inputs.steps()));
  }
  Eigen::MatrixXd states(x0.size(), steps + 1);
  states.col(0) = x0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    Eigen::VectorXd next = oracle(states.col(k), inputs.values.col(k));
    if (next.size() != x0.size()) {
      throw InvalidArgument("oracle returned a state of dimension " +
                            std::to_string(next.size()) + ", expected " +
                            std::to_string(x0.size()));
    }
    if (!next.allFinite()) {
      throw NumericalFailure("oracle produced a non-finite state at step " +
                                 std::to_string(k + 1),
                             static_cast<std::size_t>(k + 1));
    }
    states.col(k + 1) = next;
  }
  return states;
}

SnapshotSet snapshots_from_trajectory(const Eigen::MatrixXd& states, const Eigen::MatrixXd& inputs,
                                      Eigen::Index m) {
  if (m < 2 || states.cols() < m || inputs.cols() < m - 1) {
    throw InvalidArgument("trajectory too short for " + std::to_string(m) + " samples");
  }
  return SnapshotSet{states.leftCols(m - 1), states.middleCols(1, m - 1),
                     inputs.leftCols(m - 1)};
}

SnapshotSet collect_burst_snapshots(const StepOracle& oracle, Eigen::Index n,
                                    const InputSequence& inputs, Eigen::Index bursts,
                                    Eigen::Index burst_length, double state_amplitude,
                                    std::uint64_t seed) {
  if (n < 1 || bursts < 1 || burst_length < 2 || !(state_amplitude > 0.0)) {
    throw InvalidArgument("burst snapshots: need n >= 1, bursts >= 1, burst_length >= 2 and a "
                          "positive state amplitude");
  }
  const Eigen::Index per_burst = burst_length - 1;
  if (inputs.steps() < bursts * per_burst) {
    throw InvalidArgument("burst snapshots: need " + std::to_string(bursts * per_burst) +
                          " input columns, have " + std::to_string(inputs.steps()));
  }
  // Restart states come from their own stream so they do not perturb inputs
  // drawn from the same seed elsewhere.
  const InputSequence starts = generate_prbs(n, bursts, state_amplitude, 1, seed ^ 0x9e3779b97f4a7c15ULL);
  SnapshotSet out{Eigen::MatrixXd(n, bursts * per_burst), Eigen::MatrixXd(n, bursts * per_burst),
                  Eigen::MatrixXd(inputs.dim(), bursts * per_burst)};
  for (Eigen::Index b = 0; b < bursts; ++b) {
    const InputSequence slice = inputs.window(b * per_burst, per_burst);
    const Eigen::MatrixXd states = simulate(oracle, starts.values.col(b), slice, per_burst);
    out.X.middleCols(b * per_burst, per_burst) = states.leftCols(per_burst);
    out.Y.middleCols(b * per_burst, per_burst) = states.rightCols(per_burst);
    out.U.middleCols(b * per_burst, per_burst) = slice.values;
  }
  return out;
}

SnapshotSet collect_snapshots(const StepOracle& oracle, const Eigen::VectorXd& x0,
                              const InputSequence& inputs, Eigen::Index m) {
  if (m < 2) throw InvalidArgument("collect_snapshots: m must be at least 2");
  if (inputs.steps() < m - 1) {
    throw InvalidArgument("collect_snapshots: need " + std::to_string(m - 1) +
                          " input columns, have " + std::to_string(inputs.steps()));
  }
  const Eigen::MatrixXd states = simulate(oracle, x0, inputs, m - 1);
  return snapshots_from_trajectory(states, inputs.values, m);
}

}  // namespace dmdc
