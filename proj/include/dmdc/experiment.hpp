#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dmdc/bounds.hpp"
#include "dmdc/diffusion.hpp"

namespace dmdc {

/// PRBS identification run. The window state restarts from a random
/// ±state_amplitude field every `burst_length` samples; a single long run
/// leaves Ω rank deficient because of the symmetric actuator layout.
struct ExcitationConfig {
  double amplitude = 1.0;
  int hold = 1;
  int burst_length = 10;
  double state_amplitude = 1.0;
  int pairs = 0;  // snapshot pairs; 0 means n + q + 50
};

/// Evaluation signal: the same sine on every channel, started from a random
/// ±initial_amplitude window field.
struct ProbeConfig {
  double amplitude = 2.0;
  double freq_hz = 0.02;
  double initial_amplitude = 20.0;
};

struct SweepConfig {
  std::vector<int> m;
  std::vector<int> s;
  std::vector<int> r;
  bool couple_r = false;  // r = s − r_offset for every swept s
  int r_offset = 3;

  bool empty() const { return m.empty() && s.empty() && r.empty(); }
};

struct ExperimentConfig {
  DiffusionConfig diffusion = desk_config();
  ExcitationConfig excitation;
  ProbeConfig probe;
  int m_fit = 250;
  // Truncation orders; 0 requests the numerical rank of Ω (for s) or Y (for
  // r). The resolved value is recorded in constants.csv.
  int s = 20;
  int r = 17;
  SweepConfig sweep;
  int horizon = 300;
  double rho_margin = 0.5;
  int K_est = 0;  // 0 means horizon
  bool exact_input_bound = true;  // ‖B u‖ from the truth model, else ‖B‖‖u‖
  std::vector<int> field_times;   // offsets into the horizon; empty means {0, K/2, K}
  std::uint64_t seed = 7;
  std::string output_dir = "runs";
  int workers = 1;

  /// Throws InvalidArgument on the first inconsistency.
  void validate() const;
  int k_est() const { return K_est > 0 ? K_est : horizon; }
};

/// Full-size setup: 71×71 grid, n = 2500, q = 84, m = 600, s = 26, r = 17.
ExperimentConfig paper_scale_config();

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Stable 16-hex-digit identifier of a configuration (FNV-1a over its JSON).
std::string run_id(const ExperimentConfig& config);

struct FieldDiff {
  std::size_t k = 0;
  double max_abs = 0.0;
  double mean_abs = 0.0;
};

/// Writes true_<k>.csv, pred_<k>.csv, diff_<k>.csv (grids of `grid_width`
/// columns) and summary.csv for each requested column of the trajectories.
/// Column j corresponds to absolute time first_index + j.
std::vector<FieldDiff> compare_fields(const Eigen::MatrixXd& truth_traj,
                                      const Eigen::MatrixXd& reconstructed_traj,
                                      const std::vector<std::size_t>& times,
                                      Eigen::Index grid_width, const std::filesystem::path& out_dir,
                                      std::size_t first_index = 0);

struct ExperimentReport {
  std::filesystem::path run_dir;
  std::string run_id;
  Eigen::Index n = 0;
  Eigen::Index q = 0;
  int m = 0;
  int s = 0;
  int r = 0;
  double truth_discrepancy = 0.0;  // ‖A_id − A_extract‖/‖A_extract‖
  BoundConstants constants;
  ErrorTrajectory actual;
  BoundTrajectory bound;
  std::vector<FieldDiff> fields;
  bool dominance_ok = false;  // rechecked from the written trajectory.csv

  double terminal_actual() const { return actual.terminal(); }
  double terminal_bound() const { return bound.bound.terminal(); }
};

/// Shared inputs of every run with the same system and seed: the truth model
/// and the probe trajectory, long enough for `max_m` fitting samples plus the
/// horizon.
struct ExperimentContext {
  DiffusionSystem system;
  TruthModel truth;
  double truth_discrepancy = 0.0;
  InputSequence probe_inputs;
  Eigen::MatrixXd probe_states;  // column j is x_{j+1}
};

ExperimentContext prepare_context(const ExperimentConfig& config, int max_m);

/// One fit/predict/bound run at (config.m_fit, config.s, config.r).
ExperimentReport run_single(const ExperimentConfig& config);
ExperimentReport run_single(const ExperimentConfig& config, const ExperimentContext& context);

struct SweepPoint {
  int m = 0;
  int s = 0;
  int r = 0;
  std::string run_id;
  double terminal_actual = 0.0;
  double terminal_bound = 0.0;
  bool dominance_ok = false;
  std::string status = "ok";  // or the error text of a failed point
};

struct SweepReport {
  std::filesystem::path sweep_dir;
  std::vector<SweepPoint> points;
  std::vector<ExperimentReport> runs;  // successful runs, same order as points
  bool all_ok() const;
};

/// Cartesian grid over sweep.m × sweep.s × sweep.r (r derived from s when
/// couple_r is set); an empty sweep falls back to run_single. Failed points
/// are listed in failures.csv instead of aborting the sweep.
SweepReport run_sweep(const ExperimentConfig& config);

/// Row-wise bound ≥ actual check of a written trajectory.csv.
bool recheck_dominance(const std::filesystem::path& trajectory_csv);

}  // namespace dmdc
