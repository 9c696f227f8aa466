// Command-line driver for the DMDc diffusion experiments.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dmdc/bounds.hpp"
#include "dmdc/csv.hpp"
#include "dmdc/diffusion.hpp"
#include "dmdc/dmdc.hpp"
#include "dmdc/error.hpp"
#include "dmdc/experiment.hpp"
#include "dmdc/linalg.hpp"

namespace fs = std::filesystem;
using namespace dmdc;

namespace {

constexpr int kOk = 0;
constexpr int kInvalidConfig = 2;
constexpr int kNumerical = 3;
constexpr int kDominance = 4;

struct Overrides {
  std::string config_path;
  bool paper_scale = false;
  std::optional<int> m, s, r, horizon, k_est, workers, grid, margin, pairs;
  std::optional<double> rho_margin, alpha, dt, probe_amplitude, probe_freq, initial_amplitude;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  bool bounded_inputs = false;
  std::vector<int> sweep_m, sweep_s, sweep_r;
  bool couple_r = false;
  std::optional<int> r_offset;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
  cmd->add_flag("--paper-scale", o.paper_scale, "71x71 grid, n=2500, q=84, m=600, s=26, r=17");
  cmd->add_option("--m", o.m, "samples used for fitting");
  cmd->add_option("--s", o.s, "SVD order of the stacked data matrix (0: numerical rank)");
  cmd->add_option("--r", o.r, "reduced order (0: numerical rank of Y)");
  cmd->add_option("--horizon", o.horizon, "prediction steps");
  cmd->add_option("--k-est", o.k_est, "envelope scan horizon (0: horizon)");
  cmd->add_option("--rho-margin", o.rho_margin, "rho_bar = rho + margin (1 - rho)");
  cmd->add_option("--seed", o.seed);
  cmd->add_option("--output-dir", o.output_dir);
  cmd->add_option("--workers", o.workers, "parallel sweep points");
  cmd->add_option("--grid", o.grid, "grid points per axis");
  cmd->add_option("--inner-margin", o.margin, "window offset from each edge");
  cmd->add_option("--alpha", o.alpha, "diffusivity");
  cmd->add_option("--dt", o.dt, "time step");
  cmd->add_option("--pairs", o.pairs, "identification snapshot pairs (0: n+q+50)");
  cmd->add_option("--probe-amplitude", o.probe_amplitude);
  cmd->add_option("--probe-freq", o.probe_freq);
  cmd->add_option("--initial-amplitude", o.initial_amplitude);
  cmd->add_flag("--bounded-inputs", o.bounded_inputs, "use |B| |u_k| in place of |B u_k|");
}

void add_sweep(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--sweep-m", o.sweep_m)->delimiter(',');
  cmd->add_option("--sweep-s", o.sweep_s)->delimiter(',');
  cmd->add_option("--sweep-r", o.sweep_r)->delimiter(',');
  cmd->add_flag("--couple-r", o.couple_r, "r = s - r_offset for each swept s");
  cmd->add_option("--r-offset", o.r_offset);
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.paper_scale ? paper_scale_config() : ExperimentConfig{};
  if (!o.config_path.empty()) {
    if (o.paper_scale) {
      // The file is layered over the full-size defaults.
      std::ifstream is(o.config_path);
      try {
        from_json(nlohmann::json::parse(is), c);
      } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("config " + o.config_path + ": " + e.what());
      }
    } else {
      c = load_experiment_config(o.config_path);
    }
  }
  auto set = [](auto& field, const auto& opt) {
    if (opt) field = *opt;
  };
  set(c.m_fit, o.m);
  set(c.s, o.s);
  set(c.r, o.r);
  set(c.horizon, o.horizon);
  set(c.K_est, o.k_est);
  set(c.rho_margin, o.rho_margin);
  set(c.seed, o.seed);
  set(c.output_dir, o.output_dir);
  set(c.workers, o.workers);
  if (o.grid) c.diffusion.N_a = c.diffusion.N_b = *o.grid;
  set(c.diffusion.inner_margin, o.margin);
  set(c.diffusion.alpha, o.alpha);
  set(c.diffusion.dt, o.dt);
  set(c.excitation.pairs, o.pairs);
  set(c.probe.amplitude, o.probe_amplitude);
  set(c.probe.freq_hz, o.probe_freq);
  set(c.probe.initial_amplitude, o.initial_amplitude);
  if (o.bounded_inputs) c.exact_input_bound = false;
  if (!o.sweep_m.empty()) c.sweep.m = o.sweep_m;
  if (!o.sweep_s.empty()) c.sweep.s = o.sweep_s;
  if (!o.sweep_r.empty()) c.sweep.r = o.sweep_r;
  if (o.couple_r) c.sweep.couple_r = true;
  set(c.sweep.r_offset, o.r_offset);
  c.validate();
  return c;
}

int cmd_simulate(const ExperimentConfig& c, int steps) {
  const DiffusionSystem sys = build_system(c.diffusion);
  const InputSequence u =
      generate_sinusoid(sys.input_dim(), steps, c.probe.amplitude, c.probe.freq_hz, c.diffusion.dt);
  FieldState x = sys.initial_state();
  Eigen::MatrixXd window(sys.state_dim(), steps + 1);
  window.col(0) = sys.restrict(x);
  for (int k = 0; k < steps; ++k) {
    x = sys.step(x, u.values.col(k));
    if (!all_finite(x.values)) throw NumericalFailure("simulation diverged", static_cast<std::size_t>(k));
    window.col(k + 1) = sys.restrict(x);
  }
  const fs::path dir = fs::path(c.output_dir) / "simulate";
  fs::create_directories(dir);
  write_matrix_csv(dir / "window_states.csv", window);
  write_matrix_csv(dir / "inputs.csv", u.values);
  write_matrix_csv(dir / "final_field.csv", sys.field_grid(x));
  std::cout << "n=" << sys.state_dim() << " q=" << sys.input_dim() << " steps=" << steps << "\n"
            << "wrote " << dir.string() << "\n";
  return kOk;
}

int cmd_fit(const ExperimentConfig& c, const std::string& model_dir) {
  const ExperimentContext ctx = prepare_context(c, c.m_fit);
  const SnapshotSet data = snapshots_from_trajectory(ctx.probe_states, ctx.probe_inputs.values, c.m_fit);
  const Eigen::Index s = c.s > 0 ? c.s : numerical_rank(data.omega());
  const Eigen::Index r = c.r > 0 ? c.r : std::min(s, numerical_rank(data.Y));
  const DmdcModel model = fit_dmdc(data, s, r);
  const fs::path dir = model_dir.empty() ? fs::path(c.output_dir) / "model" : fs::path(model_dir);
  save_model(model, dir);
  std::cout << "n=" << model.n() << " q=" << model.q() << " m=" << model.m << " s=" << model.s
            << " r=" << model.r << "\n"
            << "max |lambda|=" << format_double(model.Lambda.cwiseAbs().maxCoeff()) << "\n"
            << "wrote " << dir.string() << "\n";
  return kOk;
}

int cmd_predict(const std::string& model_dir, const std::string& x0_path,
                const std::string& inputs_path, const std::string& out_path) {
  const DmdcModel model = load_model(model_dir);
  const Eigen::MatrixXd x0 = read_matrix_csv(x0_path);
  const Eigen::MatrixXd u = read_matrix_csv(inputs_path);
  Eigen::VectorXd x_start;
  if (x0.cols() == 1) {
    x_start = x0.col(0);
  } else if (x0.rows() == 1) {
    x_start = x0.row(0).transpose();
  } else {
    throw InvalidArgument("initial state must be a single row or column");
  }
  InputSequence inputs{u, 1.0};
  const ReducedTrajectory traj = predict(model, x_start, inputs, static_cast<std::size_t>(u.cols()));
  write_matrix_csv(out_path, reconstruct(model, traj));
  std::cout << "wrote " << out_path << " (" << u.cols() + 1 << " states)\n";
  return kOk;
}

void print_rows(const fs::path& csv) {
  std::ifstream is(csv);
  std::string line;
  while (std::getline(is, line)) std::cout << line << "\n";
}

int cmd_bound(const ExperimentConfig& c) {
  const ExperimentReport rep = run_single(c);
  print_rows(rep.run_dir / "constants.csv");
  std::cout << "trajectory: " << (rep.run_dir / "trajectory.csv").string() << "\n";
  return rep.dominance_ok ? kOk : kDominance;
}

int cmd_experiment(const ExperimentConfig& c) {
  const ExperimentReport rep = run_single(c);
  std::cout << "run " << rep.run_id << " n=" << rep.n << " q=" << rep.q << " m=" << rep.m
            << " s=" << rep.s << " r=" << rep.r << "\n"
            << "terminal actual=" << format_double(rep.terminal_actual())
            << " bound=" << format_double(rep.terminal_bound()) << "\n"
            << "dominance " << (rep.dominance_ok ? "ok" : "VIOLATED") << "\n"
            << "wrote " << rep.run_dir.string() << "\n";
  return rep.dominance_ok ? kOk : kDominance;
}

int cmd_sweep(const ExperimentConfig& c) {
  const SweepReport rep = run_sweep(c);
  print_rows(rep.sweep_dir / "terminal_errors.csv");
  bool failed = false, violated = false;
  for (const auto& p : rep.points) {
    failed = failed || p.status != "ok";
    violated = violated || (p.status == "ok" && !p.dominance_ok);
  }
  std::cout << "wrote " << rep.sweep_dir.string() << "\n";
  if (violated) return kDominance;
  if (failed) return kNumerical;
  return kOk;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::ParseError:
    case ErrorKind::Io:
      return kInvalidConfig;
    default:
      return kNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DMDc reduced-order models of a 2D diffusion process, with a priori error bounds"};
  app.require_subcommand(1);

  Overrides o;
  int sim_steps = 0;
  std::string model_dir, x0_path, inputs_path, out_path = "prediction.csv";

  auto* simulate = app.add_subcommand("simulate", "run the heat equation and dump window states");
  add_common(simulate, o);
  simulate->add_option("--steps", sim_steps, "steps to simulate (default: horizon)");

  auto* fit = app.add_subcommand("fit", "fit a DMDc model on the probe trajectory");
  add_common(fit, o);
  fit->add_option("--model-dir", model_dir, "where to save the model (default: <output-dir>/model)");

  auto* pred = app.add_subcommand("predict", "roll a saved model forward");
  pred->add_option("--model", model_dir, "model directory")->required()->check(CLI::ExistingDirectory);
  pred->add_option("--x0", x0_path, "initial full state, CSV")->required()->check(CLI::ExistingFile);
  pred->add_option("--inputs", inputs_path, "q x steps input CSV")->required()->check(CLI::ExistingFile);
  pred->add_option("--out", out_path, "reconstructed states, CSV");

  auto* bound = app.add_subcommand("bound", "estimate bound constants and print them");
  add_common(bound, o);

  auto* experiment = app.add_subcommand("experiment", "single fit, prediction and certificate");
  add_common(experiment, o);

  auto* sweep = app.add_subcommand("sweep", "grid of experiments over m, s, r");
  add_common(sweep, o);
  add_sweep(sweep, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalidConfig;
  }

  try {
    if (pred->parsed()) return cmd_predict(model_dir, x0_path, inputs_path, out_path);
    const ExperimentConfig c = resolve(o);
    if (simulate->parsed()) return cmd_simulate(c, sim_steps > 0 ? sim_steps : c.horizon);
    if (fit->parsed()) return cmd_fit(c, model_dir);
    if (bound->parsed()) return cmd_bound(c);
    if (experiment->parsed()) return cmd_experiment(c);
    if (sweep->parsed()) return cmd_sweep(c);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kOk;
}
