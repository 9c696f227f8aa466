#include "dmdc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <optional>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "dmdc/csv.hpp"
#include "dmdc/dmdc.hpp"
#include "dmdc/error.hpp"
#include "dmdc/linalg.hpp"

namespace dmdc {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("experiment config: " + msg); };
  diffusion.validate();
  if (excitation.hold < 1 || !(excitation.amplitude > 0.0)) fail("excitation needs hold >= 1 and amplitude > 0");
  if (excitation.burst_length < 2 || !(excitation.state_amplitude > 0.0)) {
    fail("excitation needs burst_length >= 2 and state_amplitude > 0");
  }
  if (excitation.pairs < 0) fail("excitation.pairs must be non-negative");
  if (!(probe.amplitude > 0.0) || !(probe.freq_hz > 0.0) || !(probe.initial_amplitude > 0.0)) {
    fail("probe amplitude, frequency and initial amplitude must be positive");
  }
  if (m_fit < 2) fail("m_fit must be at least 2");
  if (s < 0 || r < 0) fail("s and r must be non-negative (0 selects the numerical rank)");
  if (s > 0 && r > s) fail("r must not exceed s");
  if (horizon < 1) fail("horizon must be at least 1");
  if (!(rho_margin > 0.0 && rho_margin < 1.0)) fail("rho_margin must lie in (0, 1)");
  if (K_est < 0) fail("K_est must be non-negative");
  if (workers < 1) fail("workers must be at least 1");
  for (int t : field_times) {
    if (t < 0 || t > horizon) fail("field time " + std::to_string(t) + " outside [0, horizon]");
  }
  for (int v : sweep.m) if (v < 2) fail("swept m values must be at least 2");
  for (int v : sweep.s) if (v < 1) fail("swept s values must be positive");
  for (int v : sweep.r) if (v < 1) fail("swept r values must be positive");
  if (sweep.couple_r) {
    if (!sweep.r.empty()) fail("sweep.r must be empty when couple_r derives r from s");
    if (sweep.r_offset < 0) fail("sweep.r_offset must be non-negative");
    const std::vector<int> ss = sweep.s.empty() ? std::vector<int>{s} : sweep.s;
    for (int v : ss) {
      if (v - sweep.r_offset < 1) fail("coupled r = s - r_offset must be positive");
    }
  }
}

ExperimentConfig paper_scale_config() {
  ExperimentConfig c;
  c.diffusion = full_size_config();
  c.m_fit = 600;
  c.s = 26;
  c.r = 17;
  c.horizon = 600;
  return c;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{
      {"diffusion", c.diffusion},
      {"excitation",
       {{"amplitude", c.excitation.amplitude},
        {"hold", c.excitation.hold},
        {"burst_length", c.excitation.burst_length},
        {"state_amplitude", c.excitation.state_amplitude},
        {"pairs", c.excitation.pairs}}},
      {"probe",
       {{"amplitude", c.probe.amplitude},
        {"freq_hz", c.probe.freq_hz},
        {"initial_amplitude", c.probe.initial_amplitude}}},
      {"m_fit", c.m_fit},
      {"s", c.s},
      {"r", c.r},
      {"sweep",
       {{"m", c.sweep.m},
        {"s", c.sweep.s},
        {"r", c.sweep.r},
        {"couple_r", c.sweep.couple_r},
        {"r_offset", c.sweep.r_offset}}},
      {"horizon", c.horizon},
      {"rho_margin", c.rho_margin},
      {"K_est", c.K_est},
      {"exact_input_bound", c.exact_input_bound},
      {"field_times", c.field_times},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"workers", c.workers},
  };
}

namespace {

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) j.at(key).get_to(field);
}

}  // namespace

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (j.contains("diffusion")) {
    DiffusionConfig d = c.diffusion;
    from_json(j.at("diffusion"), d);
    c.diffusion = d;
  }
  if (j.contains("excitation")) {
    const auto& e = j.at("excitation");
    get_if(e, "amplitude", c.excitation.amplitude);
    get_if(e, "hold", c.excitation.hold);
    get_if(e, "burst_length", c.excitation.burst_length);
    get_if(e, "state_amplitude", c.excitation.state_amplitude);
    get_if(e, "pairs", c.excitation.pairs);
  }
  if (j.contains("probe")) {
    const auto& p = j.at("probe");
    get_if(p, "amplitude", c.probe.amplitude);
    get_if(p, "freq_hz", c.probe.freq_hz);
    get_if(p, "initial_amplitude", c.probe.initial_amplitude);
  }
  get_if(j, "m_fit", c.m_fit);
  get_if(j, "s", c.s);
  get_if(j, "r", c.r);
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    get_if(s, "m", c.sweep.m);
    get_if(s, "s", c.sweep.s);
    get_if(s, "r", c.sweep.r);
    get_if(s, "couple_r", c.sweep.couple_r);
    get_if(s, "r_offset", c.sweep.r_offset);
  }
  get_if(j, "horizon", c.horizon);
  get_if(j, "rho_margin", c.rho_margin);
  get_if(j, "K_est", c.K_est);
  get_if(j, "exact_input_bound", c.exact_input_bound);
  get_if(j, "field_times", c.field_times);
  get_if(j, "seed", c.seed);
  get_if(j, "output_dir", c.output_dir);
  get_if(j, "workers", c.workers);
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  ExperimentConfig c;
  try {
    const nlohmann::json j = nlohmann::json::parse(is);
    if (j.value("paper_scale", false)) c = paper_scale_config();
    from_json(j, c);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config " + path.string() + ": " + e.what());
  }
  return c;
}

namespace {

// Where and how fast a run executes does not change what it computes.
nlohmann::json identity_json(const ExperimentConfig& config) {
  nlohmann::json j = config;
  j.erase("output_dir");
  j.erase("workers");
  return j;
}

}  // namespace

std::string run_id(const ExperimentConfig& config) {
  const std::string text = identity_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// Re-raises a library error with the failing stage prepended, keeping its kind.
[[noreturn]] void rethrow_staged(const char* stage, const Error& e) {
  const std::string msg = std::string(stage) + ": " + e.what();
  switch (e.kind()) {
    case ErrorKind::InvalidArgument: throw InvalidArgument(msg);
    case ErrorKind::RankDeficient:
      throw RankDeficient(msg, static_cast<const RankDeficient&>(e).max_order());
    case ErrorKind::NumericalFailure:
      throw NumericalFailure(msg, static_cast<const NumericalFailure&>(e).step());
    case ErrorKind::AssumptionViolated: throw AssumptionViolated(msg);
    case ErrorKind::IllConditioned: throw IllConditioned(msg);
    case ErrorKind::ParseError: {
      const auto& p = static_cast<const ParseError&>(e);
      throw ParseError(msg, p.row(), p.column());
    }
    case ErrorKind::Io: throw IoError(msg);
  }
  throw Error(e.kind(), msg);
}

template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    rethrow_staged(stage, e);
  }
}

}  // namespace

ExperimentContext prepare_context(const ExperimentConfig& config, int max_m) {
  config.validate();
  DiffusionSystem system = staged("build system", [&] { return build_system(config.diffusion); });
  const Eigen::Index n = system.state_dim();
  const Eigen::Index q = system.input_dim();

  const auto& ex = config.excitation;
  const Eigen::Index pairs = ex.pairs > 0 ? ex.pairs : n + q + 50;
  const Eigen::Index per_burst = ex.burst_length - 1;
  const Eigen::Index bursts = (pairs + per_burst - 1) / per_burst;

  TruthModel truth = staged("identification", [&] {
    const InputSequence prbs = generate_prbs(q, bursts * per_burst, ex.amplitude, ex.hold,
                                             config.seed, config.diffusion.dt);
    const SnapshotSet data = collect_burst_snapshots(system.window_oracle(), n, prbs, bursts,
                                                     ex.burst_length, ex.state_amplitude,
                                                     config.seed);
    return identify_truth(data);
  });
  const TruthModel analytic = staged("truth extraction", [&] { return extract_truth(system); });
  const double discrepancy =
      spectral_norm(truth.A() - analytic.A()) / spectral_norm(analytic.A());

  const Eigen::Index total = max_m + config.horizon;
  InputSequence inputs = staged("probe signal", [&] {
    return generate_sinusoid(q, total - 1, config.probe.amplitude, config.probe.freq_hz,
                             config.diffusion.dt);
  });
  const Eigen::VectorXd x0 =
      generate_prbs(n, 1, config.probe.initial_amplitude, 1, config.seed + 1).values.col(0);
  Eigen::MatrixXd states =
      staged("probe simulation", [&] { return simulate(truth.oracle(), x0, inputs, total - 1); });

  return ExperimentContext{std::move(system), std::move(truth), discrepancy, std::move(inputs),
                           std::move(states)};
}

std::vector<FieldDiff> compare_fields(const Eigen::MatrixXd& truth_traj,
                                      const Eigen::MatrixXd& reconstructed_traj,
                                      const std::vector<std::size_t>& times,
                                      Eigen::Index grid_width, const fs::path& out_dir,
                                      std::size_t first_index) {
  if (truth_traj.rows() != reconstructed_traj.rows() ||
      truth_traj.cols() != reconstructed_traj.cols()) {
    throw InvalidArgument("compare_fields: trajectories differ in shape");
  }
  if (grid_width < 1 || truth_traj.rows() % grid_width != 0) {
    throw InvalidArgument("compare_fields: state dimension is not a multiple of the grid width");
  }
  const Eigen::Index height = truth_traj.rows() / grid_width;
  auto as_grid = [&](const Eigen::VectorXd& v) {
    Eigen::MatrixXd g(height, grid_width);
    for (Eigen::Index i = 0; i < height; ++i) g.row(i) = v.segment(i * grid_width, grid_width);
    return g;
  };

  fs::create_directories(out_dir);
  std::vector<FieldDiff> out;
  std::ostringstream summary;
  summary << "k,max_abs_diff,mean_abs_diff\n";
  for (const std::size_t t : times) {
    if (t >= static_cast<std::size_t>(truth_traj.cols())) {
      throw InvalidArgument("compare_fields: time " + std::to_string(t) + " outside trajectory");
    }
    const auto col = static_cast<Eigen::Index>(t);
    const Eigen::VectorXd diff = (truth_traj.col(col) - reconstructed_traj.col(col)).cwiseAbs();
    const std::size_t k = first_index + t;
    const std::string tag = std::to_string(k);
    write_matrix_csv(out_dir / ("true_" + tag + ".csv"), as_grid(truth_traj.col(col)));
    write_matrix_csv(out_dir / ("pred_" + tag + ".csv"), as_grid(reconstructed_traj.col(col)));
    write_matrix_csv(out_dir / ("diff_" + tag + ".csv"), as_grid(diff));
    FieldDiff d{k, diff.maxCoeff(), diff.mean()};
    summary << k << ',' << format_double(d.max_abs) << ',' << format_double(d.mean_abs) << '\n';
    out.push_back(d);
  }
  std::ofstream os(out_dir / "summary.csv", std::ios::binary | std::ios::trunc);
  os << summary.str();
  if (!os) throw IoError("cannot write " + (out_dir / "summary.csv").string());
  return out;
}

bool recheck_dominance(const fs::path& trajectory_csv) {
  std::ifstream is(trajectory_csv);
  if (!is) throw IoError("cannot open " + trajectory_csv.string());
  std::string header;
  std::getline(is, header);
  std::ostringstream rest;
  rest << is.rdbuf();
  const Eigen::MatrixXd rows = parse_matrix_csv(rest.str(), trajectory_csv.string());
  if (rows.cols() < 3) throw ParseError(trajectory_csv.string() + ": expected k,bound,actual,…", 1, 0);
  return (rows.col(1).array() >= rows.col(2).array()).all();
}

ExperimentReport run_single(const ExperimentConfig& config) {
  config.validate();
  const ExperimentContext context = prepare_context(config, config.m_fit);
  return run_single(config, context);
}

ExperimentReport run_single(const ExperimentConfig& config, const ExperimentContext& context) {
  config.validate();
  const int m = config.m_fit;
  const int K = config.horizon;
  if (static_cast<Eigen::Index>(m) + K > context.probe_states.cols()) {
    throw InvalidArgument("probe trajectory too short for m = " + std::to_string(m) +
                          " plus horizon " + std::to_string(K));
  }
  const TruthModel& truth = context.truth;

  ExperimentReport rep;
  rep.n = truth.n();
  rep.q = truth.q();
  rep.m = m;
  rep.truth_discrepancy = context.truth_discrepancy;

  const SnapshotSet data = snapshots_from_trajectory(context.probe_states,
                                                     context.probe_inputs.values, m);
  rep.s = config.s > 0 ? config.s
                       : static_cast<int>(staged("order selection", [&] {
                           return numerical_rank(data.omega());
                         }));
  rep.r = config.r > 0 ? config.r
                       : static_cast<int>(std::min<Eigen::Index>(
                             rep.s, staged("order selection", [&] { return numerical_rank(data.Y); })));

  const DmdcModel model = staged("fit", [&] { return fit_dmdc(data, rep.s, rep.r); });
  const FullOrderEstimate est = staged("fit", [&] { return estimate_full_order(data, rep.s); });

  const Eigen::VectorXd x_m = context.probe_states.col(m - 1);
  const InputSequence window = context.probe_inputs.window(m - 1, K);

  rep.constants = staged("constants", [&] {
    return estimate_constants(truth, model, est.A_hat, est.B_hat,
                              static_cast<std::size_t>(config.k_est()), config.rho_margin);
  });
  double u_bar = 0.0;
  for (Eigen::Index j = 0; j < window.steps(); ++j) u_bar = std::max(u_bar, window.values.col(j).norm());
  rep.constants.u_bar = u_bar;

  rep.actual = staged("prediction", [&] {
    return actual_error_trajectory(truth, model, x_m, window, static_cast<std::size_t>(K),
                                   static_cast<std::size_t>(m));
  });
  const InputNorms norms = config.exact_input_bound
                               ? exact_input_norms(truth, window)
                               : bounded_input_norms(spectral_norm(truth.B()), window);
  rep.bound = staged("bound", [&] {
    return bound_trajectory(rep.constants, rep.actual.values.front(), x_m.norm(), norms,
                            static_cast<std::size_t>(m), static_cast<std::size_t>(K));
  });

  // Artifacts are keyed by the resolved single-run configuration.
  ExperimentConfig resolved = config;
  resolved.sweep = SweepConfig{};
  resolved.workers = 1;
  rep.run_id = run_id(resolved);
  rep.run_dir = fs::path(config.output_dir) / rep.run_id;

  staged("report", [&] {
    fs::create_directories(rep.run_dir);
    {
      std::ofstream os(rep.run_dir / "config.json", std::ios::binary | std::ios::trunc);
      os << identity_json(resolved).dump(2) << '\n';
      if (!os) throw IoError("cannot write config.json");
    }
    auto rows = rep.constants.to_rows();
    rows.insert(rows.begin(), {{"n", std::to_string(rep.n)},
                               {"q", std::to_string(rep.q)},
                               {"m", std::to_string(rep.m)},
                               {"s", std::to_string(rep.s)},
                               {"r", std::to_string(rep.r)}});
    rows.emplace_back("B_norm", format_double(spectral_norm(truth.B())));
    rows.emplace_back("asymptotic_bound",
                      format_double(asymptotic_bound(rep.constants, spectral_norm(truth.B()))));
    rows.emplace_back("truth_discrepancy", format_double(rep.truth_discrepancy));
    rows.emplace_back("e_m_norm", format_double(rep.actual.values.front()));
    rows.emplace_back("x_m_norm", format_double(x_m.norm()));
    rows.emplace_back("terminal_actual", format_double(rep.terminal_actual()));
    rows.emplace_back("terminal_bound", format_double(rep.terminal_bound()));
    write_key_value_csv(rep.run_dir / "constants.csv", rows);
    write_certificate_csv(rep.run_dir / "trajectory.csv", rep.bound, rep.actual);
    save_model(model, rep.run_dir / "model");

    const ReducedTrajectory reduced = predict(model, x_m, window, K, m);
    const Eigen::MatrixXd recon = reconstruct(model, reduced);
    std::vector<std::size_t> times;
    if (config.field_times.empty()) {
      times = {0, static_cast<std::size_t>(K / 2), static_cast<std::size_t>(K)};
    } else {
      for (int t : config.field_times) times.push_back(static_cast<std::size_t>(t));
    }
    rep.fields = compare_fields(context.probe_states.middleCols(m - 1, K + 1), recon, times,
                                config.diffusion.inner_size_a(), rep.run_dir / "fields",
                                static_cast<std::size_t>(m));
    return 0;
  });
  rep.dominance_ok = recheck_dominance(rep.run_dir / "trajectory.csv");
  return rep;
}

bool SweepReport::all_ok() const {
  return std::all_of(points.begin(), points.end(),
                     [](const SweepPoint& p) { return p.status == "ok" && p.dominance_ok; });
}

SweepReport run_sweep(const ExperimentConfig& config) {
  config.validate();
  SweepReport report;

  std::vector<ExperimentConfig> grid;
  if (config.sweep.empty()) {
    grid.push_back(config);
  } else {
    const auto& sw = config.sweep;
    const std::vector<int> ms = sw.m.empty() ? std::vector<int>{config.m_fit} : sw.m;
    const std::vector<int> ss = sw.s.empty() ? std::vector<int>{config.s} : sw.s;
    for (int m : ms) {
      for (int s : ss) {
        std::vector<int> rs;
        if (sw.couple_r) {
          rs = {s - sw.r_offset};
        } else {
          rs = sw.r.empty() ? std::vector<int>{config.r} : sw.r;
        }
        for (int r : rs) {
          ExperimentConfig point = config;
          point.m_fit = m;
          point.s = s;
          point.r = r;
          grid.push_back(point);
        }
      }
    }
  }

  int max_m = 0;
  for (const auto& g : grid) max_m = std::max(max_m, g.m_fit);
  const ExperimentContext context = prepare_context(config, max_m);

  report.sweep_dir = fs::path(config.output_dir) / ("sweep-" + run_id(config));
  fs::create_directories(report.sweep_dir);

  std::vector<SweepPoint> points(grid.size());
  std::vector<std::optional<ExperimentReport>> runs(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      SweepPoint& p = points[i];
      p.m = grid[i].m_fit;
      p.s = grid[i].s;
      p.r = grid[i].r;
      try {
        ExperimentReport rep = run_single(grid[i], context);
        p.run_id = rep.run_id;
        p.s = rep.s;
        p.r = rep.r;
        p.terminal_actual = rep.terminal_actual();
        p.terminal_bound = rep.terminal_bound();
        p.dominance_ok = rep.dominance_ok;
        runs[i] = std::move(rep);
      } catch (const Error& e) {
        p.status = std::string(to_string(e.kind())) + ": " + e.what();
      }
    }
  };
  const int threads = std::min<int>(config.workers, static_cast<int>(grid.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::ostringstream table;
  std::ostringstream failures;
  table << "m,s,r,run_id,terminal_actual,terminal_bound,dominance,status\n";
  failures << "m,s,r,error\n";
  bool any_failed = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const SweepPoint& p = points[i];
    const bool ok = p.status == "ok";
    table << p.m << ',' << p.s << ',' << p.r << ',' << p.run_id << ','
          << (ok ? format_double(p.terminal_actual) : "") << ','
          << (ok ? format_double(p.terminal_bound) : "") << ',' << (p.dominance_ok ? 1 : 0) << ','
          << (ok ? "ok" : "failed") << '\n';
    if (!ok) {
      any_failed = true;
      std::string msg = p.status;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      failures << p.m << ',' << p.s << ',' << p.r << ',' << msg << '\n';
    }
    if (runs[i]) report.runs.push_back(std::move(*runs[i]));
  }
  {
    std::ofstream os(report.sweep_dir / "terminal_errors.csv", std::ios::binary | std::ios::trunc);
    os << table.str();
  }
  if (any_failed) {
    std::ofstream os(report.sweep_dir / "failures.csv", std::ios::binary | std::ios::trunc);
    os << failures.str();
  }
  report.points = std::move(points);
  return report;
}

}  // namespace dmdc
