#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "dmdc/csv.hpp"
#include "dmdc/error.hpp"
#include "dmdc/experiment.hpp"
#include "support.hpp"

using namespace dmdc;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_experiment(const fs::path& out) {
  ExperimentConfig c;
  c.diffusion.N_a = c.diffusion.N_b = 13;
  c.diffusion.L_a = c.diffusion.L_b = 24.0;
  c.diffusion.actuator_span = 3;
  c.m_fit = 120;
  c.s = 10;
  c.r = 7;
  c.horizon = 60;
  c.output_dir = out.string();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Every regular file below `root`, relative path → contents.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("config json round trip and validation") {
  ExperimentConfig c = small_experiment("x");
  c.sweep.s = {8, 10};
  c.sweep.couple_r = true;
  const nlohmann::json j = c;
  ExperimentConfig back;
  from_json(j, back);
  CHECK(nlohmann::json(back) == j);
  CHECK(run_id(back) == run_id(c));
  ExperimentConfig other = c;
  other.seed = 8;
  CHECK(run_id(other) != run_id(c));
  other = c;
  other.output_dir = "elsewhere";
  CHECK(run_id(other) == run_id(c));

  ExperimentConfig bad = c;
  bad.r = 12;
  bad.s = 10;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = c;
  bad.sweep.r = {3};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = c;
  bad.rho_margin = 1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("full-size configuration dimensions") {
  const ExperimentConfig c = paper_scale_config();
  CHECK(c.diffusion.state_dim() == 2500);
  CHECK(c.diffusion.input_dim() == 84);
  CHECK(c.s == 26);
  CHECK(c.r == 17);
  CHECK(c.m_fit == 600);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config files layer over defaults") {
  const auto dir = testing::fresh_dir("cfg");
  {
    std::ofstream os(dir / "a.json");
    os << R"({"s": 12, "r": 9, "diffusion": {"alpha": 0.3}})";
  }
  const ExperimentConfig c = load_experiment_config(dir / "a.json");
  CHECK(c.s == 12);
  CHECK(c.r == 9);
  CHECK(c.diffusion.alpha == 0.3);
  CHECK(c.diffusion.N_a == 21);
  {
    std::ofstream os(dir / "b.json");
    os << R"({"s": "twelve"})";
  }
  CHECK_THROWS_AS(load_experiment_config(dir / "b.json"), InvalidArgument);
  CHECK_THROWS_AS(load_experiment_config(dir / "missing.json"), IoError);
}

TEST_CASE("single run writes a dominated, deterministic report") {
  const auto root = testing::fresh_dir("single");
  const ExperimentReport a = run_single(small_experiment(root / "a"));
  const ExperimentReport b = run_single(small_experiment(root / "b"));
  CHECK(a.n == 49);
  CHECK(a.q == 12);
  CHECK(a.dominance_ok);
  CHECK(a.truth_discrepancy < 1e-6);
  for (const char* f : {"config.json", "constants.csv", "trajectory.csv", "model/A_tilde.csv",
                        "fields/summary.csv", "fields/diff_180.csv"}) {
    CHECK_MESSAGE(fs::exists(a.run_dir / f), f);
  }
  CHECK(a.actual.size() == 61);
  CHECK(a.bound.bound.size() == 61);
  CHECK(tree(a.run_dir) == tree(b.run_dir));
  REQUIRE(a.fields.size() == 3);
  CHECK(a.fields[0].k == 120);
  CHECK(a.fields[2].k == 180);
}

TEST_CASE("stage annotation on failures") {
  const auto root = testing::fresh_dir("stage");
  ExperimentConfig c = small_experiment(root);
  c.s = 61;
  c.r = 7;
  try {
    run_single(c);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).rfind("fit: ", 0) == 0);
  }
}

TEST_CASE("empty sweep falls back to a single run") {
  const auto root = testing::fresh_dir("empty_sweep");
  const ExperimentConfig c = small_experiment(root);
  const SweepReport sw = run_sweep(c);
  REQUIRE(sw.points.size() == 1);
  REQUIRE(sw.runs.size() == 1);
  const ExperimentReport single = run_single(small_experiment(root / "single"));
  CHECK(sw.runs[0].run_id == single.run_id);
  CHECK(tree(sw.runs[0].run_dir) == tree(single.run_dir));
  CHECK(fs::exists(sw.sweep_dir / "terminal_errors.csv"));
}

TEST_CASE("sweeps couple r to s, isolate configs, and keep partial results") {
  const auto root = testing::fresh_dir("sweep");
  ExperimentConfig c = small_experiment(root);
  c.sweep.m = {100, 120};
  c.sweep.s = {8, 10, 70};
  c.sweep.couple_r = true;
  c.workers = 2;
  const SweepReport sw = run_sweep(c);
  REQUIRE(sw.points.size() == 6);
  CHECK_FALSE(sw.all_ok());
  int failed = 0;
  for (const auto& p : sw.points) {
    if (p.status != "ok") {
      ++failed;
      CHECK(p.s == 70);
    } else {
      CHECK(p.r == p.s - 3);
      CHECK(p.dominance_ok);
    }
  }
  CHECK(failed == 2);
  CHECK(sw.runs.size() == 4);
  CHECK(fs::exists(sw.sweep_dir / "failures.csv"));

  // Only m, s and r differ between the recorded configs.
  nlohmann::json first = nlohmann::json::parse(slurp(sw.runs[0].run_dir / "config.json"));
  for (const auto& run : sw.runs) {
    nlohmann::json j = nlohmann::json::parse(slurp(run.run_dir / "config.json"));
    for (const char* key : {"m_fit", "s", "r"}) {
      j.erase(key);
    }
    nlohmann::json f = first;
    for (const char* key : {"m_fit", "s", "r"}) f.erase(key);
    CHECK(j == f);
  }

  // Worker count does not change the table.
  ExperimentConfig serial = c;
  serial.workers = 1;
  serial.output_dir = (root / "serial").string();
  const SweepReport sw1 = run_sweep(serial);
  CHECK(slurp(sw1.sweep_dir / "terminal_errors.csv") == slurp(sw.sweep_dir / "terminal_errors.csv"));
}

TEST_CASE("field comparison") {
  const auto dir = testing::fresh_dir("fields");
  const Eigen::MatrixXd t = testing::random_matrix(6, 4, 1);
  const auto same = compare_fields(t, t, {0, 3}, 3, dir, 10);
  REQUIRE(same.size() == 2);
  CHECK(same[1].k == 13);
  CHECK(same[0].max_abs == 0.0);
  CHECK(read_matrix_csv(dir / "diff_13.csv").cwiseAbs().maxCoeff() == 0.0);
  CHECK(read_matrix_csv(dir / "true_10.csv").rows() == 2);

  Eigen::MatrixXd p = t;
  p(4, 3) += 0.5;
  const auto diff = compare_fields(t, p, {3}, 3, dir, 0);
  CHECK(diff[0].max_abs == doctest::Approx(0.5));
  CHECK(diff[0].mean_abs == doctest::Approx(0.5 / 6.0));
  CHECK(read_matrix_csv(dir / "diff_3.csv")(1, 1) == doctest::Approx(0.5));

  CHECK_THROWS_AS(compare_fields(t, t.leftCols(3), {0}, 3, dir, 0), InvalidArgument);
  CHECK_THROWS_AS(compare_fields(t, t, {0}, 4, dir, 0), InvalidArgument);
  CHECK_THROWS_AS(compare_fields(t, t, {4}, 3, dir, 0), InvalidArgument);
}

TEST_CASE("dominance recheck reads the written file") {
  const auto dir = testing::fresh_dir("recheck");
  {
    std::ofstream os(dir / "ok.csv");
    os << "k,bound,actual,term1,term2,term3,term4\n0,1,0.5,1,0,0,0\n1,2,2,2,0,0,0\n";
  }
  {
    std::ofstream os(dir / "bad.csv");
    os << "k,bound,actual,term1,term2,term3,term4\n0,1,0.5,1,0,0,0\n1,2,2.5,2,0,0,0\n";
  }
  CHECK(recheck_dominance(dir / "ok.csv"));
  CHECK_FALSE(recheck_dominance(dir / "bad.csv"));
}
