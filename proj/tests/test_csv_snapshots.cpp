#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "dmdc/csv.hpp"
#include "dmdc/error.hpp"
#include "dmdc/snapshots.hpp"
#include "support.hpp"

using namespace dmdc;

TEST_CASE("csv round trip is exact") {
  Eigen::MatrixXd m(2, 3);
  m << 0.1, -1.0 / 3.0, 1e-300, std::numeric_limits<double>::max(), 2.0, -0.0;
  const auto dir = testing::fresh_dir("csv");
  write_matrix_csv(dir / "m.csv", m);
  const Eigen::MatrixXd back = read_matrix_csv(dir / "m.csv");
  REQUIRE(back.rows() == 2);
  REQUIRE(back.cols() == 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) CHECK(back(i) == m(i));
}

TEST_CASE("csv parser locates bad cells") {
  try {
    parse_matrix_csv("1,2\n3,x\n");
    FAIL("no throw");
  } catch (const ParseError& e) {
    CHECK(e.row() == 2);
    CHECK(e.column() == 2);
  }
  try {
    parse_matrix_csv("1,2\n\n3\n");
    FAIL("no throw");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);
    CHECK(e.column() == 0);
  }
  CHECK_THROWS_AS(read_matrix_csv("/nonexistent/x.csv"), IoError);
}

TEST_CASE("csv parser accepts a leading plus and skips blank lines") {
  const Eigen::MatrixXd m = parse_matrix_csv("+1,2e3\n\n-4,5\n");
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == 2000.0);
  CHECK(m(1, 0) == -4.0);
}

TEST_CASE("prbs is two-level, held, and seeded") {
  const InputSequence a = generate_prbs(3, 40, 1.5, 4, 99);
  const InputSequence b = generate_prbs(3, 40, 1.5, 4, 99);
  const InputSequence c = generate_prbs(3, 40, 1.5, 4, 100);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  CHECK((a.values.array().abs() == 1.5).all());
  for (int k = 0; k < 40; ++k) CHECK(a.values.col(k) == a.values.col(k - k % 4));
  // Both levels appear on every channel.
  for (int i = 0; i < 3; ++i) {
    CHECK(a.values.row(i).maxCoeff() == 1.5);
    CHECK(a.values.row(i).minCoeff() == -1.5);
  }
  CHECK_THROWS_AS(generate_prbs(3, 10, 1.0, 0, 1), InvalidArgument);
}

TEST_CASE("sinusoid matches the closed form") {
  const InputSequence u = generate_sinusoid(2, 100, 2.0, 0.02, 0.5);
  for (int k = 0; k < 100; ++k) {
    const double expected = 2.0 * std::sin(2.0 * M_PI * 0.02 * k * 0.5);
    CHECK(u.values(0, k) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(u.values(1, k) == u.values(0, k));
  }
  CHECK(u.dt == 0.5);
}

TEST_CASE("snapshots of a scalar system by hand") {
  // x+ = 0.5 x + u, x0 = 1, u = 1: 1, 1.5, 1.75, 1.875
  const StepOracle f = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return Eigen::VectorXd(0.5 * x + u);
  };
  InputSequence u{Eigen::MatrixXd::Ones(1, 3), 1.0};
  const SnapshotSet s = collect_snapshots(f, Eigen::VectorXd::Ones(1), u, 4);
  CHECK(s.m() == 4);
  CHECK(s.X(0, 0) == 1.0);
  CHECK(s.X(0, 2) == 1.75);
  CHECK(s.Y(0, 0) == 1.5);
  CHECK(s.Y(0, 2) == 1.875);
  CHECK(s.omega().rows() == 2);
  CHECK(s.leading(2).X.cols() == 1);
  CHECK_NOTHROW(validate(s));
}

TEST_CASE("simulate reports the step that went non-finite") {
  int calls = 0;
  const StepOracle f = [&](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::VectorXd(++calls == 3 ? Eigen::VectorXd::Constant(1, NAN) : x);
  };
  InputSequence u{Eigen::MatrixXd::Zero(1, 5), 1.0};
  try {
    simulate(f, Eigen::VectorXd::Ones(1), u, 5);
    FAIL("no throw");
  } catch (const NumericalFailure& e) {
    CHECK(e.step() == 3);
  }
}

TEST_CASE("burst snapshots never straddle a restart") {
  Eigen::MatrixXd A, B;
  testing::random_system(4, 2, 0.8, 5, A, B);
  const StepOracle f = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return Eigen::VectorXd(A * x + B * u);
  };
  const InputSequence u = generate_prbs(2, 6 * 4, 1.0, 1, 3);
  const SnapshotSet s = collect_burst_snapshots(f, 4, u, 6, 5, 2.0, 3);
  REQUIRE(s.X.cols() == 24);
  CHECK((s.Y - A * s.X - B * s.U).norm() < 1e-12);
  // Every burst opens at a ±2 field.
  for (int b = 0; b < 6; ++b) CHECK((s.X.col(4 * b).array().abs() == 2.0).all());
}

TEST_CASE("snapshots from a trajectory and shape checks") {
  const Eigen::MatrixXd states = testing::random_matrix(3, 10, 1);
  const Eigen::MatrixXd inputs = testing::random_matrix(2, 9, 2);
  const SnapshotSet s = snapshots_from_trajectory(states, inputs, 6);
  CHECK(s.X == states.leftCols(5));
  CHECK(s.Y == states.middleCols(1, 5));
  CHECK(s.U == inputs.leftCols(5));
  CHECK_THROWS_AS(snapshots_from_trajectory(states, inputs, 11), InvalidArgument);
  SnapshotSet bad = s;
  bad.U = inputs.leftCols(4);
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
}
