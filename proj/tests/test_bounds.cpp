#include <doctest.h>

#include "dmdc/bounds.hpp"
#include "dmdc/csv.hpp"
#include "dmdc/error.hpp"
#include "support.hpp"

#include <fstream>
#include <sstream>

using namespace dmdc;

namespace {

SnapshotSet drive(const TruthModel& truth, const InputSequence& u, const Eigen::VectorXd& x0,
                  Eigen::Index m) {
  return collect_snapshots(truth.oracle(), x0, u, m);
}

BoundConstants hand_constants() {
  BoundConstants c;
  c.M = 2.0;
  c.rho_bar = 0.5;
  c.M_sm = 0.1;
  c.M_rm = 0.2;
  c.eps_s_B = 0.3;
  c.eps_r_B = 0.1;
  return c;
}

}  // namespace

TEST_CASE("spectral radius and the stability precondition") {
  Eigen::MatrixXd R(2, 2);
  R << 0.0, -0.5, 0.5, 0.0;
  CHECK(spectral_radius(R) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_NOTHROW(TruthModel(R, Eigen::MatrixXd::Ones(2, 1)));
  CHECK_THROWS_AS(TruthModel(2.0 * R + Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Ones(2, 1)),
                  AssumptionViolated);
  CHECK_THROWS_AS(TruthModel(R, Eigen::MatrixXd::Ones(3, 1)), InvalidArgument);
}

TEST_CASE("bound by hand for a three-step horizon") {
  const BoundConstants c = hand_constants();
  const InputNorms in{{1.0, 2.0}, {3.0, 5.0}};
  const BoundTrajectory b = bound_trajectory(c, 1.0, 4.0, in, 10, 2);
  REQUIRE(b.bound.size() == 3);
  CHECK(b.bound.m == 10);
  CHECK(b.bound.at_time(10) == doctest::Approx(2.0));
  CHECK(b.bound.at_time(11) == doctest::Approx(4.2));
  CHECK(b.term2[1] == doctest::Approx(2.4));
  CHECK(b.term3[1] == doctest::Approx(0.8));
  CHECK(b.term4[1] == 0.0);
  CHECK(b.term1[2] == doctest::Approx(0.5));
  CHECK(b.term2[2] == doctest::Approx(2.4));
  CHECK(b.term3[2] == doctest::Approx(2.0));
  CHECK(b.term4[2] == doctest::Approx(1.8));
  CHECK(b.bound.terminal() == doctest::Approx(6.7));
  CHECK_THROWS_AS(bound_trajectory(c, 1.0, 4.0, in, 10, 3), InvalidArgument);
}

TEST_CASE("asymptote by hand and the uniform-input tail") {
  BoundConstants c = hand_constants();
  CHECK_THROWS_AS(asymptotic_bound(c, 1.0), InvalidArgument);
  c.u_bar = 1.0;
  // 2·1/0.5·0.4 + 2·1·1/0.25·0.3
  const double limit = asymptotic_bound(c, 1.0);
  CHECK(limit == doctest::Approx(4.0));
  const BoundTrajectory b = bound_trajectory(c, 1.0, 4.0, uniform_input_norms(1.0, 1.0, 200), 0, 200);
  for (std::size_t k = 100; k <= 200; ++k) CHECK(b.bound.at_time(k) <= limit + 1e-9);
  CHECK(b.bound.terminal() == doctest::Approx(limit).epsilon(1e-9));
}

TEST_CASE("envelope constants match a brute-force scan on a Jordan block") {
  Eigen::MatrixXd A(3, 3), B(3, 1);
  A << 0.9, 1.0, 0.0, 0.0, 0.9, 1.0, 0.0, 0.0, 0.9;
  B << 0.0, 0.0, 1.0;
  const TruthModel truth(A, B);
  const SnapshotSet data =
      drive(truth, generate_prbs(1, 80, 1.0, 1, 4), testing::random_matrix(3, 1, 2).col(0), 80);
  const DmdcModel model = fit_dmdc(data, 3, 2);
  const FullOrderEstimate est = estimate_full_order(data, 3);
  const std::size_t K = 200;
  const BoundConstants c = estimate_constants(truth, model, est.A_hat, est.B_hat, K);

  CHECK(c.rho_A == doctest::Approx(0.9).epsilon(1e-4));  // defective: eigenvalues are sensitive
  CHECK(c.rho_bar == doctest::Approx(c.rho_A + 0.5 * (1.0 - c.rho_A)));
  const Eigen::MatrixXd Ir = Eigen::MatrixXd::Identity(2, 2);
  CHECK(c.M == doctest::Approx(testing::envelope_scan(Ir, model.A_tilde, c.rho_bar, K)).epsilon(1e-9));
  CHECK(c.M_sm == doctest::Approx(testing::envelope_scan(A - est.A_hat, A, c.rho_bar, K)).epsilon(1e-9));
  const Eigen::MatrixXd gap = est.A_hat - model.U_r * model.A_tilde * model.U_r.transpose();
  CHECK(c.M_rm == doctest::Approx(testing::envelope_scan(gap, A, c.rho_bar, K)).epsilon(1e-9));
  CHECK(c.c_rm == doctest::Approx(testing::norm2(gap)).epsilon(1e-10));
  CHECK(c.eps_s_A == doctest::Approx(testing::norm2(A - est.A_hat)).epsilon(1e-10));
  CHECK(c.eps_s_B == doctest::Approx(testing::norm2(B - est.B_hat)).epsilon(1e-10));
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(3, 3) - model.U_r * model.U_r.transpose();
  CHECK(c.eps_r_B == doctest::Approx(testing::norm2(P * est.B_hat)).epsilon(1e-10));
  // The Jordan block's transient peaks well after k = 0.
  CHECK(c.M_argmax > 0);
}

TEST_CASE("projection error equals the estimation error on noise-free data") {
  Eigen::MatrixXd A, B;
  testing::random_system(7, 2, 0.85, 12, A, B);
  const TruthModel truth(A, B);
  const SnapshotSet data =
      drive(truth, generate_prbs(2, 60, 1.0, 1, 6), testing::random_matrix(7, 1, 3).col(0), 60);
  const DmdcModel model = fit_dmdc(data, 5, 4);
  const FullOrderEstimate est = estimate_full_order(data, 5);
  const ThetaError e = theta_projection_error(truth, *model.svd_omega);
  Eigen::MatrixXd diff(7, 9);
  diff << A - est.A_hat, B - est.B_hat;
  CHECK(e.eps_s == doctest::Approx(testing::norm2(diff)).epsilon(1e-9));
  CHECK(e.eps_s_A == doctest::Approx(testing::norm2(A - est.A_hat)).epsilon(1e-9));
  CHECK(e.eps_s_B == doctest::Approx(testing::norm2(B - est.B_hat)).epsilon(1e-9));
}

TEST_CASE("actual error trajectory against a hand loop") {
  Eigen::MatrixXd A, B;
  testing::random_system(5, 1, 0.8, 1, A, B);
  const TruthModel truth(A, B);
  const SnapshotSet data =
      drive(truth, generate_prbs(1, 40, 1.0, 1, 9), testing::random_matrix(5, 1, 8).col(0), 40);
  const DmdcModel model = fit_dmdc(data, 4, 3);
  const InputSequence u = generate_sinusoid(1, 25, 2.0, 0.02, 1.0);
  const Eigen::VectorXd x0 = testing::random_matrix(5, 1, 4).col(0);
  const ErrorTrajectory e = actual_error_trajectory(truth, model, x0, u, 25, 40);
  REQUIRE(e.size() == 26);
  Eigen::VectorXd x = x0;
  Eigen::VectorXd z = model.U_r.transpose() * x0;
  for (int k = 0; k <= 25; ++k) {
    CHECK(e.at_time(40 + k) == doctest::Approx((x - model.U_r * z).norm()).epsilon(1e-12));
    x = A * x + B * u.values.col(std::min(k, 24));
    z = model.A_tilde * z + model.B_tilde * u.values.col(std::min(k, 24));
  }
}

TEST_CASE("scalar coarse fit: the bound dominates the actual error") {
  Eigen::MatrixXd A(1, 1), B(1, 1);
  A << 0.9;
  B << 1.0;
  const TruthModel truth(A, B);
  // Ω is 2 × (m−1) of rank 2; keeping s = 1 gives a biased fit.
  const SnapshotSet data =
      drive(truth, generate_prbs(1, 60, 1.0, 3, 2), Eigen::VectorXd::Constant(1, 3.0), 60);
  const DmdcModel model = fit_dmdc(data, 1, 1);
  const FullOrderEstimate est = estimate_full_order(data, 1);
  const std::size_t K = 200;
  BoundConstants c = estimate_constants(truth, model, est.A_hat, est.B_hat, K);
  CHECK(c.eps_s > 1e-3);

  const InputSequence u = generate_sinusoid(1, K, 2.0, 0.02, 1.0);
  const Eigen::VectorXd x_m = Eigen::VectorXd::Constant(1, 5.0);
  const ErrorTrajectory actual = actual_error_trajectory(truth, model, x_m, u, K, 60);
  for (const InputNorms& in : {exact_input_norms(truth, u), bounded_input_norms(1.0, u)}) {
    const BoundTrajectory b = bound_trajectory(c, actual.values[0], x_m.norm(), in, 60, K);
    int violations = 0;
    for (std::size_t k = 0; k <= K; ++k) violations += b.bound.values[k] < actual.values[k];
    CHECK(violations == 0);
  }
}

TEST_CASE("certificate csv layout") {
  const BoundConstants c = hand_constants();
  const BoundTrajectory b = bound_trajectory(c, 1.0, 4.0, InputNorms{{1.0, 2.0}, {3.0, 5.0}}, 10, 2);
  ErrorTrajectory actual{{0.5, 0.6, 0.7}, 10};
  const auto dir = testing::fresh_dir("cert");
  write_certificate_csv(dir / "t.csv", b, actual);
  std::ifstream is(dir / "t.csv");
  std::string header;
  std::getline(is, header);
  CHECK(header == "k,bound,actual,term1,term2,term3,term4");
  std::stringstream rest;
  rest << is.rdbuf();
  const Eigen::MatrixXd rows = parse_matrix_csv(rest.str());
  REQUIRE(rows.rows() == 3);
  CHECK(rows(2, 0) == 12.0);
  CHECK(rows(2, 1) == doctest::Approx(6.7));
  CHECK(rows(1, 2) == 0.6);
}
