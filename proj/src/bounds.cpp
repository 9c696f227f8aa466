#include "dmdc/bounds.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "dmdc/csv.hpp"
#include "dmdc/error.hpp"
#include "dmdc/linalg.hpp"

namespace dmdc {

double spectral_radius(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw InvalidArgument("spectral_radius: matrix must be square and non-empty");
  }
  if (!a.allFinite()) throw NumericalFailure("spectral_radius: non-finite matrix");
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  if (es.info() != Eigen::Success) throw NumericalFailure("spectral_radius: eigen solver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

TruthModel::TruthModel(Eigen::MatrixXd A, Eigen::MatrixXd B) : A_(std::move(A)), B_(std::move(B)) {
  if (A_.rows() != A_.cols() || A_.rows() == 0) throw InvalidArgument("truth A must be square");
  if (B_.rows() != A_.rows() || B_.cols() == 0) {
    throw InvalidArgument("truth B must have n rows and at least one column");
  }
  rho_ = spectral_radius(A_);
  if (!(rho_ < 1.0)) {
    throw AssumptionViolated("truth model is not stable: spectral radius " + format_double(rho_));
  }
}

StepOracle TruthModel::oracle() const {
  return [A = A_, B = B_](const Eigen::VectorXd& x, const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return A * x + B * u;
  };
}

ThetaError theta_projection_error(const TruthModel& truth, const TruncatedSvd& svd_omega) {
  const Eigen::Index n = truth.n();
  const Eigen::Index q = truth.q();
  if (svd_omega.U.rows() != n + q) {
    throw InvalidArgument("theta_projection_error: basis has " +
                          std::to_string(svd_omega.U.rows()) + " rows, expected n+q = " +
                          std::to_string(n + q));
  }
  Eigen::MatrixXd theta(n, n + q);
  theta << truth.A(), truth.B();
  const Eigen::MatrixXd residual = theta - (theta * svd_omega.U) * svd_omega.U.transpose();
  return ThetaError{spectral_norm(residual), spectral_norm(residual.leftCols(n)),
                    spectral_norm(residual.rightCols(q))};
}

namespace {

// a / rho^k without underflowing rho^k for long horizons.
double scaled(double norm, double rho, std::size_t k) {
  if (norm == 0.0) return 0.0;
  return std::exp(std::log(norm) - static_cast<double>(k) * std::log(rho));
}

struct EnvelopeMax {
  double value = 0.0;
  std::size_t argmax = 0;
};

// max_k ‖D·A^k‖ / ρ̄^k over 0 ≤ k ≤ horizon, by iterated right-multiplication.
EnvelopeMax scan_right_powers(Eigen::MatrixXd d, const Eigen::MatrixXd& a, double rho_bar,
                              std::size_t horizon, const char* label) {
  EnvelopeMax best;
  Eigen::MatrixXd next(d.rows(), d.cols());
  for (std::size_t k = 0; k <= horizon; ++k) {
    const double v = scaled(spectral_norm(d), rho_bar, k);
    if (!std::isfinite(v)) {
      throw NumericalFailure(std::string(label) + " envelope diverged at k = " + std::to_string(k),
                             k);
    }
    if (v > best.value) best = {v, k};
    if (k < horizon) {
      next.noalias() = d * a;
      d.swap(next);
    }
  }
  return best;
}

// Â − U_r Ã U_rᵀ has its rows in span([Û₁, U_r]) when Â came from the same
// SVD, so with an orthonormal basis Q of that span ‖D A^k‖ = ‖(DQ)(QᵀA^k)‖
// and the power iteration runs on (s+r) × n blocks. Falls back to the full
// scan if the caller's Â is not of that form.
EnvelopeMax scan_reduction_gap(const Eigen::MatrixXd& gap, const TruncatedSvd& svd_omega,
                               const Eigen::MatrixXd& U_r, const Eigen::MatrixXd& a,
                               double rho_bar, std::size_t horizon) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd span(n, svd_omega.order + U_r.cols());
  span << svd_omega.U.topRows(n), U_r;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(span);
  const Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(n, std::min(n, span.cols()));
  const Eigen::MatrixXd left = gap * q;
  const double gap_norm = spectral_norm(gap);
  if (gap_norm == 0.0) return {};
  if (spectral_norm(gap - left * q.transpose()) > 1e-12 * gap_norm) {
    return scan_right_powers(gap, a, rho_bar, horizon, "reduction-error");
  }

  Eigen::HouseholderQR<Eigen::MatrixXd> lq(left);
  const Eigen::Index k = std::min(left.rows(), left.cols());
  const Eigen::MatrixXd t = lq.matrixQR().topRows(k).triangularView<Eigen::Upper>();

  EnvelopeMax best;
  Eigen::MatrixXd z = q.transpose();
  Eigen::MatrixXd next(z.rows(), z.cols());
  for (std::size_t j = 0; j <= horizon; ++j) {
    const double v = scaled(spectral_norm(t * z), rho_bar, j);
    if (!std::isfinite(v)) {
      throw NumericalFailure("reduction-error envelope diverged at k = " + std::to_string(j), j);
    }
    if (v > best.value) best = {v, j};
    if (j < horizon) {
      next.noalias() = z * a;
      z.swap(next);
    }
  }
  return best;
}

}  // namespace

BoundConstants estimate_constants(const TruthModel& truth, const DmdcModel& model,
                                  const Eigen::MatrixXd& A_hat, const Eigen::MatrixXd& B_hat,
                                  std::size_t K_est, double rho_margin) {
  const Eigen::Index n = truth.n();
  const Eigen::Index q = truth.q();
  if (K_est < 1) throw InvalidArgument("estimate_constants: K_est must be at least 1");
  if (!(rho_margin > 0.0 && rho_margin < 1.0)) {
    throw InvalidArgument("estimate_constants: rho_margin must lie in (0, 1)");
  }
  if (model.n() != n || model.q() != q || A_hat.rows() != n || A_hat.cols() != n ||
      B_hat.rows() != n || B_hat.cols() != q) {
    throw InvalidArgument("estimate_constants: truth, model and full-order estimate disagree in "
                          "dimension");
  }
  if (!model.svd_omega) {
    throw InvalidArgument("estimate_constants: model carries no SVD of Omega (loaded from disk?)");
  }

  BoundConstants c;
  c.K_est = K_est;
  c.rho_A = truth.rho();
  c.rho_bar = c.rho_A + rho_margin * (1.0 - c.rho_A);

  const ThetaError theta = theta_projection_error(truth, *model.svd_omega);
  c.eps_s = theta.eps_s;
  c.eps_s_A = spectral_norm(truth.A() - A_hat);
  c.eps_s_B = spectral_norm(truth.B() - B_hat);
  c.eps_r_B = spectral_norm(B_hat - model.U_r * (model.U_r.transpose() * B_hat));

  const Eigen::MatrixXd galerkin = model.U_r * model.A_tilde * model.U_r.transpose();
  const Eigen::MatrixXd reduction_gap = A_hat - galerkin;
  c.c_rm = spectral_norm(reduction_gap);

  // ‖U_r Ã^k U_rᵀ‖ = ‖Ã^k‖ because U_r has orthonormal columns.
  const Eigen::MatrixXd identity_r = Eigen::MatrixXd::Identity(model.r, model.r);
  Eigen::MatrixXd power = identity_r;
  EnvelopeMax reduced;
  for (std::size_t k = 0; k <= K_est; ++k) {
    const double v = scaled(spectral_norm(power), c.rho_bar, k);
    if (!std::isfinite(v)) {
      throw NumericalFailure("reduced-model envelope diverged at k = " + std::to_string(k), k);
    }
    if (v > reduced.value) reduced = {v, k};
    power = model.A_tilde * power;
  }
  c.M = std::max(1.0, reduced.value);
  c.M_argmax = reduced.argmax;

  const EnvelopeMax sm = scan_right_powers(truth.A() - A_hat, truth.A(), c.rho_bar, K_est,
                                           "estimation-error");
  const EnvelopeMax rm = scan_reduction_gap(reduction_gap, *model.svd_omega, model.U_r,
                                            truth.A(), c.rho_bar, K_est);
  c.M_sm = sm.value;
  c.M_sm_argmax = sm.argmax;
  c.M_rm = rm.value;
  c.M_rm_argmax = rm.argmax;

  c.rho_tilde = spectral_radius(model.A_tilde);
  c.reduced_slower_than_envelope = c.rho_tilde >= c.rho_bar;
  c.horizon_limited = (reduced.value >= 1.0 && c.M_argmax == K_est) ||
                      (c.M_sm > 0.0 && c.M_sm_argmax == K_est) ||
                      (c.M_rm > 0.0 && c.M_rm_argmax == K_est);
  return c;
}

std::vector<std::pair<std::string, std::string>> BoundConstants::to_rows() const {
  std::vector<std::pair<std::string, std::string>> rows = {
      {"rho_A", format_double(rho_A)},
      {"rho_bar", format_double(rho_bar)},
      {"M", format_double(M)},
      {"M_sm", format_double(M_sm)},
      {"M_rm", format_double(M_rm)},
      {"eps_s", format_double(eps_s)},
      {"eps_s_A", format_double(eps_s_A)},
      {"eps_s_B", format_double(eps_s_B)},
      {"eps_r_B", format_double(eps_r_B)},
      {"c_rm", format_double(c_rm)},
      {"K_est", std::to_string(K_est)},
      {"M_argmax", std::to_string(M_argmax)},
      {"M_sm_argmax", std::to_string(M_sm_argmax)},
      {"M_rm_argmax", std::to_string(M_rm_argmax)},
      {"rho_tilde", format_double(rho_tilde)},
      {"reduced_slower_than_envelope", reduced_slower_than_envelope ? "1" : "0"},
      {"horizon_limited", horizon_limited ? "1" : "0"},
  };
  if (u_bar) rows.emplace_back("u_bar", format_double(*u_bar));
  return rows;
}

InputNorms exact_input_norms(const TruthModel& truth, const InputSequence& window) {
  if (window.dim() != truth.q()) throw InvalidArgument("input dimension does not match truth B");
  InputNorms out;
  const Eigen::MatrixXd bu = truth.B() * window.values;
  for (Eigen::Index j = 0; j < window.steps(); ++j) {
    out.u_norms.push_back(window.values.col(j).norm());
    out.bu_norms.push_back(bu.col(j).norm());
  }
  return out;
}

InputNorms bounded_input_norms(double B_norm, const InputSequence& window) {
  InputNorms out;
  for (Eigen::Index j = 0; j < window.steps(); ++j) {
    const double u = window.values.col(j).norm();
    out.u_norms.push_back(u);
    out.bu_norms.push_back(B_norm * u);
  }
  return out;
}

InputNorms uniform_input_norms(double u_bar, double B_norm, std::size_t steps) {
  return InputNorms{std::vector<double>(steps, u_bar), std::vector<double>(steps, B_norm * u_bar)};
}

BoundTrajectory bound_trajectory(const BoundConstants& c, double e_m_norm, double x_m_norm,
                                 const InputNorms& inputs, std::size_t m, std::size_t K) {
  if (K < 1) throw InvalidArgument("bound_trajectory: K must be at least 1");
  if (inputs.u_norms.size() < K || inputs.bu_norms.size() + 1 < K) {
    throw InvalidArgument("bound_trajectory: inputs cover " +
                          std::to_string(inputs.u_norms.size()) + " steps, need " +
                          std::to_string(K));
  }
  if (!(c.rho_bar > 0.0 && c.rho_bar < 1.0)) {
    throw InvalidArgument("bound_trajectory: rho_bar must lie in (0, 1)");
  }

  std::vector<double> powers(K + 1);
  for (std::size_t j = 0; j <= K; ++j) powers[j] = std::pow(c.rho_bar, static_cast<double>(j));

  const double m_sum = c.M_sm + c.M_rm;
  const double eps_b = c.eps_s_B + c.eps_r_B;

  BoundTrajectory out;
  out.bound.m = m;
  for (std::size_t d = 0; d <= K; ++d) {
    const double t1 = c.M * powers[d] * e_m_norm;
    const double t2 =
        d == 0 ? 0.0 : c.M * static_cast<double>(d) * powers[d - 1] * m_sum * x_m_norm;
    double s3 = 0.0;
    for (std::size_t i = 0; i < d; ++i) s3 += powers[d - 1 - i] * inputs.u_norms[i];
    double s4 = 0.0;
    for (std::size_t i = 0; i + 2 <= d; ++i) {
      s4 += static_cast<double>(i + 1) * powers[i] * inputs.bu_norms[d - 2 - i];
    }
    const double t3 = c.M * eps_b * s3;
    const double t4 = c.M * m_sum * s4;
    out.term1.push_back(t1);
    out.term2.push_back(t2);
    out.term3.push_back(t3);
    out.term4.push_back(t4);
    out.bound.values.push_back(t1 + t2 + t3 + t4);
  }
  return out;
}

double asymptotic_bound(const BoundConstants& c, double B_norm) {
  if (!c.u_bar) throw InvalidArgument("asymptotic_bound: u_bar is not set");
  if (!(c.rho_bar < 1.0)) throw InvalidArgument("asymptotic_bound: rho_bar must be below 1");
  const double u = *c.u_bar;
  const double gap = 1.0 - c.rho_bar;
  return c.M * u / gap * (c.eps_s_B + c.eps_r_B) +
         c.M * B_norm * u / (gap * gap) * (c.M_sm + c.M_rm);
}

ErrorTrajectory actual_error_trajectory(const TruthModel& truth, const DmdcModel& model,
                                        const Eigen::VectorXd& x_m, const InputSequence& window,
                                        std::size_t K, std::size_t m) {
  if (x_m.size() != truth.n() || model.n() != truth.n() || model.q() != truth.q()) {
    throw InvalidArgument("actual_error_trajectory: dimension mismatch");
  }
  if (window.steps() < static_cast<Eigen::Index>(K) || (K > 0 && window.dim() != truth.q())) {
    throw InvalidArgument("actual_error_trajectory: inputs do not cover " + std::to_string(K) +
                          " steps");
  }
  ErrorTrajectory out;
  out.m = m;
  Eigen::VectorXd x = x_m;
  Eigen::VectorXd xr = model.U_r.transpose() * x_m;
  out.values.push_back((x - model.U_r * xr).norm());
  for (std::size_t k = 0; k < K; ++k) {
    const auto u = window.values.col(static_cast<Eigen::Index>(k));
    x = truth.A() * x + truth.B() * u;
    xr = model.A_tilde * xr + model.B_tilde * u;
    const double e = (x - model.U_r * xr).norm();
    if (!std::isfinite(e)) {
      throw NumericalFailure("non-finite state at k = " + std::to_string(m + k + 1), m + k + 1);
    }
    out.values.push_back(e);
  }
  return out;
}

void write_certificate_csv(const std::filesystem::path& path, const BoundTrajectory& bound,
                           const ErrorTrajectory& actual) {
  if (actual.values.size() != bound.bound.values.size() || actual.m != bound.bound.m) {
    throw InvalidArgument("certificate: bound and actual trajectories are not aligned");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "k,bound,actual,term1,term2,term3,term4\n";
  for (std::size_t i = 0; i < actual.values.size(); ++i) {
    os << (actual.m + i) << ',' << format_double(bound.bound.values[i]) << ','
       << format_double(actual.values[i]) << ',' << format_double(bound.term1[i]) << ','
       << format_double(bound.term2[i]) << ',' << format_double(bound.term3[i]) << ','
       << format_double(bound.term4[i]) << '\n';
  }
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace dmdc
