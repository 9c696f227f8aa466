#include "dmdc/dmdc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "dmdc/csv.hpp"
#include "dmdc/error.hpp"

namespace dmdc {

namespace {

constexpr double kRankTolFactor = 1e-12;

void fix_signs(Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
  for (Eigen::Index j = 0; j < U.cols(); ++j) {
    Eigen::Index arg = 0;
    U.col(j).cwiseAbs().maxCoeff(&arg);
    if (U(arg, j) < 0.0) {
      U.col(j) = -U.col(j);
      V.col(j) = -V.col(j);
    }
  }
}

std::string shape(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void sort_eigenpairs(Eigen::VectorXcd& lambda, Eigen::MatrixXcd& w) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(lambda.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double ma = std::abs(lambda(a));
    const double mb = std::abs(lambda(b));
    if (ma != mb) return ma > mb;
    if (lambda(a).real() != lambda(b).real()) return lambda(a).real() > lambda(b).real();
    return lambda(a).imag() > lambda(b).imag();
  });
  Eigen::VectorXcd l2(lambda.size());
  Eigen::MatrixXcd w2(w.rows(), w.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    l2(k) = lambda(idx[i]);
    w2.col(k) = w.col(idx[i]);
  }
  lambda = std::move(l2);
  w = std::move(w2);
}

void eigen_pairs(const Eigen::MatrixXd& a, Eigen::VectorXcd& lambda, Eigen::MatrixXcd& w) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, true);
  if (es.info() != Eigen::Success) throw NumericalFailure("eigendecomposition of A_tilde failed");
  lambda = es.eigenvalues();
  w = es.eigenvectors();
  sort_eigenpairs(lambda, w);
}

void check_orders(const SnapshotSet& data, Eigen::Index s, Eigen::Index r) {
  validate(data);
  const Eigen::Index max_s = std::min(data.n() + data.q(), data.m() - 1);
  if (s < 1 || s > max_s) {
    throw InvalidArgument("order s = " + std::to_string(s) + " outside [1, " +
                          std::to_string(max_s) + "]");
  }
  if (r < 1 || r > s) {
    throw InvalidArgument("order r = " + std::to_string(r) + " outside [1, s = " +
                          std::to_string(s) + "]");
  }
  if (r > data.n()) {
    throw InvalidArgument("order r = " + std::to_string(r) + " exceeds state dimension " +
                          std::to_string(data.n()));
  }
}

// Y V̂ Σ̂⁻¹, the n × s factor shared by Â and B̂.
Eigen::MatrixXd scaled_response(const SnapshotSet& data, const TruncatedSvd& svd) {
  return (data.Y * svd.V) * svd.S.cwiseInverse().asDiagonal();
}

}  // namespace

double rank_tolerance(Eigen::Index rows, Eigen::Index cols, double sigma_max) {
  return static_cast<double>(std::max(rows, cols)) * sigma_max * kRankTolFactor;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues();
}

Eigen::Index numerical_rank(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0;
  const Eigen::VectorXd s = singular_values(m);
  const double tol = rank_tolerance(m.rows(), m.cols(), s(0));
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > 0.0 && s(rank) >= tol) ++rank;
  return rank;
}

TruncatedSvd truncated_svd(const Eigen::MatrixXd& m, Eigen::Index order) {
  const Eigen::Index max_order = std::min(m.rows(), m.cols());
  if (order < 1 || order > max_order) {
    throw InvalidArgument("truncation order " + std::to_string(order) + " outside [1, " +
                          std::to_string(max_order) + "] for a " + shape(m) + " matrix");
  }
  if (!m.allFinite()) throw NumericalFailure("truncated_svd: matrix has non-finite entries");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalFailure("SVD did not converge");
  const Eigen::VectorXd& sv = svd.singularValues();

  const double tol = rank_tolerance(m.rows(), m.cols(), sv(0));
  Eigen::Index admissible = 0;
  while (admissible < sv.size() && sv(admissible) > 0.0 && sv(admissible) >= tol) ++admissible;
  if (order > admissible) {
    throw RankDeficient("truncation order " + std::to_string(order) + " keeps singular value " +
                            format_double(sv(order - 1)) + " below tolerance " +
                            format_double(tol) + "; largest admissible order is " +
                            std::to_string(admissible),
                        static_cast<std::size_t>(admissible));
  }

  TruncatedSvd out;
  out.order = order;
  out.U = svd.matrixU().leftCols(order);
  out.V = svd.matrixV().leftCols(order);
  out.S = sv.head(order);
  fix_signs(out.U, out.V);
  return out;
}

Eigen::Index suggest_order(const Eigen::VectorXd& sv, double energy) {
  if (sv.size() == 0) throw InvalidArgument("suggest_order: no singular values");
  if (!(energy > 0.0 && energy <= 1.0)) throw InvalidArgument("energy must lie in (0, 1]");
  const double total = sv.squaredNorm();
  if (total == 0.0) return 1;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    acc += sv(i) * sv(i);
    if (acc >= energy * total) return i + 1;
  }
  return sv.size();
}

DmdcModel fit_dmdc(const SnapshotSet& data, Eigen::Index s, Eigen::Index r) {
  check_orders(data, s, r);
  const Eigen::Index n = data.n();
  const Eigen::Index q = data.q();

  TruncatedSvd svd_omega = truncated_svd(data.omega(), s);
  TruncatedSvd svd_y = truncated_svd(data.Y, r);

  DmdcModel model;
  model.s = s;
  model.r = r;
  model.m = data.m();
  model.U_r = std::move(svd_y.U);

  // U_rᵀ (Y V̂ Σ̂⁻¹), r × s
  const Eigen::MatrixXd reduced =
      ((model.U_r.transpose() * data.Y) * svd_omega.V) * svd_omega.S.cwiseInverse().asDiagonal();
  const auto u1 = svd_omega.U.topRows(n);
  const auto u2 = svd_omega.U.bottomRows(q);
  model.A_tilde = reduced * (u1.transpose() * model.U_r);
  model.B_tilde = reduced * u2.transpose();

  if (!model.A_tilde.allFinite() || !model.B_tilde.allFinite()) {
    throw NumericalFailure("fit_dmdc produced non-finite reduced operators");
  }
  eigen_pairs(model.A_tilde, model.Lambda, model.W);
  model.svd_omega = std::move(svd_omega);
  return model;
}

FullOrderEstimate estimate_full_order(const SnapshotSet& data, Eigen::Index s) {
  check_orders(data, s, 1);
  const TruncatedSvd svd = truncated_svd(data.omega(), s);
  const Eigen::MatrixXd g = scaled_response(data, svd);
  FullOrderEstimate est;
  est.A_hat = g * svd.U.topRows(data.n()).transpose();
  est.B_hat = g * svd.U.bottomRows(data.q()).transpose();
  return est;
}

ReducedTrajectory predict(const DmdcModel& model, const Eigen::VectorXd& x_start,
                          const InputSequence& inputs, Eigen::Index steps,
                          Eigen::Index start_index) {
  if (x_start.size() != model.n()) {
    throw InvalidArgument("predict: x_start has dimension " + std::to_string(x_start.size()) +
                          ", model expects " + std::to_string(model.n()));
  }
  if (steps < 0 || inputs.steps() < steps) {
    throw InvalidArgument("predict: need " + std::to_string(steps) + " input columns, have " +
                          std::to_string(inputs.steps()));
  }
  if (steps > 0 && inputs.dim() != model.q()) {
    throw InvalidArgument("predict: input dimension " + std::to_string(inputs.dim()) +
                          " does not match model q = " + std::to_string(model.q()));
  }
  ReducedTrajectory traj;
  traj.start_index = start_index;
  traj.states.resize(model.r, steps + 1);
  traj.states.col(0) = model.U_r.transpose() * x_start;
  for (Eigen::Index k = 0; k < steps; ++k) {
    traj.states.col(k + 1) =
        model.A_tilde * traj.states.col(k) + model.B_tilde * inputs.values.col(k);
    if (!traj.states.col(k + 1).allFinite()) {
      throw NumericalFailure("reduced state became non-finite at step " +
                                 std::to_string(start_index + k + 1),
                             static_cast<std::size_t>(start_index + k + 1));
    }
  }
  return traj;
}

Eigen::MatrixXd reconstruct(const DmdcModel& model, const ReducedTrajectory& traj) {
  if (traj.states.rows() != model.r) {
    throw InvalidArgument("reconstruct: trajectory has " + std::to_string(traj.states.rows()) +
                          " reduced coordinates, model has r = " + std::to_string(model.r));
  }
  return model.U_r * traj.states;
}

DmdModes dmd_modes(const DmdcModel& model, double max_condition) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(model.W);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  const double cond = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
  if (!(cond < max_condition)) {
    throw IllConditioned("A_tilde eigenbasis condition number " + format_double(cond) +
                         " exceeds " + format_double(max_condition));
  }
  return DmdModes{model.Lambda, model.U_r.cast<std::complex<double>>() * model.W};
}

void save_model(const DmdcModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_matrix_csv(dir / "A_tilde.csv", model.A_tilde);
  write_matrix_csv(dir / "B_tilde.csv", model.B_tilde);
  write_matrix_csv(dir / "U_r.csv", model.U_r);
  write_matrix_csv(dir / "lambda_re.csv", model.Lambda.real());
  write_matrix_csv(dir / "lambda_im.csv", model.Lambda.imag());
  Eigen::MatrixXd meta(1, 5);
  meta << static_cast<double>(model.n()), static_cast<double>(model.q()),
      static_cast<double>(model.s), static_cast<double>(model.r), static_cast<double>(model.m);
  write_matrix_csv(dir / "meta.csv", meta);
}

DmdcModel load_model(const std::filesystem::path& dir) {
  const Eigen::MatrixXd meta = read_matrix_csv(dir / "meta.csv");
  if (meta.rows() != 1 || meta.cols() != 5) {
    throw ParseError((dir / "meta.csv").string() + ": expected one row n,q,s,r,m", 1, 0);
  }
  DmdcModel model;
  model.A_tilde = read_matrix_csv(dir / "A_tilde.csv");
  model.B_tilde = read_matrix_csv(dir / "B_tilde.csv");
  model.U_r = read_matrix_csv(dir / "U_r.csv");
  model.s = static_cast<Eigen::Index>(meta(0, 2));
  model.r = static_cast<Eigen::Index>(meta(0, 3));
  model.m = static_cast<Eigen::Index>(meta(0, 4));
  const auto n = static_cast<Eigen::Index>(meta(0, 0));
  const auto q = static_cast<Eigen::Index>(meta(0, 1));
  if (model.A_tilde.rows() != model.r || model.A_tilde.cols() != model.r ||
      model.B_tilde.rows() != model.r || model.B_tilde.cols() != q || model.U_r.rows() != n ||
      model.U_r.cols() != model.r) {
    throw InvalidArgument("model files in " + dir.string() + " disagree with meta.csv");
  }
  eigen_pairs(model.A_tilde, model.Lambda, model.W);
  return model;
}

}  // namespace dmdc
