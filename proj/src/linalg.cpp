#include "pseudopanel/linalg.hpp"

#include <cmath>

#include "pseudopanel/error.hpp"

namespace pseudopanel::linalg {

LeastSquares least_squares(const MatrixXd& x, const VectorXd& y) {
  require(x.rows() == y.size(), "least_squares: row count mismatch");
  require(x.rows() >= x.cols(), "least_squares: fewer observations than columns");
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  qr.setThreshold(1e-12);
  if (qr.rank() < x.cols()) fail(ErrorKind::singular, "least_squares: design matrix is rank deficient");

  LeastSquares out;
  out.coef = qr.solve(y);
  out.residuals = y - x * out.coef;
  out.rss = out.residuals.squaredNorm();

  // (X'X)^-1 = P R^-1 R^-T P'
  const Index k = x.cols();
  MatrixXd r = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  MatrixXd rinv = r.template triangularView<Eigen::Upper>().solve(MatrixXd::Identity(k, k));
  MatrixXd inner = rinv * rinv.transpose();
  const auto& perm = qr.colsPermutation();
  out.xtx_inv = perm * inner * perm.transpose();
  out.xtx_inv = 0.5 * (out.xtx_inv + out.xtx_inv.transpose());
  return out;
}

std::vector<Index> collinear_columns(const MatrixXd& x, double rel_tol) {
  std::vector<Index> bad;
  std::vector<Index> kept;
  for (Index j = 0; j < x.cols(); ++j) {
    const double norm = x.col(j).norm();
    if (norm == 0.0) {
      bad.push_back(j);
      continue;
    }
    MatrixXd sub(x.rows(), static_cast<Index>(kept.size()) + 1);
    for (std::size_t c = 0; c < kept.size(); ++c) sub.col(static_cast<Index>(c)) = x.col(kept[c]) / x.col(kept[c]).norm();
    sub.col(sub.cols() - 1) = x.col(j) / norm;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(sub);
    qr.setThreshold(rel_tol);
    if (qr.rank() < sub.cols())
      bad.push_back(j);
    else
      kept.push_back(j);
  }
  return bad;
}

double spd_condition(const MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s, Eigen::EigenvaluesOnly);
  const VectorXd& ev = es.eigenvalues();
  if (ev.size() == 0) return 0.0;
  const double hi = ev.maxCoeff();
  const double lo = ev.minCoeff();
  if (!(hi > 0.0) || !(lo > 0.0)) return 0.0;
  return lo / hi;
}

double log_det_spd(const MatrixXd& s) {
  Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) fail(ErrorKind::singular, "log_det_spd: matrix is not positive definite");
  const auto& l = llt.matrixLLT();
  double acc = 0.0;
  for (Index i = 0; i < s.rows(); ++i) acc += std::log(l(i, i));
  return 2.0 * acc;
}

PsdInverse psd_pseudo_inverse(const MatrixXd& s, double rel_tol) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (s + s.transpose()));
  const VectorXd& ev = es.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  PsdInverse out;
  out.inverse = MatrixXd::Zero(s.rows(), s.cols());
  if (!(scale > 0.0)) return out;
  // Only the positive part: negative directions carry no information about a variance.
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > rel_tol * scale) {
      const VectorXd v = es.eigenvectors().col(i);
      out.inverse += (v * v.transpose()) / ev(i);
      ++out.rank;
    }
  }
  return out;
}

}  // namespace pseudopanel::linalg
