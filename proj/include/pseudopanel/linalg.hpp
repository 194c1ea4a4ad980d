#pragma once

#include <Eigen/Dense>
#include <vector>

namespace pseudopanel::linalg {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LeastSquares {
  VectorXd coef;
  MatrixXd xtx_inv;  // (X'X)^-1
  VectorXd residuals;
  double rss = 0.0;
};

// QR-based least squares. Throws ErrorKind::singular when X lacks full column rank.
LeastSquares least_squares(const MatrixXd& x, const VectorXd& y);

// Columns that add nothing to the span of the columns before them.
std::vector<Index> collinear_columns(const MatrixXd& x, double rel_tol = 1e-10);

// Smallest over largest eigenvalue of a symmetric matrix, or 0 when it is not PSD.
double spd_condition(const MatrixXd& s);

// log det of a symmetric positive definite matrix; throws ErrorKind::singular otherwise.
double log_det_spd(const MatrixXd& s);

struct PsdInverse {
  MatrixXd inverse;
  Index rank = 0;
};

// Pseudo-inverse restricted to eigenvalues above rel_tol * max|eigenvalue|.
PsdInverse psd_pseudo_inverse(const MatrixXd& s, double rel_tol = 1e-10);

}  // namespace pseudopanel::linalg
