#include <algorithm>

#include <Eigen/Cholesky>

#include "whatif/error.hpp"
#include "whatif/model.hpp"

namespace whatif {

LinearFit fit_linear(const Matrix& x, const Vector& y, double ridge_lambda) {
  require(x.rows() == y.size(), "shape_mismatch", "design matrix and response differ in row count");
  require(x.rows() > 0, "empty_rows", "cannot fit a linear model on zero rows");
  require(ridge_lambda >= 0.0, "invalid_hyperparameter", "ridge_lambda must be nonnegative");

  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Matrix xc = x.rowwise() - x_mean;
  const Vector yc = y.array() - y_mean;

  Matrix gram = xc.transpose() * xc;
  gram.diagonal().array() += ridge_lambda;
  const Vector rhs = xc.transpose() * yc;

  LinearFit fit;
  if (x.cols() == 0) {
    fit.intercept = y_mean;
    return fit;
  }
  const Eigen::LDLT<Matrix> ldlt(gram);
  const Vector pivots = ldlt.vectorD().cwiseAbs();
  const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
                        pivots.minCoeff() <= 1e-12 * std::max(pivots.maxCoeff(), 1.0) || ldlt.rcond() < 1e-14;
  if (singular && ridge_lambda == 0.0) {
    fail(ErrorKind::numerical, "singular_design", "design matrix is singular; use a positive ridge_lambda");
  }
  const Vector beta = ldlt.solve(rhs);
  fit.coefficients.assign(beta.data(), beta.data() + beta.size());
  fit.intercept = y_mean - x_mean.dot(beta);
  return fit;
}

}  // namespace whatif
