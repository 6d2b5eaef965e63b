#include "whatif/gp.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>

#include "whatif/error.hpp"

namespace whatif {

double normal_pdf(double z) noexcept { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double matern52(double r, double length_scale) noexcept {
  const double s = std::sqrt(5.0) * r / length_scale;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double expected_improvement(double mean, double std, double best_so_far) noexcept {
  const double delta = mean - best_so_far;
  if (!(std > 0.0)) return std::max(delta, 0.0);
  const double z = delta / std;
  return std::max(delta * normal_cdf(z) + std * normal_pdf(z), 0.0);
}

Surrogate Surrogate::fit(const Matrix& inputs, const Vector& targets, const SurrogateSettings& settings) {
  require(inputs.rows() == targets.size(), "shape_mismatch", "surrogate inputs and targets differ in count");
  require(settings.length_scale > 0.0, "invalid_hyperparameter", "length scale must be positive");
  Surrogate gp;
  gp.settings_ = settings;
  gp.inputs_ = inputs;
  const auto n = inputs.rows();
  if (n == 0) return gp;

  gp.y_mean_ = targets.mean();
  if (n >= 2) {
    const double var = (targets.array() - gp.y_mean_).square().sum() / static_cast<double>(n - 1);
    gp.y_scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  const Vector y = (targets.array() - gp.y_mean_) / gp.y_scale_;

  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double r = (inputs.row(i) - inputs.row(j)).norm();
      k(i, j) = k(j, i) = matern52(r, settings.length_scale);
    }
  }
  // Duplicate or near-duplicate inputs leave the noise term as the only
  // thing holding the matrix together; raise it until the condition number
  // is at most 1 / noise_ratio.
  double jitter = settings.noise_ratio;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Matrix kj = k;
    kj.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(kj);
    if (llt.info() == Eigen::Success && llt.rcond() >= settings.noise_ratio) {
      gp.chol_l_ = llt.matrixL();
      gp.alpha_ = llt.solve(y);
      gp.jitter_ = jitter;
      return gp;
    }
    jitter *= 10.0;
    gp.jitter_escalated_ = true;
  }
  fail(ErrorKind::numerical, "surrogate_not_pd", "surrogate covariance is not positive definite");
}

Posterior Surrogate::predict_standardized(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const auto n = inputs_.rows();
  if (n == 0) return {0.0, 1.0};
  Vector kstar(n);
  for (Eigen::Index i = 0; i < n; ++i) kstar(i) = matern52((inputs_.row(i).transpose() - x).norm(), settings_.length_scale);
  const double mean = kstar.dot(alpha_);
  const Vector v = chol_l_.triangularView<Eigen::Lower>().solve(kstar);
  const double var = std::max(1.0 - v.squaredNorm(), 0.0);
  return {mean, std::sqrt(var)};
}

Posterior Surrogate::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const auto p = predict_standardized(x);
  return {p.mean * y_scale_ + y_mean_, p.std * y_scale_};
}

}  // namespace whatif
