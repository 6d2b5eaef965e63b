#pragma once

#include "whatif/dataset.hpp"

namespace whatif {

double normal_pdf(double z) noexcept;
double normal_cdf(double z) noexcept;

// Matern 5/2 correlation at distance r (unit amplitude).
double matern52(double r, double length_scale) noexcept;

// EI for maximisation: (mean - best) Phi(z) + std phi(z), z = (mean - best)/std.
// std == 0 gives max(mean - best, 0).
double expected_improvement(double mean, double std, double best_so_far) noexcept;

struct SurrogateSettings {
  double length_scale = 0.3;  // on the unit cube
  double noise_ratio = 1e-6;  // noise variance / signal variance
};

struct Posterior {
  double mean = 0.0;
  double std = 0.0;
};

// Exact GP regression with fixed hyperparameters. Targets are standardized
// internally, so the prior has mean 0 and amplitude equal to the sample std
// of the observations (1 when there are fewer than two).
class Surrogate {
 public:
  static Surrogate fit(const Matrix& inputs, const Vector& targets, const SurrogateSettings& settings = {});

  Posterior predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  // Posterior in standardized target units.
  Posterior predict_standardized(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double standardize(double y) const noexcept { return (y - y_mean_) / y_scale_; }

  std::size_t size() const noexcept { return static_cast<std::size_t>(inputs_.rows()); }
  // True when the noise jitter had to be raised to factor the kernel matrix
  // with a condition number of at most 1 / noise_ratio.
  bool jitter_escalated() const noexcept { return jitter_escalated_; }
  double jitter() const noexcept { return jitter_; }

 private:
  Matrix inputs_;
  Vector alpha_;
  Matrix chol_l_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  double jitter_ = 0.0;
  bool jitter_escalated_ = false;
  SurrogateSettings settings_;
};

}  // namespace whatif
