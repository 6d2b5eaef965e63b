#include <cmath>
#include <numbers>

#include "support.hpp"
#include "whatif/gp.hpp"

namespace whatif {
namespace {

// Phi(z) = 1/2 + phi(z) * sum z^(2n+1) / (1*3*5*...*(2n+1))
double series_cdf(double z) {
  double term = z, sum = z;
  for (int n = 1; n < 500; ++n) {
    term *= z * z / (2 * n + 1);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return 0.5 + sum * std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi);
}

TEST(Normal, CrossChecks) {
  EXPECT_NEAR(normal_pdf(0), 0.3989422804014327, 1e-15);
  for (double z = -6; z <= 6; z += 0.25) {
    EXPECT_NEAR(normal_cdf(z), series_cdf(z), 1e-10) << z;
    EXPECT_NEAR(normal_cdf(z), 0.5 * (1 + std::erf(z / std::sqrt(2.0))), 1e-10) << z;
    EXPECT_NEAR(normal_pdf(z), std::exp(-z * z / 2) / std::sqrt(2 * std::numbers::pi), 1e-15);
  }
}

TEST(ExpectedImprovement, ClosedForms) {
  EXPECT_EQ(expected_improvement(1.0, 0.0, 2.0), 0.0);
  EXPECT_EQ(expected_improvement(2.0, 0.0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(expected_improvement(3.0, 0.0, 2.0), 1.0);
  for (double s : {0.1, 1.0, 2.5}) EXPECT_NEAR(expected_improvement(4.0, s, 4.0), s * 0.3989, 1e-4 * s + 1e-12);
}

TEST(ExpectedImprovement, NonNegativeAndMonotone) {
  for (double best = -2; best <= 2; best += 1) {
    double previous_mean = -1;
    for (double mean = -5; mean <= 5; mean += 0.1) {
      double previous_std = -1;
      for (double s = 0; s <= 3; s += 0.1) {
        const double ei = expected_improvement(mean, s, best);
        EXPECT_GE(ei, 0.0);
        if (mean <= best) EXPECT_GE(ei, previous_std - 1e-15);
        previous_std = ei;
      }
      const double ei = expected_improvement(mean, 0.7, best);
      EXPECT_GE(ei, previous_mean - 1e-15);
      previous_mean = ei;
    }
  }
}

TEST(Matern, Shape) {
  EXPECT_EQ(matern52(0, 0.3), 1.0);
  double previous = 1.0;
  for (double r = 0.05; r < 2; r += 0.05) {
    const double k = matern52(r, 0.3);
    EXPECT_LT(k, previous);
    EXPECT_GT(k, 0.0);
    previous = k;
  }
  const double t = std::sqrt(5.0) * 0.3 / 0.3;
  EXPECT_NEAR(matern52(0.3, 0.3), (1 + t + t * t / 3) * std::exp(-t), 1e-15);
}

TEST(Surrogate, InterpolatesTrainingPoints) {
  Matrix x(6, 2);
  x << 0.1, 0.2, 0.9, 0.4, 0.5, 0.5, 0.3, 0.8, 0.7, 0.1, 0.0, 1.0;
  Vector y(6);
  y << 3, -1, 4, 1, 5, -9;
  const auto gp = Surrogate::fit(x, y);
  const double range = y.maxCoeff() - y.minCoeff();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto post = gp.predict(x.row(i).transpose());
    EXPECT_NEAR(post.mean, y(i), 1e-4 * range);
    EXPECT_LT(post.std, 0.05 * range);
  }
  EXPECT_FALSE(gp.jitter_escalated());
}

TEST(Surrogate, PriorWithoutData) {
  const auto gp = Surrogate::fit(Matrix(0, 2), Vector(0));
  Eigen::VectorXd q(2);
  q << 0.4, 0.6;
  const auto post = gp.predict_standardized(q);
  EXPECT_EQ(post.mean, 0.0);
  EXPECT_DOUBLE_EQ(post.std, 1.0);
}

TEST(Surrogate, SineAgainstDenseComputation) {
  const int n = 8;
  Matrix x(n, 1);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = i / 7.0;
    y(i) = std::sin(2 * std::numbers::pi * x(i, 0));
  }
  const auto gp = Surrogate::fit(x, y);
  // Dense oracle: standardize, build K + noise, solve with full-pivot LU.
  const double mu = y.mean();
  const double sd = std::sqrt((y.array() - mu).square().sum() / (n - 1));
  const Vector z = (y.array() - mu) / sd;
  auto k = [](double a, double b) {
    const double t = std::sqrt(5.0) * std::abs(a - b) / 0.3;
    return (1 + t + t * t / 3) * std::exp(-t);
  };
  Matrix kxx(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) kxx(i, j) = k(x(i, 0), x(j, 0)) + (i == j ? 1e-6 : 0.0);
  }
  const Vector alpha = kxx.fullPivLu().solve(z);
  for (double q = 0.03; q < 1.0; q += 1.0 / 7.0) {
    Vector kq(n);
    for (int i = 0; i < n; ++i) kq(i) = k(q, x(i, 0));
    const double oracle = mu + sd * kq.dot(alpha);
    const auto post = gp.predict(Eigen::VectorXd::Constant(1, q));
    EXPECT_NEAR(post.mean, oracle, 1e-6);
    EXPECT_NEAR(post.mean, std::sin(2 * std::numbers::pi * q), 0.2) << q;
  }
}

TEST(Surrogate, DuplicateInputsEscalateJitter) {
  Matrix x = Matrix::Constant(4, 2, 0.5);
  Vector y(4);
  y << 1, 2, 3, 4;
  const auto gp = Surrogate::fit(x, y);
  EXPECT_TRUE(gp.jitter_escalated());
  const auto post = gp.predict(Eigen::VectorXd::Constant(2, 0.5));
  EXPECT_TRUE(std::isfinite(post.mean));
  EXPECT_NEAR(post.mean, 2.5, 0.1);
}

}  // namespace
}  // namespace whatif
