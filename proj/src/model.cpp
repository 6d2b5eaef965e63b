#include <algorithm>
#include <numeric>
#include <random>

#include "whatif/error.hpp"
#include "whatif/model.hpp"
#include "whatif/random.hpp"

namespace whatif {

std::string_view to_string(ModelKind kind) noexcept { return kind == ModelKind::forest ? "forest" : "linear"; }

void Hyperparameters::validate() const {
  require(forest.n_trees >= 1, "invalid_hyperparameter", "n_trees must be at least 1");
  require(forest.max_depth >= 1, "invalid_hyperparameter", "max_depth must be at least 1");
  require(forest.min_leaf >= 1, "invalid_hyperparameter", "min_leaf must be at least 1");
  require(forest.max_features >= 0, "invalid_hyperparameter", "max_features must be nonnegative");
  require(linear.ridge_lambda >= 0.0, "invalid_hyperparameter", "ridge_lambda must be nonnegative");
  require(cv_folds >= 2, "invalid_hyperparameter", "cv_folds must be at least 2");
}

namespace {

Matrix take_rows(const Matrix& x, std::span<const Eigen::Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

Vector take(const Vector& y, std::span<const Eigen::Index> rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(rows[i]);
  return out;
}

Vector predict_linear(const LinearFit& fit, const Matrix& rows) {
  const Eigen::Map<const Vector> coef(fit.coefficients.data(), static_cast<Eigen::Index>(fit.coefficients.size()));
  Vector out = rows * coef;
  out.array() += fit.intercept;
  return out;
}

Vector predict_forest(const Forest& forest, const Matrix& rows) {
  Vector out = Vector::Zero(rows.rows());
  std::vector<double> row(static_cast<std::size_t>(rows.cols()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) row[static_cast<std::size_t>(j)] = rows(i, j);
    double sum = 0.0;
    for (const auto& tree : forest.trees) sum += tree.predict_probability(row);
    out(i) = sum / static_cast<double>(forest.trees.size());
  }
  return out;
}

}  // namespace

double score_predictions(KpiKind kind, const Vector& truth, const Vector& predictions) {
  require(truth.size() == predictions.size(), "shape_mismatch", "truth and predictions differ in length");
  if (truth.size() == 0) return 0.0;
  if (kind == KpiKind::discrete) {
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
      correct += predicted_class(predictions(i)) == static_cast<int>(truth(i)) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(truth.size());
  }
  const double ss_res = (truth - predictions).squaredNorm();
  const double ss_tot = (truth.array() - truth.mean()).matrix().squaredNorm();
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

CrossValidation cross_validate(const Matrix& x, const Vector& y, KpiKind kind, const Hyperparameters& hyper,
                               std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto k = static_cast<std::size_t>(hyper.cv_folds);
  require(n >= 2 * k, "too_few_rows", "need at least " + std::to_string(2 * k) + " rows for " + std::to_string(k) +
                                          "-fold cross-validation");
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(derive_seed(seed, "cv-folds"));
  std::shuffle(order.begin(), order.end(), rng);

  CrossValidation cv;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t lo = f * n / k;
    const std::size_t hi = (f + 1) * n / k;
    std::vector<Eigen::Index> test(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                   order.begin() + static_cast<std::ptrdiff_t>(hi));
    std::vector<Eigen::Index> fit_rows;
    fit_rows.reserve(n - test.size());
    fit_rows.insert(fit_rows.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(lo));
    fit_rows.insert(fit_rows.end(), order.begin() + static_cast<std::ptrdiff_t>(hi), order.end());

    const Matrix x_fit = take_rows(x, fit_rows);
    const Vector y_fit = take(y, fit_rows);
    const Matrix x_test = take_rows(x, test);
    const Vector y_test = take(y, test);
    Vector pred;
    if (kind == KpiKind::continuous) {
      pred = predict_linear(fit_linear(x_fit, y_fit, hyper.linear.ridge_lambda), x_test);
    } else {
      pred = predict_forest(fit_forest(x_fit, y_fit, hyper.forest, derive_seed(derive_seed(seed, "cv-model"), f)),
                            x_test);
    }
    cv.fold_scores.push_back(score_predictions(kind, y_test, pred));
  }
  cv.mean = std::accumulate(cv.fold_scores.begin(), cv.fold_scores.end(), 0.0) / static_cast<double>(k);
  return cv;
}

TrainedModel train(const Matrix& x, const Vector& y, const AnalysisFrame& frame, const Hyperparameters& hyper,
                   std::uint64_t seed) {
  hyper.validate();
  require(!frame.drivers.empty(), "no_drivers", "frame has no drivers");
  require(static_cast<std::size_t>(x.cols()) == frame.driver_count(), "width_mismatch",
          "design matrix width does not match the driver count");
  require(x.rows() == y.size(), "shape_mismatch", "design matrix and KPI differ in row count");
  require(x.rows() >= 2 * hyper.cv_folds, "too_few_rows",
          "need at least " + std::to_string(2 * hyper.cv_folds) + " rows to train with " +
              std::to_string(hyper.cv_folds) + "-fold cross-validation");

  TrainedModel model;
  model.frame = frame;
  model.hyper = hyper;
  model.seed = seed;
  if (frame.kpi_kind == KpiKind::discrete) {
    Eigen::Index ones = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      require(y(i) == 0.0 || y(i) == 1.0, "non_binary_kpi", "discrete KPI values must be 0 or 1");
      ones += y(i) == 1.0 ? 1 : 0;
    }
    if (ones == 0 || ones == y.size()) {
      fail(ErrorKind::conflict, "single_class_kpi", "KPI '" + frame.kpi + "' has a single class; both 0 and 1 are required");
    }
    model.fit = fit_forest(x, y, hyper.forest, seed);
  } else {
    if ((y.array() == y(0)).all()) {
      fail(ErrorKind::conflict, "constant_kpi", "KPI '" + frame.kpi + "' is constant; there is nothing to model");
    }
    model.fit = fit_linear(x, y, hyper.linear.ridge_lambda);
  }
  model.confidence = cross_validate(x, y, frame.kpi_kind, hyper, seed).mean;
  return model;
}

TrainedModel train(const Dataset& dataset, const AnalysisFrame& frame, const Hyperparameters& hyper,
                   std::uint64_t seed) {
  return train(driver_matrix(dataset, frame), kpi_vector(dataset, frame), frame, hyper, seed);
}

Vector predict(const TrainedModel& model, const Matrix& rows) {
  if (rows.rows() == 0) return Vector(0);
  require(static_cast<std::size_t>(rows.cols()) == model.frame.driver_count(), "width_mismatch",
          "row width " + std::to_string(rows.cols()) + " does not match driver count " +
              std::to_string(model.frame.driver_count()));
  if (model.kind() == ModelKind::forest) return predict_forest(model.forest(), rows);
  return predict_linear(model.linear(), rows);
}

double kpi_value(const TrainedModel& model, const Matrix& rows) {
  require(rows.rows() > 0, "empty_rows", "KPI value needs at least one row");
  const Vector p = predict(model, rows);
  if (model.kind() == ModelKind::forest) {
    Eigen::Index positive = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) positive += predicted_class(p(i));
    return 100.0 * static_cast<double>(positive) / static_cast<double>(p.size());
  }
  return p.mean();
}

}  // namespace whatif
