#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "whatif/dataset.hpp"

namespace whatif {

struct ForestParams {
  int n_trees = 100;
  int max_depth = 10;
  int min_leaf = 2;
  int max_features = 0;  // 0 means ceil(sqrt(driver count))
  bool bootstrap = true;
  bool operator==(const ForestParams&) const = default;
};

struct LinearParams {
  double ridge_lambda = 1e-8;
  bool operator==(const LinearParams&) const = default;
};

struct Hyperparameters {
  ForestParams forest;
  LinearParams linear;
  int cv_folds = 5;

  void validate() const;
  bool operator==(const Hyperparameters&) const = default;
};

// Intercept plus one coefficient per driver, in KPI units per driver unit.
struct LinearFit {
  double intercept = 0.0;
  std::vector<double> coefficients;
  bool operator==(const LinearFit&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;  // taken when x[feature] < threshold
  int right = -1;
  std::size_t samples = 0;           // training samples reaching the node
  double class1_probability = 0.0;   // fraction of class 1 among them

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict_probability(std::span<const double> row) const;
  bool operator==(const DecisionTree&) const = default;
};

struct Forest {
  std::vector<DecisionTree> trees;
  bool operator==(const Forest&) const = default;
};

enum class ModelKind { linear, forest };
std::string_view to_string(ModelKind kind) noexcept;

struct TrainedModel {
  AnalysisFrame frame;
  Hyperparameters hyper;
  std::uint64_t seed = 0;
  // Mean k-fold CV score: R^2 for linear, accuracy for forest.
  double confidence = 0.0;
  std::variant<LinearFit, Forest> fit;

  ModelKind kind() const noexcept { return std::holds_alternative<Forest>(fit) ? ModelKind::forest : ModelKind::linear; }
  const LinearFit& linear() const { return std::get<LinearFit>(fit); }
  const Forest& forest() const { return std::get<Forest>(fit); }
  bool operator==(const TrainedModel&) const = default;
};

// Ridge-stabilised least squares on the centred normal equations. The
// intercept is not penalised. Throws ErrorKind::numerical when the system is
// singular and ridge_lambda is 0.
LinearFit fit_linear(const Matrix& x, const Vector& y, double ridge_lambda);

// CART forest with Gini splits. Labels must be 0/1.
Forest fit_forest(const Matrix& x, const Vector& labels, const ForestParams& params, std::uint64_t seed);

// 1 - p0^2 - p1^2.
double gini(std::span<const int> labels);
double gini_from_probability(double p1) noexcept;

// Mean decrease in impurity per feature, weighted by node sample share and
// averaged over trees.
std::vector<double> gini_importance(const Forest& forest, std::size_t n_features);

struct CrossValidation {
  std::vector<double> fold_scores;
  double mean = 0.0;
};

// k-fold CV on shuffled rows (shuffle seeded from `seed`). Single-class
// training folds are tolerated.
CrossValidation cross_validate(const Matrix& x, const Vector& y, KpiKind kind, const Hyperparameters& hyper,
                               std::uint64_t seed);

// R^2 (continuous) or accuracy of thresholded probabilities (discrete).
double score_predictions(KpiKind kind, const Vector& truth, const Vector& predictions);

TrainedModel train(const Matrix& x, const Vector& y, const AnalysisFrame& frame, const Hyperparameters& hyper,
                   std::uint64_t seed);
TrainedModel train(const Dataset& dataset, const AnalysisFrame& frame, const Hyperparameters& hyper,
                   std::uint64_t seed);

// Linear: fitted value. Forest: class-1 probability (mean over trees).
Vector predict(const TrainedModel& model, const Matrix& rows);

inline int predicted_class(double probability) noexcept { return probability >= 0.5 ? 1 : 0; }

// Continuous: mean prediction. Discrete: 100 * share of rows predicted class 1.
double kpi_value(const TrainedModel& model, const Matrix& rows);

}  // namespace whatif
