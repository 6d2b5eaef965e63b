#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "whatif/dataset.hpp"
#include "whatif/model.hpp"

namespace whatif {

struct ImportanceEntry {
  std::string driver;
  double importance = 0.0;  // in [-1, 1]
};

struct DriverVerification {
  std::string driver;
  double pearson = 0.0;
  double spearman = 0.0;
  double shapley = 0.0;           // performance units (R^2 or accuracy)
  bool correlation_defined = true;  // false when driver or KPI is constant
};

struct Agreement {
  double spearman_rank_agreement = 1.0;
  bool flagged = false;
};

struct ImportanceReport {
  std::vector<ImportanceEntry> entries;          // descending importance
  std::vector<DriverVerification> verification;  // frame driver order
  Agreement agreement;
  std::string shapley_neutralization;  // "retrain" or "impute"
};

enum class Neutralization { automatic, retrain, impute };

struct ShapleyOptions {
  std::size_t permutations = 20;
  std::uint64_t seed = 0;
  // Enumerate every driver order instead of sampling (at most 8 drivers).
  bool exact = false;
  Neutralization neutralization = Neutralization::automatic;
  // Upper bound on (coalitions x folds x trees x rows) before automatic mode
  // switches from per-coalition retraining to imputation against fold models.
  double retrain_work_budget = 2.0e7;
};

struct ShapleyResult {
  std::vector<double> values;  // frame driver order
  double score_all = 0.0;
  double score_none = 0.0;
  Neutralization neutralization = Neutralization::retrain;
  bool exact = false;
};

// Score with no drivers: majority-class accuracy (discrete) or 0 (continuous).
double empty_coalition_score(KpiKind kind, const Vector& y);

// CV score of a model retrained with every driver outside `included`
// replaced by its column mean. An empty coalition returns empty_coalition_score.
double coalition_score(const Matrix& x, const Vector& y, KpiKind kind, const Hyperparameters& hyper,
                       std::uint64_t seed, const std::vector<bool>& included);

// Shapley attribution of CV performance to drivers.
ShapleyResult shapley_performance(const Matrix& x, const Vector& y, const AnalysisFrame& frame,
                                  const Hyperparameters& hyper, const ShapleyOptions& options);

// Raw signed importances before normalisation: standardized coefficient for
// linear models; Gini decrease signed by Pearson(driver, KPI) for forests.
std::vector<double> raw_importances(const TrainedModel& model, const Matrix& x, const Vector& y);

Agreement verify_importances(const ImportanceReport& report);

ImportanceReport driver_importance(const TrainedModel& model, const Matrix& x, const Vector& y,
                                   const ShapleyOptions& options);
ImportanceReport driver_importance(const TrainedModel& model, const Dataset& dataset, const ShapleyOptions& options);

}  // namespace whatif
