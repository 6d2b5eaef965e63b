#pragma once

#include <string>

#include <json.hpp>

#include "whatif/dataset.hpp"
#include "whatif/goalseek.hpp"
#include "whatif/importance.hpp"
#include "whatif/model.hpp"
#include "whatif/sensitivity.hpp"
#include "whatif/synthetic.hpp"

namespace whatif {

using json = nlohmann::json;

// Two-decimal display form; `signed_form` prefixes positive values with '+'.
std::string render_fixed2(double value, bool signed_form = false);
// "up", "down" or "neutral" according to the rendered uplift.
std::string uplift_direction(double uplift);

// Throws ErrorKind::numerical if any number in `value` is NaN or infinite.
void ensure_finite(const json& value);

json dataset_summary(const Dataset& dataset);
json column_schema_json(const ColumnSchema& column);

void to_json(json& j, const AnalysisFrame& frame);
void from_json(const json& j, AnalysisFrame& frame);

void to_json(json& j, const Hyperparameters& hyper);
// Missing keys keep their defaults.
void from_json(const json& j, Hyperparameters& hyper);

json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const json& j);

json importance_json(const ImportanceReport& report);
ImportanceReport importance_from_json(const json& j);

PerturbationSpec perturbation_spec_from_json(const json& j);
json perturbation_spec_json(const PerturbationSpec& spec);
json sensitivity_json(const SensitivityResult& result);

SweepSpec sweep_spec_from_json(const json& j);
json comparison_json(const SweepSpec& sweep, double baseline_kpi, const std::vector<ComparisonCurve>& curves);

json row_sensitivity_json(const RowSensitivity& result);

GoalSpec goal_spec_from_json(const json& j);
json goal_spec_json(const GoalSpec& spec);
json goal_result_json(const GoalSpec& spec, const GoalResult& result);

json ground_truth_json(const GroundTruth& truth);

}  // namespace whatif
