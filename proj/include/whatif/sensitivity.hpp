#pragma once

#include <optional>
#include <string>
#include <vector>

#include "whatif/dataset.hpp"
#include "whatif/model.hpp"

namespace whatif {

enum class PerturbationMode { absolute, percentage };

PerturbationMode parse_perturbation_mode(std::string_view text);  // accepts abs/pct aliases
std::string_view to_string(PerturbationMode mode) noexcept;

struct PerturbationItem {
  std::string driver;
  PerturbationMode mode = PerturbationMode::absolute;
  double amount = 0.0;  // driver units (absolute) or percent (percentage)
};

struct PerturbationSpec {
  std::vector<PerturbationItem> items;
};

// Throws on unknown or repeated drivers, non-finite amounts, and
// percentage perturbations of binary drivers.
void validate(const PerturbationSpec& spec, const AnalysisFrame& frame);

// Value after perturbing one cell of driver `j`. Binary drivers snap to
// {0,1}; frame clamps apply last.
double perturb_value(double value, const AnalysisFrame& frame, std::size_t driver, PerturbationMode mode,
                     double amount);

// Uniform perturbation of every row. The input is not modified.
Matrix apply_perturbation(const Matrix& rows, const AnalysisFrame& frame, const PerturbationSpec& spec);

struct SensitivityResult {
  double baseline_kpi = 0.0;
  double perturbed_kpi = 0.0;
  double uplift = 0.0;

  static SensitivityResult from(double baseline, double perturbed) noexcept {
    return {baseline, perturbed, perturbed - baseline};
  }
};

SensitivityResult run_sensitivity(const TrainedModel& model, const Matrix& rows, const PerturbationSpec& spec);

struct CurvePoint {
  double amount = 0.0;
  double kpi = 0.0;
};

struct ComparisonCurve {
  std::string driver;
  std::vector<CurvePoint> points;  // amounts strictly increasing
};

struct SweepSpec {
  std::vector<std::string> drivers;  // empty means all frame drivers
  PerturbationMode mode = PerturbationMode::percentage;
  double lo = -50.0;
  double hi = 50.0;
  int steps = 11;
};

// amounts[k] = lo + k (hi - lo) / (steps - 1)
std::vector<double> sweep_amounts(double lo, double hi, int steps);

std::vector<ComparisonCurve> comparison_sweep(const TrainedModel& model, const Matrix& rows, const SweepSpec& sweep);

struct RowPrediction {
  double value = 0.0;           // prediction (continuous) or class-1 probability (discrete)
  std::optional<int> klass;     // discrete only
};

struct RowSensitivity {
  std::size_t row = 0;
  RowPrediction baseline;
  RowPrediction perturbed;
};

RowSensitivity row_sensitivity(const TrainedModel& model, const Matrix& rows, std::size_t row_index,
                               const PerturbationSpec& spec);

}  // namespace whatif
