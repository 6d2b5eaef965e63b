#include "whatif/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "whatif/error.hpp"

namespace whatif {

PerturbationMode parse_perturbation_mode(std::string_view text) {
  if (text == "absolute" || text == "abs") return PerturbationMode::absolute;
  if (text == "percentage" || text == "pct" || text == "percent") return PerturbationMode::percentage;
  fail(ErrorKind::invalid_input, "invalid_mode", "unknown perturbation mode '" + std::string(text) + "'");
}

std::string_view to_string(PerturbationMode mode) noexcept {
  return mode == PerturbationMode::percentage ? "percentage" : "absolute";
}

namespace {

std::size_t resolve_driver(const AnalysisFrame& frame, const std::string& driver) {
  const auto idx = frame.driver_index(driver);
  require(idx.has_value(), "unknown_driver", "'" + driver + "' is not a driver of this model");
  return *idx;
}

void check_item(const AnalysisFrame& frame, std::size_t j, PerturbationMode mode, double amount) {
  require(std::isfinite(amount), "invalid_amount", "perturbation amount for '" + frame.drivers[j] + "' is not finite");
  if (frame.driver_kinds[j] == ColumnKind::binary) {
    require(mode == PerturbationMode::absolute, "binary_percentage",
            "binary driver '" + frame.drivers[j] + "' accepts absolute perturbations only");
  }
}

}  // namespace

void validate(const PerturbationSpec& spec, const AnalysisFrame& frame) {
  std::set<std::string> seen;
  for (const auto& item : spec.items) {
    const auto j = resolve_driver(frame, item.driver);
    require(seen.insert(item.driver).second, "duplicate_driver", "driver '" + item.driver + "' perturbed twice");
    check_item(frame, j, item.mode, item.amount);
  }
}

double perturb_value(double value, const AnalysisFrame& frame, std::size_t driver, PerturbationMode mode,
                     double amount) {
  double out = mode == PerturbationMode::percentage ? value * (1.0 + amount / 100.0) : value + amount;
  if (frame.driver_kinds[driver] == ColumnKind::binary) out = out >= 0.5 ? 1.0 : 0.0;
  if (const auto it = frame.clamps.find(frame.drivers[driver]); it != frame.clamps.end()) {
    if (it->second.floor) out = std::max(out, *it->second.floor);
    if (it->second.ceiling) out = std::min(out, *it->second.ceiling);
  }
  return out;
}

Matrix apply_perturbation(const Matrix& rows, const AnalysisFrame& frame, const PerturbationSpec& spec) {
  validate(spec, frame);
  require(static_cast<std::size_t>(rows.cols()) == frame.driver_count(), "width_mismatch",
          "row width does not match the driver count");
  Matrix out = rows;
  for (const auto& item : spec.items) {
    const auto j = *frame.driver_index(item.driver);
    auto col = out.col(static_cast<Eigen::Index>(j));
    for (Eigen::Index i = 0; i < col.size(); ++i) col(i) = perturb_value(col(i), frame, j, item.mode, item.amount);
  }
  return out;
}

SensitivityResult run_sensitivity(const TrainedModel& model, const Matrix& rows, const PerturbationSpec& spec) {
  const double baseline = kpi_value(model, rows);
  const double perturbed = kpi_value(model, apply_perturbation(rows, model.frame, spec));
  return SensitivityResult::from(baseline, perturbed);
}

std::vector<double> sweep_amounts(double lo, double hi, int steps) {
  require(steps >= 2, "invalid_steps", "a sweep needs at least 2 steps");
  require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "invalid_range", "sweep range must satisfy lo < hi");
  std::vector<double> amounts(static_cast<std::size_t>(steps));
  const double width = hi - lo;
  for (int k = 0; k < steps; ++k) {
    amounts[static_cast<std::size_t>(k)] = lo + k * width / (steps - 1);
  }
  amounts.back() = hi;
  return amounts;
}

std::vector<ComparisonCurve> comparison_sweep(const TrainedModel& model, const Matrix& rows, const SweepSpec& sweep) {
  const auto amounts = sweep_amounts(sweep.lo, sweep.hi, sweep.steps);
  const auto& drivers = sweep.drivers.empty() ? model.frame.drivers : sweep.drivers;
  for (const auto& d : drivers) check_item(model.frame, resolve_driver(model.frame, d), sweep.mode, 0.0);

  std::vector<ComparisonCurve> curves;
  for (const auto& d : drivers) {
    ComparisonCurve curve{d, {}};
    for (double a : amounts) {
      const PerturbationSpec single{{PerturbationItem{d, sweep.mode, a}}};
      curve.points.push_back({a, run_sensitivity(model, rows, single).perturbed_kpi});
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

RowSensitivity row_sensitivity(const TrainedModel& model, const Matrix& rows, std::size_t row_index,
                               const PerturbationSpec& spec) {
  if (row_index >= static_cast<std::size_t>(rows.rows())) {
    fail(ErrorKind::not_found, "row_out_of_range",
         "row " + std::to_string(row_index) + " is out of range; the dataset has " + std::to_string(rows.rows()) + " rows");
  }
  const Matrix row = rows.row(static_cast<Eigen::Index>(row_index));
  const Matrix perturbed = apply_perturbation(row, model.frame, spec);
  const double before = predict(model, row)(0);
  const double after = predict(model, perturbed)(0);

  RowSensitivity out;
  out.row = row_index;
  out.baseline.value = before;
  out.perturbed.value = after;
  if (model.kind() == ModelKind::forest) {
    out.baseline.klass = predicted_class(before);
    out.perturbed.klass = predicted_class(after);
  }
  return out;
}

}  // namespace whatif
