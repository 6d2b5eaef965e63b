#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "whatif/gp.hpp"
#include "whatif/model.hpp"
#include "whatif/sensitivity.hpp"

namespace whatif {

enum class Objective { maximize, minimize, target };

Objective parse_objective(std::string_view text);  // also max/min
std::string_view to_string(Objective objective) noexcept;

// Bounds on a driver's perturbation amount (not on the resulting value).
struct DriverConstraint {
  PerturbationMode mode = PerturbationMode::percentage;
  double lo = -100.0;
  double hi = 100.0;
};

struct GoalSpec {
  Objective objective = Objective::maximize;
  std::optional<double> target_value;
  // Drivers not listed default to percentage [-100, 100]; binary drivers
  // default to absolute [-1, 1].
  std::map<std::string, DriverConstraint> constraints;
  std::size_t budget = 60;
  std::size_t n_init = 10;
  std::uint64_t seed = 0;
  std::size_t candidates = 1000;
};

// Constraints in frame driver order with defaults filled in; validates spec.
std::vector<DriverConstraint> resolve_constraints(const GoalSpec& spec, const AnalysisFrame& frame);

struct ObjectiveValue {
  double kpi = 0.0;    // raw KPI
  double score = 0.0;  // internal score, always maximised
};

ObjectiveValue objective_eval(const TrainedModel& model, const Matrix& rows, const std::vector<double>& perturbation,
                              const GoalSpec& spec);

struct TracePoint {
  std::vector<double> perturbation;  // frame driver order
  double kpi = 0.0;
  double score = 0.0;
};

struct GoalResult {
  std::vector<std::string> drivers;
  std::vector<DriverConstraint> constraints;
  std::vector<double> best_perturbation;
  double best_kpi = 0.0;
  double baseline_kpi = 0.0;
  double uplift = 0.0;
  double confidence = 0.0;
  std::size_t best_index = 0;
  std::vector<TracePoint> trace;
  bool completed = true;  // false when stopped by the deadline
  bool surrogate_jitter_escalated = false;
};

struct GoalRunOptions {
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

// Latin-hypercube initial design followed by GP/EI steps over the
// perturbation box. Deterministic in spec.seed.
GoalResult optimize_goal(const TrainedModel& model, const Matrix& rows, const GoalSpec& spec,
                         const GoalRunOptions& run = {});

// n points in [0,1]^d, one per stratum in every dimension.
Matrix latin_hypercube(std::size_t n, std::size_t d, std::uint64_t seed);

}  // namespace whatif
