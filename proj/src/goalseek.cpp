#include "whatif/goalseek.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "whatif/error.hpp"
#include "whatif/random.hpp"

namespace whatif {

Objective parse_objective(std::string_view text) {
  if (text == "maximize" || text == "max") return Objective::maximize;
  if (text == "minimize" || text == "min") return Objective::minimize;
  if (text == "target") return Objective::target;
  fail(ErrorKind::invalid_input, "invalid_objective", "unknown objective '" + std::string(text) + "'");
}

std::string_view to_string(Objective objective) noexcept {
  switch (objective) {
    case Objective::maximize: return "maximize";
    case Objective::minimize: return "minimize";
    case Objective::target: return "target";
  }
  return "maximize";
}

std::vector<DriverConstraint> resolve_constraints(const GoalSpec& spec, const AnalysisFrame& frame) {
  require(spec.budget >= spec.n_init + 1, "invalid_budget", "budget must exceed n_init");
  require(spec.n_init >= 1, "invalid_budget", "n_init must be at least 1");
  require(spec.candidates >= 1, "invalid_budget", "candidate count must be at least 1");
  if (spec.objective == Objective::target) {
    require(spec.target_value.has_value() && std::isfinite(*spec.target_value), "missing_target",
            "objective 'target' requires a finite target_value");
  } else {
    require(!spec.target_value.has_value(), "unexpected_target", "target_value is only allowed with objective 'target'");
  }
  for (const auto& [name, c] : spec.constraints) {
    require(frame.driver_index(name).has_value(), "unknown_driver", "'" + name + "' is not a driver of this model");
  }
  std::vector<DriverConstraint> out;
  for (std::size_t j = 0; j < frame.driver_count(); ++j) {
    const bool binary = frame.driver_kinds[j] == ColumnKind::binary;
    DriverConstraint c = binary ? DriverConstraint{PerturbationMode::absolute, -1.0, 1.0} : DriverConstraint{};
    if (const auto it = spec.constraints.find(frame.drivers[j]); it != spec.constraints.end()) c = it->second;
    require(std::isfinite(c.lo) && std::isfinite(c.hi), "invalid_constraint",
            "constraint bounds for '" + frame.drivers[j] + "' must be finite");
    require(c.lo <= c.hi, "infeasible_constraint",
            "infeasible constraint for '" + frame.drivers[j] + "': lo > hi");
    require(!binary || c.mode == PerturbationMode::absolute, "binary_percentage",
            "binary driver '" + frame.drivers[j] + "' accepts absolute constraints only");
    out.push_back(c);
  }
  return out;
}

namespace {

ObjectiveValue evaluate(const TrainedModel& model, const Matrix& rows, const std::vector<DriverConstraint>& box,
                        const std::vector<double>& p, const GoalSpec& spec) {
  const auto& frame = model.frame;
  require(p.size() == frame.driver_count(), "width_mismatch", "perturbation vector width mismatch");
  PerturbationSpec ps;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!(p[j] >= box[j].lo && p[j] <= box[j].hi)) {
      fail(ErrorKind::invalid_input, "constraint_violation",
           "perturbation for '" + frame.drivers[j] + "' lies outside its constraint");
    }
    ps.items.push_back({frame.drivers[j], box[j].mode, p[j]});
  }
  ObjectiveValue v;
  v.kpi = kpi_value(model, apply_perturbation(rows, frame, ps));
  switch (spec.objective) {
    case Objective::maximize: v.score = v.kpi; break;
    case Objective::minimize: v.score = -v.kpi; break;
    case Objective::target: v.score = -std::abs(v.kpi - *spec.target_value); break;
  }
  return v;
}

std::vector<double> to_box(const Eigen::Ref<const Eigen::VectorXd>& u, const std::vector<DriverConstraint>& box) {
  std::vector<double> p(box.size());
  for (std::size_t j = 0; j < box.size(); ++j) {
    const double raw = box[j].lo + u(static_cast<Eigen::Index>(j)) * (box[j].hi - box[j].lo);
    p[j] = std::clamp(raw, box[j].lo, box[j].hi);
  }
  return p;
}

}  // namespace

ObjectiveValue objective_eval(const TrainedModel& model, const Matrix& rows, const std::vector<double>& perturbation,
                              const GoalSpec& spec) {
  return evaluate(model, rows, resolve_constraints(spec, model.frame), perturbation, spec);
}

Matrix latin_hypercube(std::size_t n, std::size_t d, std::uint64_t seed) {
  Matrix u(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> strata(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    std::shuffle(strata.begin(), strata.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (static_cast<double>(strata[i]) + unit(rng)) / static_cast<double>(n);
    }
  }
  return u;
}

GoalResult optimize_goal(const TrainedModel& model, const Matrix& rows, const GoalSpec& spec,
                         const GoalRunOptions& run) {
  const auto box = resolve_constraints(spec, model.frame);
  const std::size_t d = box.size();

  GoalResult result;
  result.drivers = model.frame.drivers;
  result.constraints = box;
  result.confidence = model.confidence;
  result.baseline_kpi = kpi_value(model, rows);

  auto out_of_time = [&] { return run.deadline && std::chrono::steady_clock::now() >= *run.deadline; };

  Matrix evaluated_u(0, static_cast<Eigen::Index>(d));
  std::vector<double> scores;
  auto record = [&](const Eigen::Ref<const Eigen::VectorXd>& u) {
    auto p = to_box(u, box);
    const auto v = evaluate(model, rows, box, p, spec);
    evaluated_u.conservativeResize(evaluated_u.rows() + 1, Eigen::NoChange);
    evaluated_u.row(evaluated_u.rows() - 1) = u.transpose();
    scores.push_back(v.score);
    if (result.trace.empty() || v.score > result.trace[result.best_index].score) result.best_index = result.trace.size();
    result.trace.push_back({std::move(p), v.kpi, v.score});
  };

  const Matrix init = latin_hypercube(spec.n_init, d, derive_seed(spec.seed, "lhs"));
  for (Eigen::Index i = 0; i < init.rows(); ++i) {
    if (out_of_time()) {
      result.completed = false;
      break;
    }
    record(init.row(i).transpose());
  }

  std::mt19937_64 rng(derive_seed(spec.seed, "candidates"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix candidates(static_cast<Eigen::Index>(spec.candidates), static_cast<Eigen::Index>(d));
  while (result.completed && result.trace.size() < spec.budget) {
    if (out_of_time()) {
      result.completed = false;
      break;
    }
    const Vector y = Eigen::Map<const Vector>(scores.data(), static_cast<Eigen::Index>(scores.size()));
    const Surrogate gp = Surrogate::fit(evaluated_u, y);
    result.surrogate_jitter_escalated |= gp.jitter_escalated();
    const double best = gp.standardize(*std::max_element(scores.begin(), scores.end()));

    for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
      for (Eigen::Index j = 0; j < candidates.cols(); ++j) candidates(i, j) = unit(rng);
    }
    Eigen::Index pick = 0;
    double best_ei = -1.0;
    for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
      const auto post = gp.predict_standardized(candidates.row(i).transpose());
      const double ei = expected_improvement(post.mean, post.std, best);
      if (ei > best_ei) {
        best_ei = ei;
        pick = i;
      }
    }
    record(candidates.row(pick).transpose());
  }

  if (!result.trace.empty()) {
    const auto& best = result.trace[result.best_index];
    result.best_perturbation = best.perturbation;
    result.best_kpi = best.kpi;
  } else {
    result.best_perturbation.assign(d, 0.0);
    result.best_kpi = result.baseline_kpi;
  }
  result.uplift = result.best_kpi - result.baseline_kpi;
  return result;
}

}  // namespace whatif
