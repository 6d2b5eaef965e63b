#include "whatif/json_io.hpp"

#include <cmath>
#include <cstdio>

#include "whatif/error.hpp"

namespace whatif {

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object()) return fallback;
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::invalid_input, "invalid_field", std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T get_required(const json& j, const char* key) {
  require(j.is_object(), "invalid_body", "expected a JSON object");
  const auto it = j.find(key);
  require(it != j.end() && !it->is_null(), "missing_field", std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::invalid_input, "invalid_field", std::string("field '") + key + "' has the wrong type");
  }
}

ColumnKind column_kind_from(const std::string& s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "binary") return ColumnKind::binary;
  if (s == "categorical-text") return ColumnKind::categorical_text;
  fail(ErrorKind::invalid_input, "invalid_field", "unknown column kind '" + s + "'");
}

std::size_t non_negative(const json& j, const char* key, std::size_t fallback) {
  const auto v = get_or<long long>(j, key, static_cast<long long>(fallback));
  require(v >= 0, "invalid_field", std::string("field '") + key + "' must be nonnegative");
  return static_cast<std::size_t>(v);
}

json rendered_kpis(double baseline, double value, double uplift, const char* value_key) {
  return json{{"baseline_kpi", render_fixed2(baseline)},
              {value_key, render_fixed2(value)},
              {"uplift", render_fixed2(uplift, true)},
              {"direction", uplift_direction(uplift)}};
}

}  // namespace

std::string render_fixed2(double value, bool signed_form) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  std::string s(buf);
  if (s == "-0.00") s = "0.00";
  if (signed_form && s != "0.00" && s.front() != '-') s.insert(s.begin(), '+');
  return s;
}

std::string uplift_direction(double uplift) {
  const auto s = render_fixed2(uplift);
  if (s == "0.00") return "neutral";
  return s.front() == '-' ? "down" : "up";
}

void ensure_finite(const json& value) {
  if (value.is_number_float() && !std::isfinite(value.get<double>())) {
    fail(ErrorKind::numerical, "non_finite", "result contains a non-finite number");
  }
  if (value.is_structured()) {
    for (const auto& child : value) ensure_finite(child);
  }
}

json column_schema_json(const ColumnSchema& column) {
  json j{{"name", column.name}, {"kind", to_string(column.kind)}};
  if (column.stats) {
    j["stats"] = {{"min", column.stats->min},
                  {"max", column.stats->max},
                  {"mean", column.stats->mean},
                  {"std", column.stats->std},
                  {"distinct_count", column.stats->distinct_count}};
  }
  return j;
}

json dataset_summary(const Dataset& dataset) {
  json schema = json::array();
  for (const auto& c : dataset.columns()) schema.push_back(column_schema_json(c));
  return json{{"dataset_id", dataset.id()},
              {"schema", schema},
              {"row_count", dataset.row_count()},
              {"dropped_rows", dataset.dropped_rows()}};
}

void to_json(json& j, const AnalysisFrame& frame) {
  json kinds = json::array();
  for (auto k : frame.driver_kinds) kinds.push_back(to_string(k));
  j = json{{"dataset_id", frame.dataset_id},
           {"kpi", frame.kpi},
           {"kpi_kind", to_string(frame.kpi_kind)},
           {"drivers", frame.drivers},
           {"driver_kinds", kinds}};
  if (!frame.clamps.empty()) {
    json clamps = json::object();
    for (const auto& [name, c] : frame.clamps) {
      json cj = json::object();
      if (c.floor) cj["floor"] = *c.floor;
      if (c.ceiling) cj["ceiling"] = *c.ceiling;
      clamps[name] = cj;
    }
    j["clamps"] = clamps;
  }
}

void from_json(const json& j, AnalysisFrame& frame) {
  frame.dataset_id = get_or<std::string>(j, "dataset_id", "");
  frame.kpi = get_required<std::string>(j, "kpi");
  const auto kind = get_required<std::string>(j, "kpi_kind");
  require(kind == "continuous" || kind == "discrete", "invalid_field", "kpi_kind must be continuous or discrete");
  frame.kpi_kind = kind == "discrete" ? KpiKind::discrete : KpiKind::continuous;
  frame.drivers = get_required<std::vector<std::string>>(j, "drivers");
  frame.driver_kinds.clear();
  for (const auto& k : get_required<std::vector<std::string>>(j, "driver_kinds")) {
    frame.driver_kinds.push_back(column_kind_from(k));
  }
  require(frame.driver_kinds.size() == frame.drivers.size(), "invalid_field", "driver_kinds length mismatch");
  frame.clamps.clear();
  if (j.contains("clamps")) {
    for (const auto& [name, cj] : j.at("clamps").items()) {
      ValueClamp c;
      if (cj.contains("floor")) c.floor = cj.at("floor").get<double>();
      if (cj.contains("ceiling")) c.ceiling = cj.at("ceiling").get<double>();
      frame.clamps[name] = c;
    }
  }
}

void to_json(json& j, const Hyperparameters& hyper) {
  j = json{{"forest",
            {{"n_trees", hyper.forest.n_trees},
             {"max_depth", hyper.forest.max_depth},
             {"min_leaf", hyper.forest.min_leaf},
             {"max_features", hyper.forest.max_features},
             {"bootstrap", hyper.forest.bootstrap}}},
           {"linear", {{"ridge_lambda", hyper.linear.ridge_lambda}}},
           {"cv_folds", hyper.cv_folds}};
}

void from_json(const json& j, Hyperparameters& hyper) {
  if (j.is_null()) return;
  require(j.is_object(), "invalid_field", "hyper must be an object");
  if (const auto it = j.find("forest"); it != j.end()) {
    auto& f = hyper.forest;
    f.n_trees = get_or<int>(*it, "n_trees", f.n_trees);
    f.max_depth = get_or<int>(*it, "max_depth", f.max_depth);
    f.min_leaf = get_or<int>(*it, "min_leaf", f.min_leaf);
    f.max_features = get_or<int>(*it, "max_features", f.max_features);
    f.bootstrap = get_or<bool>(*it, "bootstrap", f.bootstrap);
  }
  if (const auto it = j.find("linear"); it != j.end()) {
    hyper.linear.ridge_lambda = get_or<double>(*it, "ridge_lambda", hyper.linear.ridge_lambda);
  }
  hyper.cv_folds = get_or<int>(j, "cv_folds", hyper.cv_folds);
  hyper.validate();
}

json model_to_json(const TrainedModel& model) {
  json params;
  if (model.kind() == ModelKind::linear) {
    params = {{"intercept", model.linear().intercept}, {"coefficients", model.linear().coefficients}};
  } else {
    json trees = json::array();
    for (const auto& tree : model.forest().trees) {
      json nodes = json::array();
      for (const auto& n : tree.nodes) {
        nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.samples, n.class1_probability}));
      }
      trees.push_back(json{{"nodes", nodes}});
    }
    params = {{"trees", trees}};
  }
  return json{{"format", "whatif-model/1"},
              {"kind", to_string(model.kind())},
              {"frame", model.frame},
              {"hyper", model.hyper},
              {"seed", model.seed},
              {"confidence", model.confidence},
              {"parameters", params}};
}

TrainedModel model_from_json(const json& j) {
  require(j.is_object(), "invalid_model", "model JSON must be an object");
  require(get_or<std::string>(j, "format", "") == "whatif-model/1", "invalid_model", "unsupported model format");
  TrainedModel model;
  try {
    model.frame = j.at("frame").get<AnalysisFrame>();
    model.hyper = j.at("hyper").get<Hyperparameters>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.confidence = j.at("confidence").get<double>();
    const auto kind = j.at("kind").get<std::string>();
    const auto& params = j.at("parameters");
    const auto d = model.frame.driver_count();
    if (kind == "linear") {
      LinearFit fit;
      fit.intercept = params.at("intercept").get<double>();
      fit.coefficients = params.at("coefficients").get<std::vector<double>>();
      require(fit.coefficients.size() == d, "invalid_model", "coefficient count does not match drivers");
      model.fit = std::move(fit);
    } else if (kind == "forest") {
      Forest forest;
      for (const auto& tj : params.at("trees")) {
        DecisionTree tree;
        for (const auto& nj : tj.at("nodes")) {
          TreeNode n;
          n.feature = nj.at(0).get<int>();
          n.threshold = nj.at(1).get<double>();
          n.left = nj.at(2).get<int>();
          n.right = nj.at(3).get<int>();
          n.samples = nj.at(4).get<std::size_t>();
          n.class1_probability = nj.at(5).get<double>();
          tree.nodes.push_back(n);
        }
        const auto count = static_cast<int>(tree.nodes.size());
        require(count > 0, "invalid_model", "empty tree");
        for (const auto& n : tree.nodes) {
          if (n.is_leaf()) continue;
          require(n.feature < static_cast<int>(d) && n.left > 0 && n.left < count && n.right > 0 && n.right < count,
                  "invalid_model", "tree node references are out of range");
        }
        forest.trees.push_back(std::move(tree));
      }
      require(!forest.trees.empty(), "invalid_model", "forest has no trees");
      model.fit = std::move(forest);
    } else {
      fail(ErrorKind::invalid_input, "invalid_model", "unknown model kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_input, "invalid_model", std::string("malformed model JSON: ") + e.what());
  }
  return model;
}

json importance_json(const ImportanceReport& report) {
  json entries = json::array();
  for (const auto& e : report.entries) entries.push_back({{"driver", e.driver}, {"importance", e.importance}});
  json verification = json::array();
  for (const auto& v : report.verification) {
    verification.push_back({{"driver", v.driver},
                            {"pearson", v.pearson},
                            {"spearman", v.spearman},
                            {"shapley", v.shapley},
                            {"correlation_defined", v.correlation_defined}});
  }
  return json{{"entries", entries},
              {"verification", verification},
              {"agreement",
               {{"spearman_rank_agreement", report.agreement.spearman_rank_agreement},
                {"flagged", report.agreement.flagged}}},
              {"shapley_neutralization", report.shapley_neutralization}};
}

ImportanceReport importance_from_json(const json& j) {
  ImportanceReport r;
  for (const auto& e : j.at("entries")) r.entries.push_back({e.at("driver"), e.at("importance")});
  for (const auto& v : j.at("verification")) {
    r.verification.push_back({v.at("driver"), v.at("pearson"), v.at("spearman"), v.at("shapley"),
                              v.value("correlation_defined", true)});
  }
  r.agreement.spearman_rank_agreement = j.at("agreement").at("spearman_rank_agreement");
  r.agreement.flagged = j.at("agreement").at("flagged");
  r.shapley_neutralization = j.value("shapley_neutralization", "");
  return r;
}

PerturbationSpec perturbation_spec_from_json(const json& j) {
  PerturbationSpec spec;
  if (j.is_null()) return spec;
  const json* items = &j;
  if (j.is_object()) {
    const auto it = j.find("items");
    if (it == j.end()) return spec;
    items = &*it;
  }
  require(items->is_array(), "invalid_body", "perturbation items must be an array");
  for (const auto& ij : *items) {
    PerturbationItem item;
    item.driver = get_required<std::string>(ij, "driver");
    item.mode = parse_perturbation_mode(get_or<std::string>(ij, "mode", "absolute"));
    item.amount = get_required<double>(ij, "amount");
    spec.items.push_back(std::move(item));
  }
  return spec;
}

json perturbation_spec_json(const PerturbationSpec& spec) {
  json items = json::array();
  for (const auto& i : spec.items) items.push_back({{"driver", i.driver}, {"mode", to_string(i.mode)}, {"amount", i.amount}});
  return json{{"items", items}};
}

json sensitivity_json(const SensitivityResult& r) {
  return json{{"baseline_kpi", r.baseline_kpi},
              {"perturbed_kpi", r.perturbed_kpi},
              {"uplift", r.uplift},
              {"rendered", rendered_kpis(r.baseline_kpi, r.perturbed_kpi, r.uplift, "perturbed_kpi")}};
}

SweepSpec sweep_spec_from_json(const json& j) {
  SweepSpec s;
  require(j.is_object(), "invalid_body", "expected a JSON object");
  s.drivers = get_or<std::vector<std::string>>(j, "drivers", {});
  s.mode = parse_perturbation_mode(get_or<std::string>(j, "mode", "percentage"));
  s.lo = get_required<double>(j, "lo");
  s.hi = get_required<double>(j, "hi");
  s.steps = get_or<int>(j, "steps", 11);
  return s;
}

json comparison_json(const SweepSpec& sweep, double baseline_kpi, const std::vector<ComparisonCurve>& curves) {
  json cj = json::array();
  for (const auto& c : curves) {
    json points = json::array();
    for (const auto& p : c.points) points.push_back({{"amount", p.amount}, {"kpi", p.kpi}});
    cj.push_back({{"driver", c.driver}, {"points", points}});
  }
  return json{{"mode", to_string(sweep.mode)},
              {"lo", sweep.lo},
              {"hi", sweep.hi},
              {"steps", sweep.steps},
              {"baseline_kpi", baseline_kpi},
              {"curves", cj}};
}

json row_sensitivity_json(const RowSensitivity& r) {
  json j{{"row", r.row},
         {"baseline_prediction", r.baseline.value},
         {"perturbed_prediction", r.perturbed.value},
         {"change", r.perturbed.value - r.baseline.value}};
  if (r.baseline.klass) j["baseline_class"] = *r.baseline.klass;
  if (r.perturbed.klass) j["perturbed_class"] = *r.perturbed.klass;
  return j;
}

namespace {

DriverConstraint constraint_from_json(const json& cj) {
  DriverConstraint c;
  c.mode = parse_perturbation_mode(get_or<std::string>(cj, "mode", "percentage"));
  c.lo = get_required<double>(cj, "lo");
  c.hi = get_required<double>(cj, "hi");
  return c;
}

}  // namespace

GoalSpec goal_spec_from_json(const json& j) {
  require(j.is_object(), "invalid_body", "expected a JSON object");
  GoalSpec spec;
  spec.objective = parse_objective(get_or<std::string>(j, "objective", "maximize"));
  if (j.contains("target_value") && !j.at("target_value").is_null()) spec.target_value = get_required<double>(j, "target_value");
  if (const auto it = j.find("constraints"); it != j.end() && !it->is_null()) {
    if (it->is_array()) {
      for (const auto& cj : *it) {
        const auto name = get_required<std::string>(cj, "driver");
        require(!spec.constraints.contains(name), "duplicate_driver", "driver '" + name + "' constrained twice");
        spec.constraints[name] = constraint_from_json(cj);
      }
    } else {
      require(it->is_object(), "invalid_field", "constraints must be an array or object");
      for (const auto& [name, cj] : it->items()) spec.constraints[name] = constraint_from_json(cj);
    }
  }
  spec.budget = non_negative(j, "budget", spec.budget);
  spec.n_init = non_negative(j, "n_init", spec.n_init);
  spec.seed = get_or<std::uint64_t>(j, "seed", spec.seed);
  return spec;
}

json goal_spec_json(const GoalSpec& spec) {
  json constraints = json::array();
  for (const auto& [name, c] : spec.constraints) {
    constraints.push_back({{"driver", name}, {"mode", to_string(c.mode)}, {"lo", c.lo}, {"hi", c.hi}});
  }
  json j{{"objective", to_string(spec.objective)},
         {"constraints", constraints},
         {"budget", spec.budget},
         {"n_init", spec.n_init},
         {"seed", spec.seed}};
  if (spec.target_value) j["target_value"] = *spec.target_value;
  return j;
}

json goal_result_json(const GoalSpec& spec, const GoalResult& r) {
  json best = json::array();
  for (std::size_t k = 0; k < r.drivers.size(); ++k) {
    best.push_back({{"driver", r.drivers[k]},
                    {"mode", to_string(r.constraints[k].mode)},
                    {"amount", r.best_perturbation[k]},
                    {"lo", r.constraints[k].lo},
                    {"hi", r.constraints[k].hi}});
  }
  json trace = json::array();
  for (const auto& t : r.trace) trace.push_back({{"perturbation", t.perturbation}, {"kpi", t.kpi}});
  json j{{"objective", to_string(spec.objective)},
         {"best_kpi", r.best_kpi},
         {"baseline_kpi", r.baseline_kpi},
         {"uplift", r.uplift},
         {"confidence", r.confidence},
         {"best_index", r.best_index},
         {"best_perturbation", best},
         {"trace", trace},
         {"completed", r.completed},
         {"rendered", rendered_kpis(r.baseline_kpi, r.best_kpi, r.uplift, "best_kpi")}};
  if (spec.target_value) j["target_value"] = *spec.target_value;
  return j;
}

json ground_truth_json(const GroundTruth& t) {
  json coefficients = json::array();
  for (const auto& [name, c] : t.coefficients) coefficients.push_back({{"driver", name}, {"coefficient", c}});
  return json{{"use_case", to_string(t.use_case)},
              {"n_rows", t.n_rows},
              {"seed", t.seed},
              {"kpi", t.kpi},
              {"link", t.link},
              {"intercept", t.intercept},
              {"coefficients", coefficients},
              {"noise_sigma", t.noise_sigma}};
}

}  // namespace whatif
