#include "whatif/cli.hpp"

#include <CLI11.hpp>

#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "whatif/error.hpp"
#include "whatif/http_server.hpp"
#include "whatif/service.hpp"

namespace whatif::cli {

namespace {

// Bad paths and unreadable files are usage errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string normalized(std::string_view s) {
  std::string out;
  for (const unsigned char c : s) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::string read_input(const std::string& path, std::istream& in) {
  std::ostringstream ss;
  if (path == "-") {
    ss << in.rdbuf();
    return ss.str();
  }
  std::ifstream file(path, std::ios::binary);
  if (!file) throw UsageError("cannot read '" + path + "'");
  ss << file.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, std::string_view content, std::ostream& out) {
  if (path == "-") {
    out << content;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw UsageError("cannot write '" + path + "'");
  file << content;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_amount(const std::string& text, const std::string& item) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    fail(ErrorKind::invalid_input, "invalid_amount", "invalid number '" + text + "' in '" + item + "'");
  }
  return v;
}

bool is_mode(const std::string& s) {
  try {
    parse_perturbation_mode(s);
    return true;
  } catch (const Error&) {
    return false;
  }
}

// "driver:mode:amount"; the driver may itself contain ':'.
PerturbationItem parse_perturb_item(const std::string& text, const AnalysisFrame& frame) {
  const auto parts = split(text, ':');
  if (parts.size() < 3 || !is_mode(parts[parts.size() - 2])) {
    fail(ErrorKind::invalid_input, "invalid_perturbation", "expected driver:pct|abs:amount, got '" + text + "'");
  }
  std::string driver = parts[0];
  for (std::size_t i = 1; i + 2 < parts.size(); ++i) driver += ":" + parts[i];
  return {resolve_name(driver, frame.drivers), parse_perturbation_mode(parts[parts.size() - 2]),
          parse_amount(parts.back(), text)};
}

// "driver:mode:lo:hi", or "driver:mode:amount" to pin the amount.
std::pair<std::string, DriverConstraint> parse_constraint(const std::string& text, const AnalysisFrame& frame) {
  const auto parts = split(text, ':');
  std::size_t numbers = 0;
  if (parts.size() >= 4 && is_mode(parts[parts.size() - 3])) numbers = 2;
  else if (parts.size() >= 3 && is_mode(parts[parts.size() - 2])) numbers = 1;
  if (numbers == 0) {
    fail(ErrorKind::invalid_input, "invalid_constraint", "expected driver:pct|abs:lo[:hi], got '" + text + "'");
  }
  const std::size_t mode_at = parts.size() - numbers - 1;
  std::string driver = parts[0];
  for (std::size_t i = 1; i < mode_at; ++i) driver += ":" + parts[i];
  DriverConstraint c;
  c.mode = parse_perturbation_mode(parts[mode_at]);
  c.lo = parse_amount(parts[mode_at + 1], text);
  c.hi = numbers == 2 ? parse_amount(parts[mode_at + 2], text) : c.lo;
  return {resolve_name(driver, frame.drivers), c};
}

std::string pad(std::string s, std::size_t width, bool right = false) {
  if (s.size() >= width) return s;
  return right ? std::string(width - s.size(), ' ') + s : s + std::string(width - s.size(), ' ');
}

std::size_t name_width(const std::vector<std::string>& names, std::size_t floor) {
  std::size_t w = floor;
  for (const auto& n : names) w = std::max(w, n.size());
  return w;
}

void importance_table(const json& report, std::ostream& out) {
  constexpr int bar_width = 30;
  std::vector<std::string> names;
  for (const auto& e : report.at("entries")) names.push_back(e.at("driver").get<std::string>());
  const auto w = name_width(names, 6);
  out << pad("driver", w) << "  " << pad("importance", 10, true) << "\n";
  for (const auto& e : report.at("entries")) {
    const double v = e.at("importance").get<double>();
    const int len = static_cast<int>(std::lround(std::abs(v) * bar_width));
    out << pad(e.at("driver").get<std::string>(), w) << "  " << pad(render_fixed2(v), 10, true) << "  |"
        << std::string(static_cast<std::size_t>(len), v < 0 ? '-' : '#') << "\n";
  }
  const auto& agreement = report.at("agreement");
  out << "rank agreement with correlation/shapley: " << render_fixed2(agreement.at("spearman_rank_agreement").get<double>())
      << (agreement.at("flagged").get<bool>() ? " (flagged)" : "") << "\n";
}

void sensitivity_table(const json& j, std::ostream& out) {
  const auto& r = j.at("rendered");
  out << "baseline   " << pad(r.at("baseline_kpi").get<std::string>(), 12, true) << "\n"
      << "perturbed  " << pad(r.at("perturbed_kpi").get<std::string>(), 12, true) << "\n"
      << "uplift     " << pad(r.at("uplift").get<std::string>(), 12, true) << "  " << r.at("direction").get<std::string>()
      << "\n";
}

void row_table(const json& j, std::ostream& out) {
  out << "row        " << pad(std::to_string(j.at("row").get<std::size_t>()), 12, true) << "\n"
      << "baseline   " << pad(render_fixed2(j.at("baseline_prediction").get<double>()), 12, true) << "\n"
      << "perturbed  " << pad(render_fixed2(j.at("perturbed_prediction").get<double>()), 12, true) << "\n"
      << "change     " << pad(render_fixed2(j.at("change").get<double>(), true), 12, true) << "\n";
  if (j.contains("baseline_class")) {
    out << "class      " << pad(std::to_string(j.at("baseline_class").get<int>()) + " -> " +
                                    std::to_string(j.at("perturbed_class").get<int>()),
                                12, true)
        << "\n";
  }
}

void sweep_table(const json& j, std::ostream& out) {
  const auto& curves = j.at("curves");
  std::vector<std::string> names;
  for (const auto& c : curves) names.push_back(c.at("driver").get<std::string>());
  std::vector<std::size_t> widths;
  out << pad("amount", 10, true);
  for (const auto& n : names) {
    widths.push_back(std::max<std::size_t>(n.size(), 10));
    out << "  " << pad(n, widths.back(), true);
  }
  out << "\n";
  if (curves.empty()) return;
  const auto steps = curves.front().at("points").size();
  for (std::size_t k = 0; k < steps; ++k) {
    out << pad(render_fixed2(curves.front().at("points")[k].at("amount").get<double>()), 10, true);
    for (std::size_t c = 0; c < curves.size(); ++c) {
      out << "  " << pad(render_fixed2(curves[c].at("points")[k].at("kpi").get<double>()), widths[c], true);
    }
    out << "\n";
  }
}

void goal_table(const json& j, std::ostream& out) {
  std::vector<std::string> names;
  for (const auto& p : j.at("best_perturbation")) names.push_back(p.at("driver").get<std::string>());
  const auto w = name_width(names, 6);
  out << pad("driver", w) << "  " << pad("mode", 10) << "  " << pad("amount", 10, true) << "  "
      << pad("range", 20, true) << "\n";
  for (const auto& p : j.at("best_perturbation")) {
    out << pad(p.at("driver").get<std::string>(), w) << "  " << pad(p.at("mode").get<std::string>(), 10) << "  "
        << pad(render_fixed2(p.at("amount").get<double>(), true), 10, true) << "  "
        << pad("[" + render_fixed2(p.at("lo").get<double>()) + ", " + render_fixed2(p.at("hi").get<double>()) + "]", 20,
               true)
        << "\n";
  }
  const auto& r = j.at("rendered");
  out << "baseline KPI  " << r.at("baseline_kpi").get<std::string>() << "\n"
      << "best KPI      " << r.at("best_kpi").get<std::string>() << "\n"
      << "uplift        " << r.at("uplift").get<std::string>() << "\n"
      << "confidence    " << render_fixed2(j.at("confidence").get<double>()) << "\n"
      << "evaluations   " << j.at("trace").size() << (j.at("completed").get<bool>() ? "" : " (stopped early)") << "\n";
}

std::string trace_csv(const GoalResult& result) {
  std::vector<std::string> header{"iteration"};
  header.insert(header.end(), result.drivers.begin(), result.drivers.end());
  header.push_back("kpi");
  std::ostringstream ss;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) ss << ',';
    const auto& h = header[i];
    if (h.find_first_of(",\"\n\r") != std::string::npos) {
      ss << '"';
      for (const char c : h) ss << (c == '"' ? std::string("\"\"") : std::string(1, c));
      ss << '"';
    } else {
      ss << h;
    }
  }
  ss << "\n";
  for (std::size_t t = 0; t < result.trace.size(); ++t) {
    ss << t;
    for (const double p : result.trace[t].perturbation) ss << ',' << format_number(p);
    ss << ',' << format_number(result.trace[t].kpi) << "\n";
  }
  return ss.str();
}

void emit(const json& j, std::ostream& out) { out << j.dump(2) << "\n"; }

struct Loaded {
  Dataset dataset;
  TrainedModel model;
  Matrix rows;
  Vector y;
};

Loaded load(const std::string& model_path, const std::string& data_path, std::istream& in) {
  if (model_path == "-" && data_path == "-") throw UsageError("--model and --data cannot both read stdin");
  json model_json;
  try {
    model_json = json::parse(read_input(model_path, in));
  } catch (const json::parse_error& e) {
    throw UsageError("model file is not valid JSON: " + std::string(e.what()));
  }
  TrainedModel model = model_from_json(model_json);
  Dataset dataset = parse_csv(read_input(data_path, in));
  if (dataset.id() != model.frame.dataset_id) {
    // A different CSV is allowed as long as the frame columns still resolve.
    (void)make_frame(dataset, model.frame.kpi, model.frame.drivers);
  }
  Matrix rows = driver_matrix(dataset, model.frame);
  Vector y = kpi_vector(dataset, model.frame);
  return {std::move(dataset), std::move(model), std::move(rows), std::move(y)};
}

}  // namespace

std::string resolve_name(const std::string& typed, const std::vector<std::string>& names) {
  for (const auto& n : names) {
    if (n == typed) return n;
  }
  const auto key = normalized(typed);
  std::optional<std::string> match;
  for (const auto& n : names) {
    if (!key.empty() && normalized(n) == key) {
      if (match) fail(ErrorKind::invalid_input, "ambiguous_name", "'" + typed + "' matches more than one column");
      match = n;
    }
  }
  return match.value_or(typed);
}

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"What-if analysis engine: importance, sensitivity and goal seeking over tabular data", "whatif"};
  app.require_subcommand(1);
  bool table = false;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with known ground truth");
  std::string use_case_name, synth_out = "-";
  std::size_t synth_rows = 500;
  std::uint64_t synth_seed = 0;
  synth->add_option("--use-case", use_case_name, "marketing_mix | deal_closing | retention")->required();
  synth->add_option("--rows", synth_rows, "Number of rows")->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--out", synth_out, "CSV path; ground truth goes to <out>.truth.json")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model for one KPI");
  std::string data_path, kpi, drivers_text, model_out = "-";
  std::uint64_t seed = 0;
  Hyperparameters hyper;
  train_cmd->add_option("--data", data_path, "CSV path or -")->required();
  train_cmd->add_option("--kpi", kpi)->required();
  train_cmd->add_option("--drivers", drivers_text, "Comma-separated; default all other usable columns");
  train_cmd->add_option("--seed", seed)->capture_default_str();
  train_cmd->add_option("--out", model_out, "Model JSON path")->capture_default_str();
  train_cmd->add_option("--trees", hyper.forest.n_trees)->capture_default_str();
  train_cmd->add_option("--max-depth", hyper.forest.max_depth)->capture_default_str();
  train_cmd->add_option("--min-leaf", hyper.forest.min_leaf)->capture_default_str();
  train_cmd->add_option("--max-features", hyper.forest.max_features, "0 means ceil(sqrt(d))")->capture_default_str();
  train_cmd->add_option("--ridge", hyper.linear.ridge_lambda)->capture_default_str();
  train_cmd->add_option("--folds", hyper.cv_folds)->capture_default_str();

  // importance
  auto* importance_cmd = app.add_subcommand("importance", "Rank drivers and verify the ranking");
  std::string model_path;
  std::size_t shapley_perms = 20;
  std::optional<std::uint64_t> analysis_seed;
  importance_cmd->add_option("--model", model_path)->required();
  importance_cmd->add_option("--data", data_path)->required();
  importance_cmd->add_option("--shapley-perms", shapley_perms)->capture_default_str();
  importance_cmd->add_option("--seed", analysis_seed, "Default: the model's training seed");
  importance_cmd->add_flag("--table", table);

  // sensitivity
  auto* sens_cmd = app.add_subcommand("sensitivity", "KPI change under a uniform perturbation");
  std::vector<std::string> perturbs;
  std::optional<std::size_t> row;
  sens_cmd->add_option("--model", model_path)->required();
  sens_cmd->add_option("--data", data_path)->required();
  sens_cmd->add_option("--perturb", perturbs, "driver:pct|abs:amount (repeatable)");
  sens_cmd->add_option("--row", row, "Report a single row instead of the KPI");
  sens_cmd->add_flag("--table", table);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Per-driver KPI curves over a perturbation range");
  SweepSpec sweep;
  std::string sweep_drivers, sweep_mode = "pct";
  sweep_cmd->add_option("--model", model_path)->required();
  sweep_cmd->add_option("--data", data_path)->required();
  sweep_cmd->add_option("--drivers", sweep_drivers, "Comma-separated; default all");
  sweep_cmd->add_option("--mode", sweep_mode)->capture_default_str();
  sweep_cmd->add_option("--lo", sweep.lo)->capture_default_str();
  sweep_cmd->add_option("--hi", sweep.hi)->capture_default_str();
  sweep_cmd->add_option("--steps", sweep.steps)->capture_default_str();
  sweep_cmd->add_flag("--table", table);

  // goal
  auto* goal_cmd = app.add_subcommand("goal", "Search perturbations that reach a KPI goal");
  GoalSpec goal;
  std::string objective = "max";
  std::optional<double> target;
  std::vector<std::string> constraints;
  std::string trace_path;
  goal_cmd->add_option("--model", model_path)->required();
  goal_cmd->add_option("--data", data_path)->required();
  goal_cmd->add_option("--objective", objective, "max | min | target")->capture_default_str();
  goal_cmd->add_option("--target", target);
  goal_cmd->add_option("--constraint", constraints, "driver:pct|abs:lo:hi (repeatable)");
  goal_cmd->add_option("--budget", goal.budget)->capture_default_str();
  goal_cmd->add_option("--n-init", goal.n_init)->capture_default_str();
  goal_cmd->add_option("--seed", goal.seed)->capture_default_str();
  goal_cmd->add_option("--trace-csv", trace_path, "Also write the evaluation trace as CSV");
  goal_cmd->add_flag("--table", table);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the JSON API server");
  std::string addr = "127.0.0.1:8080", snapshot_dir, static_dir, cors = "*";
  std::size_t budget_cap = 200;
  long long timeout_ms = 120000;
  serve_cmd->add_option("--addr", addr, "host:port")->envname("WHATIF_ADDR")->capture_default_str();
  serve_cmd->add_option("--snapshot-dir", snapshot_dir)->envname("WHATIF_SNAPSHOT_DIR");
  serve_cmd->add_option("--budget-cap", budget_cap)->envname("WHATIF_BUDGET_CAP")->capture_default_str();
  serve_cmd->add_option("--timeout", timeout_ms, "Goal wall-clock limit in ms")
      ->envname("WHATIF_GOAL_TIMEOUT_MS")
      ->capture_default_str();
  serve_cmd->add_option("--cors-origin", cors)->envname("WHATIF_CORS_ORIGIN")->capture_default_str();
  serve_cmd->add_option("--static-dir", static_dir, "Serve UI assets from this directory")
      ->envname("WHATIF_STATIC_DIR");

  std::vector<std::string> argv_storage{"whatif"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return validation_error;
  }

  try {
    if (*synth) {
      auto data = generate_synthetic(parse_use_case(use_case_name), synth_rows, synth_seed);
      write_output(synth_out, data.csv, out);
      if (synth_out != "-") {
        write_output(synth_out + ".truth.json", ground_truth_json(data.truth).dump(2) + "\n", out);
        json summary = dataset_summary(data.dataset);
        summary["ground_truth"] = ground_truth_json(data.truth);
        emit(summary, out);
      }
      return ok;
    }

    if (*train_cmd) {
      const Dataset dataset = parse_csv(read_input(data_path, in));
      std::vector<std::string> names;
      for (const auto& c : dataset.columns()) names.push_back(c.name);
      std::vector<std::string> drivers;
      if (!drivers_text.empty()) {
        for (const auto& d : split(drivers_text, ',')) drivers.push_back(resolve_name(d, names));
      }
      hyper.validate();
      const auto frame = make_frame(dataset, resolve_name(kpi, names), drivers);
      const auto model = whatif::train(dataset, frame, hyper, seed);
      const auto model_json = model_to_json(model);
      ensure_finite(model_json);
      if (model_out == "-") {
        emit(model_json, out);
        return ok;
      }
      write_output(model_out, model_json.dump() + "\n", out);
      emit(json{{"model", model_out},
                {"dataset_id", frame.dataset_id},
                {"kpi", frame.kpi},
                {"kpi_kind", to_string(frame.kpi_kind)},
                {"drivers", frame.drivers},
                {"model_kind", to_string(model.kind())},
                {"confidence", model.confidence},
                {"baseline_kpi", kpi_value(model, driver_matrix(dataset, frame))}},
           out);
      return ok;
    }

    if (*importance_cmd) {
      const auto l = load(model_path, data_path, in);
      ShapleyOptions options;
      options.permutations = shapley_perms;
      options.seed = analysis_seed.value_or(l.model.seed);
      require(shapley_perms >= 1, "invalid_permutations", "--shapley-perms must be at least 1");
      const json j = importance_json(driver_importance(l.model, l.rows, l.y, options));
      ensure_finite(j);
      table ? importance_table(j, out) : emit(j, out);
      return ok;
    }

    if (*sens_cmd) {
      const auto l = load(model_path, data_path, in);
      PerturbationSpec spec;
      for (const auto& p : perturbs) spec.items.push_back(parse_perturb_item(p, l.model.frame));
      if (row) {
        const json j = row_sensitivity_response(l.model, l.rows, *row, spec);
        ensure_finite(j);
        table ? row_table(j, out) : emit(j, out);
      } else {
        const json j = sensitivity_response(l.model, l.rows, spec);
        ensure_finite(j);
        table ? sensitivity_table(j, out) : emit(j, out);
      }
      return ok;
    }

    if (*sweep_cmd) {
      const auto l = load(model_path, data_path, in);
      sweep.mode = parse_perturbation_mode(sweep_mode);
      if (!sweep_drivers.empty()) {
        for (const auto& d : split(sweep_drivers, ',')) sweep.drivers.push_back(resolve_name(d, l.model.frame.drivers));
      }
      const json j = comparison_response(l.model, l.rows, sweep);
      ensure_finite(j);
      table ? sweep_table(j, out) : emit(j, out);
      return ok;
    }

    if (*goal_cmd) {
      const auto l = load(model_path, data_path, in);
      goal.objective = parse_objective(objective);
      goal.target_value = target;
      for (const auto& c : constraints) {
        auto [driver, constraint] = parse_constraint(c, l.model.frame);
        if (!goal.constraints.emplace(driver, constraint).second) {
          fail(ErrorKind::invalid_input, "duplicate_driver", "driver '" + driver + "' constrained twice");
        }
      }
      const auto result = optimize_goal(l.model, l.rows, goal);
      const json j = goal_result_json(goal, result);
      ensure_finite(j);
      if (!trace_path.empty()) write_output(trace_path, trace_csv(result), out);
      table ? goal_table(j, out) : emit(j, out);
      return ok;
    }

    if (*serve_cmd) {
      ServiceConfig config;
      config.goal_budget_cap = budget_cap;
      require(timeout_ms > 0, "invalid_timeout", "--timeout must be positive");
      config.goal_timeout = std::chrono::milliseconds(timeout_ms);
      if (!snapshot_dir.empty()) config.snapshot_dir = snapshot_dir;
      HttpOptions http;
      std::tie(http.host, http.port) = parse_listen_address(addr);
      http.cors_origin = cors;
      if (!static_dir.empty()) http.static_dir = static_dir;
      Service service(config);
      HttpServer server(service, http);
      const int port = server.bind();
      err << "listening on http://" << http.host << ":" << port << "\n";
      server.listen();
      return ok;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return validation_error;
  } catch (const Error& e) {
    err << "error [" << e.code() << "]: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::invalid_input:
      case ErrorKind::not_found:
      case ErrorKind::conflict: return validation_error;
      default: return runtime_error;
    }
  } catch (const json::exception& e) {
    err << "error [invalid_json]: " << e.what() << "\n";
    return validation_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return runtime_error;
  }
  return ok;
}

}  // namespace whatif::cli
