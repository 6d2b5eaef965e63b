#include "whatif/service.hpp"

#include <charconv>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>

#include "whatif/error.hpp"
#include "whatif/random.hpp"

namespace whatif {

namespace {

// Request body that is not valid JSON.
struct BadJson {
  std::string message;
};

json parse_body(std::string_view body) {
  if (body.find_first_not_of(" \t\r\n") == std::string_view::npos) return json::object();
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw BadJson{e.what()};
  }
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    if (path.front() == '/') {
      path.remove_prefix(1);
      continue;
    }
    const auto slash = path.find('/');
    parts.push_back(path.substr(0, slash));
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash);
  }
  return parts;
}

std::optional<std::size_t> parse_index(std::string_view s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::size_t query_param(std::string_view query, std::string_view key, std::size_t fallback) {
  while (!query.empty()) {
    const auto amp = query.find('&');
    const auto pair = query.substr(0, amp);
    const auto eq = pair.find('=');
    if (eq != std::string_view::npos && pair.substr(0, eq) == key) {
      if (const auto v = parse_index(pair.substr(eq + 1))) return *v;
      fail(ErrorKind::invalid_input, "invalid_query", "query parameter '" + std::string(key) + "' must be a nonnegative integer");
    }
    if (amp == std::string_view::npos) break;
    query.remove_prefix(amp + 1);
  }
  return fallback;
}

void write_file_atomically(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorKind::numerical, "snapshot_failed", "could not write snapshot " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class GoalSlot {
 public:
  explicit GoalSlot(const Session& s) : flag_(s.goal_running) {
    bool expected = false;
    acquired_ = flag_.compare_exchange_strong(expected, true);
  }
  ~GoalSlot() {
    if (acquired_) flag_.store(false);
  }
  bool acquired() const noexcept { return acquired_; }

 private:
  std::atomic<bool>& flag_;
  bool acquired_ = false;
};

}  // namespace

int http_status(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_input: return 422;
    case ErrorKind::not_found: return 404;
    case ErrorKind::conflict: return 409;
    case ErrorKind::numerical: return 422;
    case ErrorKind::timeout: return 408;
    case ErrorKind::busy: return 429;
  }
  return 500;
}

ApiResponse error_response(int status, std::string_view code, std::string_view message, json details) {
  return ApiResponse{status, json{{"code", code}, {"message", message}, {"details", std::move(details)}}};
}

json session_json(const Session& s, bool include_created_at) {
  const auto& m = s.model;
  json j{{"session_id", s.id},
         {"dataset_id", m.frame.dataset_id},
         {"kpi", m.frame.kpi},
         {"kpi_kind", to_string(m.frame.kpi_kind)},
         {"drivers", m.frame.drivers},
         {"model_kind", to_string(m.kind())},
         {"seed", m.seed},
         {"hyper", m.hyper},
         {"confidence", m.confidence},
         {"baseline_kpi", s.baseline_kpi},
         {"ground_truth_kpi", s.ground_truth_kpi},
         {"row_count", s.rows.rows()},
         {"importance", importance_json(s.importance)},
         {"rendered",
          {{"baseline_kpi", render_fixed2(s.baseline_kpi)},
           {"ground_truth_kpi", render_fixed2(s.ground_truth_kpi)},
           {"confidence", render_fixed2(m.confidence)}}}};
  if (include_created_at) j["created_at"] = s.created_at;
  return j;
}

json sensitivity_response(const TrainedModel& model, const Matrix& rows, const PerturbationSpec& spec) {
  return sensitivity_json(run_sensitivity(model, rows, spec));
}

json comparison_response(const TrainedModel& model, const Matrix& rows, const SweepSpec& sweep) {
  const auto curves = comparison_sweep(model, rows, sweep);
  return comparison_json(sweep, kpi_value(model, rows), curves);
}

json row_sensitivity_response(const TrainedModel& model, const Matrix& rows, std::size_t row,
                              const PerturbationSpec& spec) {
  return row_sensitivity_json(whatif::row_sensitivity(model, rows, row, spec));
}

Service::Service(ServiceConfig config) : config_(std::move(config)) {
  if (config_.snapshot_dir) load_snapshots();
}

std::shared_ptr<const Session> Service::find_session(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) fail(ErrorKind::not_found, "session_not_found", "unknown session '" + id + "'");
  return it->second;
}

std::shared_ptr<const Dataset> Service::find_dataset(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = datasets_.find(id);
  if (it == datasets_.end()) fail(ErrorKind::not_found, "dataset_not_found", "unknown dataset '" + id + "'");
  return it->second;
}

std::shared_ptr<const Dataset> Service::store_dataset(Dataset dataset, std::string_view csv) {
  auto ptr = std::make_shared<const Dataset>(std::move(dataset));
  {
    std::unique_lock lock(mutex_);
    const auto [it, inserted] = datasets_.emplace(ptr->id(), ptr);
    if (!inserted) return it->second;
  }
  if (config_.snapshot_dir) write_file_atomically(*config_.snapshot_dir / "datasets" / (ptr->id() + ".csv"), csv);
  return ptr;
}

ApiResponse Service::upload_dataset(std::string_view csv) {
  const auto ds = store_dataset(parse_csv(csv), csv);
  return {201, dataset_summary(*ds)};
}

ApiResponse Service::create_synthetic_dataset(const json& body) {
  require(body.is_object(), "invalid_body", "expected a JSON object");
  const auto use_case = parse_use_case(body.value("use_case", std::string("deal_closing")));
  const auto n_rows = body.value("n_rows", 500LL);
  require(n_rows > 0, "too_few_rows", "n_rows must be positive");
  const auto seed = body.value("seed", std::uint64_t{0});
  auto synth = generate_synthetic(use_case, static_cast<std::size_t>(n_rows), seed);
  const auto ds = store_dataset(std::move(synth.dataset), synth.csv);
  json j = dataset_summary(*ds);
  j["ground_truth"] = ground_truth_json(synth.truth);
  return {201, j};
}

ApiResponse Service::get_dataset(const std::string& id, std::size_t offset, std::size_t limit) const {
  const auto ds = find_dataset(id);
  json j = dataset_summary(*ds);
  json rows = json::array();
  const std::size_t end = std::min(ds->row_count(), offset + std::min<std::size_t>(limit, 1000));
  for (std::size_t r = offset; r < end; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < ds->columns().size(); ++c) {
      const auto& col = ds->columns()[c];
      if (col.modelable()) row.push_back(ds->numbers(col.name)[r]);
      else row.push_back(ds->text(col.name)[r]);
    }
    rows.push_back(std::move(row));
  }
  j["offset"] = offset;
  j["rows"] = std::move(rows);
  return {200, j};
}

std::shared_ptr<const Session> Service::build_session(const json& request, std::optional<std::string> created_at) {
  require(request.is_object(), "invalid_body", "expected a JSON object");
  const auto dataset_id = request.value("dataset_id", std::string());
  require(!dataset_id.empty(), "missing_field", "missing field 'dataset_id'");
  const auto kpi = request.value("kpi", std::string());
  require(!kpi.empty(), "missing_field", "missing field 'kpi'");
  const auto ds = find_dataset(dataset_id);

  std::vector<std::string> drivers;
  if (request.contains("drivers") && !request.at("drivers").is_null()) {
    drivers = request.at("drivers").get<std::vector<std::string>>();
    require(!drivers.empty(), "no_drivers", "drivers must not be empty");
  }
  AnalysisFrame frame = make_frame(*ds, kpi, drivers);
  if (request.contains("clamps")) {
    json frame_json = frame;
    frame_json["clamps"] = request.at("clamps");
    frame = frame_json.get<AnalysisFrame>();
    for (const auto& [name, c] : frame.clamps) {
      require(frame.driver_index(name).has_value(), "unknown_driver", "clamp for unknown driver '" + name + "'");
    }
  }
  Hyperparameters hyper;
  if (request.contains("hyper")) hyper = request.at("hyper").get<Hyperparameters>();
  const auto seed = request.value("seed", std::uint64_t{0});
  const auto perms = request.value("shapley_permutations", static_cast<std::uint64_t>(config_.shapley_permutations));
  require(perms >= 1, "invalid_permutations", "shapley_permutations must be at least 1");

  json canonical{{"dataset_id", dataset_id},
                 {"kpi", kpi},
                 {"drivers", frame.drivers},
                 {"seed", seed},
                 {"hyper", hyper},
                 {"shapley_permutations", perms}};
  if (!frame.clamps.empty()) canonical["clamps"] = json(frame)["clamps"];
  const std::string id = "s-" + hex64(fnv1a64(canonical.dump()));
  {
    std::shared_lock lock(mutex_);
    if (const auto it = sessions_.find(id); it != sessions_.end()) return it->second;
  }

  auto s = std::make_shared<Session>();
  s->id = id;
  s->dataset = ds;
  s->request = canonical;
  s->rows = driver_matrix(*ds, frame);
  const Vector y = kpi_vector(*ds, frame);
  s->model = train(s->rows, y, frame, hyper, seed);
  ShapleyOptions shapley;
  shapley.permutations = static_cast<std::size_t>(perms);
  shapley.seed = seed;
  s->importance = driver_importance(s->model, s->rows, y, shapley);
  s->baseline_kpi = kpi_value(s->model, s->rows);
  s->ground_truth_kpi = frame.kpi_kind == KpiKind::discrete ? 100.0 * y.mean() : y.mean();
  s->created_at = created_at.value_or(utc_timestamp());

  std::shared_ptr<const Session> stored;
  {
    std::unique_lock lock(mutex_);
    const auto [it, inserted] = sessions_.emplace(id, s);
    stored = it->second;
    if (!inserted) return stored;
  }
  if (config_.snapshot_dir) {
    const json snap{{"request", canonical}, {"created_at", s->created_at}};
    write_file_atomically(*config_.snapshot_dir / "sessions" / (id + ".json"), snap.dump(2));
  }
  return stored;
}

ApiResponse Service::create_session(const json& body) {
  const auto s = build_session(body, std::nullopt);
  return {201, session_json(*s, false)};
}

ApiResponse Service::get_session(const std::string& id) const { return {200, session_json(*find_session(id), true)}; }

ApiResponse Service::sensitivity(const std::string& session_id, const json& body) const {
  const auto s = find_session(session_id);
  return {200, sensitivity_response(s->model, s->rows, perturbation_spec_from_json(body))};
}

ApiResponse Service::comparison(const std::string& session_id, const json& body) const {
  const auto s = find_session(session_id);
  return {200, comparison_response(s->model, s->rows, sweep_spec_from_json(body))};
}

ApiResponse Service::row_sensitivity(const std::string& session_id, std::size_t row, const json& body) const {
  const auto s = find_session(session_id);
  return {200, row_sensitivity_response(s->model, s->rows, row, perturbation_spec_from_json(body))};
}

ApiResponse Service::goal(const std::string& session_id, const json& body) const {
  const auto s = find_session(session_id);
  const GoalSpec spec = goal_spec_from_json(body);
  if (spec.budget > config_.goal_budget_cap) {
    return error_response(422, "budget_exceeds_cap",
                          "budget " + std::to_string(spec.budget) + " exceeds the cap of " +
                              std::to_string(config_.goal_budget_cap),
                          json{{"cap", config_.goal_budget_cap}});
  }
  GoalSlot slot(*s);
  if (!slot.acquired()) {
    return error_response(429, "goal_in_progress", "another goal request is running for this session");
  }
  GoalRunOptions run;
  run.deadline = std::chrono::steady_clock::now() + config_.goal_timeout;
  const auto result = optimize_goal(s->model, s->rows, spec, run);
  json out = goal_result_json(spec, result);
  if (!result.completed) {
    ensure_finite(out);
    return error_response(408, "timeout", "goal search hit the wall-clock limit; partial trace attached",
                          json{{"partial", out}});
  }
  return {200, out};
}

ApiResponse Service::handle(std::string_view method, std::string_view target, std::string_view body) {
  std::string_view path = target;
  std::string_view query;
  if (const auto q = target.find('?'); q != std::string_view::npos) {
    path = target.substr(0, q);
    query = target.substr(q + 1);
  }
  const auto parts = split_path(path);
  const bool get = method == "GET";
  const bool post = method == "POST";
  try {
    ApiResponse res = [&]() -> ApiResponse {
      if (parts.size() < 2 || parts[0] != "api") return error_response(404, "route_not_found", "no such endpoint");
      const auto n = parts.size();
      const std::string_view root = parts[1];
      if (root == "health" && n == 2) {
        if (!get) return error_response(405, "method_not_allowed", "use GET");
        return {200, json{{"status", "ok"}}};
      }
      if (root == "datasets") {
        if (n == 2) {
          if (!post) return error_response(405, "method_not_allowed", "use POST");
          require(!body.empty(), "empty_input", "empty input");
          return upload_dataset(body);
        }
        if (n == 3 && parts[2] == "synthetic") {
          if (!post) return error_response(405, "method_not_allowed", "use POST");
          return create_synthetic_dataset(parse_body(body));
        }
        if (n == 3) {
          if (!get) return error_response(405, "method_not_allowed", "use GET");
          return get_dataset(std::string(parts[2]), query_param(query, "offset", 0), query_param(query, "limit", 100));
        }
      }
      if (root == "sessions") {
        if (n == 2) {
          if (!post) return error_response(405, "method_not_allowed", "use POST");
          return create_session(parse_body(body));
        }
        const std::string id(parts[2]);
        if (n == 3) {
          if (!get) return error_response(405, "method_not_allowed", "use GET");
          return get_session(id);
        }
        if (!post) return error_response(405, "method_not_allowed", "use POST");
        if (n == 4 && parts[3] == "sensitivity") return sensitivity(id, parse_body(body));
        if (n == 4 && parts[3] == "comparison") return comparison(id, parse_body(body));
        if (n == 4 && parts[3] == "goal") return goal(id, parse_body(body));
        if (n == 6 && parts[3] == "rows" && parts[5] == "sensitivity") {
          const auto row = parse_index(parts[4]);
          if (!row) {
            find_session(id);
            return error_response(404, "row_out_of_range", "row index must be a nonnegative integer");
          }
          return row_sensitivity(id, *row, parse_body(body));
        }
      }
      return error_response(404, "route_not_found", "no such endpoint");
    }();
    ensure_finite(res.body);
    return res;
  } catch (const BadJson& e) {
    return error_response(400, "invalid_json", "request body is not valid JSON", json{{"parser", e.message}});
  } catch (const Error& e) {
    return error_response(http_status(e.kind()), e.code(), e.what());
  } catch (const json::exception& e) {
    return error_response(422, "invalid_body", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal_error", e.what());
  }
}

void Service::load_snapshots() {
  namespace fs = std::filesystem;
  const auto& dir = *config_.snapshot_dir;
  fs::create_directories(dir / "datasets");
  fs::create_directories(dir / "sessions");
  for (const auto& entry : fs::directory_iterator(dir / "datasets")) {
    if (entry.path().extension() != ".csv") continue;
    const auto csv = read_file(entry.path());
    auto ds = std::make_shared<const Dataset>(parse_csv(csv));
    std::unique_lock lock(mutex_);
    datasets_.emplace(ds->id(), ds);
  }
  std::vector<fs::path> session_files;
  for (const auto& entry : fs::directory_iterator(dir / "sessions")) {
    if (entry.path().extension() == ".json") session_files.push_back(entry.path());
  }
  std::sort(session_files.begin(), session_files.end());
  for (const auto& path : session_files) {
    const auto snap = json::parse(read_file(path));
    build_session(snap.at("request"), snap.at("created_at").get<std::string>());
  }
}

}  // namespace whatif
