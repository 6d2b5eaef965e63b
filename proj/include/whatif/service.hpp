#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>

#include "whatif/error.hpp"
#include "whatif/json_io.hpp"

namespace whatif {

struct ServiceConfig {
  std::size_t goal_budget_cap = 200;
  std::chrono::milliseconds goal_timeout{120000};
  std::optional<std::filesystem::path> snapshot_dir;
  std::size_t shapley_permutations = 20;
};

struct ApiResponse {
  int status = 200;
  json body;
};

int http_status(ErrorKind kind) noexcept;
ApiResponse error_response(int status, std::string_view code, std::string_view message, json details = json::object());

// Immutable once created; only the goal slot flag changes.
struct Session {
  std::string id;
  std::shared_ptr<const Dataset> dataset;
  TrainedModel model;
  Matrix rows;
  ImportanceReport importance;
  double baseline_kpi = 0.0;
  double ground_truth_kpi = 0.0;
  std::string created_at;
  json request;  // canonical creation request, replayed from snapshots
  mutable std::atomic<bool> goal_running{false};
};

// Transport-independent request handling for the JSON API. Every method is
// safe to call concurrently.
class Service {
 public:
  explicit Service(ServiceConfig config = {});

  // Routes "/api/..." requests; `body` is the raw request body.
  ApiResponse handle(std::string_view method, std::string_view path, std::string_view body);

  ApiResponse upload_dataset(std::string_view csv);
  ApiResponse create_synthetic_dataset(const json& body);
  ApiResponse get_dataset(const std::string& id, std::size_t offset, std::size_t limit) const;
  ApiResponse create_session(const json& body);
  ApiResponse get_session(const std::string& id) const;
  ApiResponse sensitivity(const std::string& session_id, const json& body) const;
  ApiResponse comparison(const std::string& session_id, const json& body) const;
  ApiResponse row_sensitivity(const std::string& session_id, std::size_t row, const json& body) const;
  ApiResponse goal(const std::string& session_id, const json& body) const;

  std::shared_ptr<const Session> find_session(const std::string& id) const;
  std::shared_ptr<const Dataset> find_dataset(const std::string& id) const;
  const ServiceConfig& config() const noexcept { return config_; }

 private:
  std::shared_ptr<const Dataset> store_dataset(Dataset dataset, std::string_view csv);
  std::shared_ptr<const Session> build_session(const json& request, std::optional<std::string> created_at);
  void load_snapshots();

  ServiceConfig config_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const Dataset>> datasets_;
  std::map<std::string, std::shared_ptr<const Session>> sessions_;
};

// Response bodies shared by the HTTP API and the CLI.
json session_json(const Session& session, bool include_created_at);
json sensitivity_response(const TrainedModel& model, const Matrix& rows, const PerturbationSpec& spec);
json comparison_response(const TrainedModel& model, const Matrix& rows, const SweepSpec& sweep);
json row_sensitivity_response(const TrainedModel& model, const Matrix& rows, std::size_t row,
                              const PerturbationSpec& spec);

}  // namespace whatif
