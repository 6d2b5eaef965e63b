#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "whatif/cli.hpp"
#include "whatif/json_io.hpp"
#include "whatif/service.hpp"
#include "whatif/synthetic.hpp"

namespace whatif::testing {

namespace fs = std::filesystem;

struct ApiCall {
  std::string name;
  std::string method;
  std::string path;
  std::string body;
  ApiResponse response;
};

inline json call_record(const ApiCall& c) {
  json body = c.response.body;
  if (body.is_object()) body.erase("created_at");
  json request{{"method", c.method}, {"path", c.path}};
  if (!c.body.empty()) {
    try {
      request["body"] = json::parse(c.body);
    } catch (const json::parse_error&) {
      request["body"] = c.body;
    }
  }
  return json{{"request", request}, {"status", c.response.status}, {"body", body}};
}

// The scripted conversation recorded in the golden files: every endpoint,
// success and error shapes, against fresh deterministic inputs.
inline std::vector<ApiCall> run_golden_script() {
  Service svc;
  std::vector<ApiCall> calls;
  auto call = [&](std::string name, std::string method, std::string path, std::string body = "") -> const json& {
    auto res = svc.handle(method, path, body);
    calls.push_back({std::move(name), std::move(method), std::move(path), std::move(body), std::move(res)});
    return calls.back().response.body;
  };

  std::string csv = "spend,price,promo,region,revenue\n";
  for (int i = 0; i < 40; ++i) {
    const double spend = 10 + (i * 7) % 23;
    const double price = 5 + (i * 3) % 11 * 0.5;
    const int promo = i % 3 == 0;
    const double revenue = 20 + 1.5 * spend - 2.0 * price + 4.0 * promo + ((i * 13) % 7 - 3) * 0.25;
    csv += format_number(spend) + "," + format_number(price) + "," + std::to_string(promo) + "," +
           (i % 2 ? "north" : "south") + "," + format_number(revenue) + "\n";
  }

  call("health", "GET", "/api/health");
  const std::string linear_ds = call("datasets_upload", "POST", "/api/datasets", csv).at("dataset_id");
  const std::string forest_ds = call("datasets_synthetic", "POST", "/api/datasets/synthetic",
                                     R"({"use_case":"deal_closing","n_rows":150,"seed":7})")
                                    .at("dataset_id");
  call("datasets_get", "GET", "/api/datasets/" + linear_ds + "?offset=3&limit=4");

  const std::string linear = call("sessions_create_linear", "POST", "/api/sessions",
                                  json{{"dataset_id", linear_ds}, {"kpi", "revenue"}, {"seed", 1}}.dump())
                                 .at("session_id");
  const std::string forest =
      call("sessions_create_forest", "POST", "/api/sessions",
           json{{"dataset_id", forest_ds},
                {"kpi", "Deal Closed?"},
                {"seed", 2},
                {"hyper", {{"forest", {{"n_trees", 15}}}}},
                {"shapley_permutations", 4}}
               .dump())
          .at("session_id");
  const std::string linear_path = "/api/sessions/" + linear;
  const std::string forest_path = "/api/sessions/" + forest;
  call("sessions_get", "GET", forest_path);

  call("sensitivity_linear", "POST", linear_path + "/sensitivity",
       R"({"items":[{"driver":"spend","mode":"percentage","amount":40},{"driver":"promo","mode":"absolute","amount":1}]})");
  call("sensitivity_forest", "POST", forest_path + "/sensitivity",
       R"({"items":[{"driver":"Open Marketing Email","mode":"percentage","amount":40}]})");
  call("sensitivity_empty", "POST", forest_path + "/sensitivity", "{}");
  call("comparison_linear", "POST", linear_path + "/comparison", R"({"lo":-50,"hi":50,"steps":11})");
  call("comparison_forest", "POST", forest_path + "/comparison",
       R"({"drivers":["Chat","Renewal"],"mode":"absolute","lo":-2,"hi":2,"steps":5})");
  call("row_sensitivity_linear", "POST", linear_path + "/rows/4/sensitivity",
       R"({"items":[{"driver":"price","mode":"absolute","amount":-1}]})");
  call("row_sensitivity_forest", "POST", forest_path + "/rows/9/sensitivity",
       R"({"items":[{"driver":"Renewal","mode":"absolute","amount":1}]})");
  call("goal_linear", "POST", linear_path + "/goal",
       R"({"objective":"maximize","budget":20,"n_init":5,"seed":3,"constraints":[{"driver":"spend","mode":"percentage","lo":-20,"hi":40},{"driver":"price","mode":"absolute","lo":-1,"hi":1}]})");
  call("goal_forest", "POST", forest_path + "/goal",
       R"({"objective":"target","target_value":60,"budget":15,"n_init":5,"seed":1,"constraints":[{"driver":"Open Marketing Email","mode":"percentage","lo":40,"hi":80}]})");

  call("error_header_only", "POST", "/api/datasets", "a,b\n");
  call("error_invalid_json", "POST", "/api/sessions", "{nope");
  call("error_text_kpi", "POST", "/api/sessions", json{{"dataset_id", linear_ds}, {"kpi", "region"}}.dump());
  call("error_unknown_session", "POST", "/api/sessions/s-0000000000000000/sensitivity", "{}");
  call("error_row_out_of_range", "POST", linear_path + "/rows/40/sensitivity", "{}");
  call("error_budget_cap", "POST", linear_path + "/goal", R"({"budget":500})");
  call("error_method", "GET", linear_path + "/goal");
  return calls;
}

// Structural equality with numbers compared to a relative tolerance.
inline bool json_close(const json& a, const json& b, double tol, std::string& where, const std::string& at = "") {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    if (std::abs(x - y) <= tol * std::max(1.0, std::max(std::abs(x), std::abs(y)))) return true;
    where = at + ": " + a.dump() + " vs " + b.dump();
    return false;
  }
  if (a.type() != b.type() || a.size() != b.size()) {
    where = at + ": " + a.dump().substr(0, 80) + " vs " + b.dump().substr(0, 80);
    return false;
  }
  if (a.is_object()) {
    for (const auto& [k, v] : a.items()) {
      if (!b.contains(k)) {
        where = at + "/" + k + ": missing";
        return false;
      }
      if (!json_close(v, b.at(k), tol, where, at + "/" + k)) return false;
    }
    return true;
  }
  if (a.is_array()) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!json_close(a[i], b[i], tol, where, at + "/" + std::to_string(i))) return false;
    }
    return true;
  }
  if (a != b) {
    where = at + ": " + a.dump() + " vs " + b.dump();
    return false;
  }
  return true;
}

struct GoldenOutcome {
  std::size_t compared = 0;
  std::size_t written = 0;
  std::vector<std::string> failures;
};

// Compares each call against <dir>/<name>.json; rewrites them instead when
// WHATIF_UPDATE_GOLDEN is set.
inline GoldenOutcome check_golden(const fs::path& dir, double tol = 1e-9) {
  GoldenOutcome out;
  const char* update = std::getenv("WHATIF_UPDATE_GOLDEN");
  const bool rewrite = update && std::string(update) == "1";
  for (const auto& c : run_golden_script()) {
    const json actual = call_record(c);
    const auto file = dir / (c.name + ".json");
    if (rewrite) {
      fs::create_directories(dir);
      std::ofstream(file) << actual.dump(2) << "\n";
      ++out.written;
      continue;
    }
    std::ifstream in(file);
    if (!in) {
      out.failures.push_back(c.name + ": golden file missing");
      continue;
    }
    json expected;
    try {
      expected = json::parse(in);
    } catch (const json::parse_error&) {
      out.failures.push_back(c.name + ": unreadable golden file");
      continue;
    }
    std::string where;
    if (!json_close(expected, actual, tol, where)) out.failures.push_back(c.name + where);
    if (actual.dump().find("NaN") != std::string::npos || actual.dump().find("null") != std::string::npos) {
      out.failures.push_back(c.name + ": non-finite or null value");
    }
    ++out.compared;
  }
  return out;
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliRun run_cli(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

// Runs the same analyses through the CLI and the HTTP service and returns a
// description of every response that differs.
inline std::vector<std::string> cli_http_mismatches(const fs::path& dir, UseCase use_case, std::size_t rows) {
  std::vector<std::string> problems;
  fs::create_directories(dir);
  const std::string name(to_string(use_case));
  const auto csv_path = (dir / (name + ".csv")).string();
  const auto model_path = (dir / (name + ".model.json")).string();
  const auto synth = generate_synthetic(use_case, rows, 5);
  const auto& kpi = synth.truth.kpi;
  std::vector<std::string> drivers;
  for (const auto& [d, c] : synth.truth.coefficients) drivers.push_back(d);

  auto cli_json = [&](const std::vector<std::string>& args) -> json {
    const auto r = run_cli(args);
    if (r.code != 0) {
      problems.push_back(args.front() + " exited " + std::to_string(r.code) + ": " + r.err);
      return json();
    }
    return json::parse(r.out);
  };
  auto expect_same = [&](const std::string& what, const json& cli, const json& http) {
    if (cli != http) problems.push_back(what + " differs");
  };

  const auto synth_run = run_cli({"synth", "--use-case", name, "--rows", std::to_string(rows), "--seed", "5", "--out", csv_path});
  if (synth_run.code != 0) return {"synth failed: " + synth_run.err};
  const std::string csv = read_text(csv_path);
  if (csv != synth.csv) problems.push_back("synth CSV differs from the generator");

  const json trained = cli_json({"train", "--data", csv_path, "--kpi", kpi, "--seed", "3", "--trees", "20", "--out", model_path});
  const json importance = cli_json({"importance", "--model", model_path, "--data", csv_path});

  Service svc;
  const auto up = svc.handle("POST", "/api/datasets", csv);
  if (up.status != 201) return {"upload failed: " + up.body.dump()};
  const auto session = svc.handle(
      "POST", "/api/sessions",
      json{{"dataset_id", up.body.at("dataset_id")}, {"kpi", kpi}, {"seed", 3}, {"hyper", {{"forest", {{"n_trees", 20}}}}}}
          .dump());
  if (session.status != 201) return {"session failed: " + session.body.dump()};
  const std::string base = "/api/sessions/" + session.body.at("session_id").get<std::string>();
  if (!trained.is_null()) {
    for (const char* key : {"dataset_id", "kpi", "kpi_kind", "drivers", "model_kind", "confidence", "baseline_kpi"}) {
      expect_same(std::string("train ") + key, trained.at(key), session.body.at(key));
    }
  }
  expect_same("importance", importance, session.body.at("importance"));

  const std::string d0 = drivers.at(0), d1 = drivers.at(1);
  expect_same("sensitivity",
              cli_json({"sensitivity", "--model", model_path, "--data", csv_path, "--perturb", d0 + ":pct:+40", "--perturb",
                        d1 + ":abs:-0.5"}),
              svc.handle("POST", base + "/sensitivity",
                         json{{"items",
                               {{{"driver", d0}, {"mode", "percentage"}, {"amount", 40}},
                                {{"driver", d1}, {"mode", "absolute"}, {"amount", -0.5}}}}}
                             .dump())
                  .body);
  expect_same("row sensitivity",
              cli_json({"sensitivity", "--model", model_path, "--data", csv_path, "--row", "7", "--perturb", d1 + ":abs:1"}),
              svc.handle("POST", base + "/rows/7/sensitivity",
                         json{{"items", {{{"driver", d1}, {"mode", "absolute"}, {"amount", 1}}}}}.dump())
                  .body);
  expect_same("sweep",
              cli_json({"sweep", "--model", model_path, "--data", csv_path, "--drivers", d0 + "," + d1, "--mode", "pct",
                        "--lo", "-50", "--hi", "50", "--steps", "5"}),
              svc.handle("POST", base + "/comparison",
                         json{{"drivers", {d0, d1}}, {"mode", "percentage"}, {"lo", -50}, {"hi", 50}, {"steps", 5}}.dump())
                  .body);
  expect_same("goal",
              cli_json({"goal", "--model", model_path, "--data", csv_path, "--objective", "max", "--constraint",
                        d0 + ":pct:40:80", "--budget", "15", "--n-init", "5", "--seed", "4"}),
              svc.handle("POST", base + "/goal",
                         json{{"objective", "maximize"},
                              {"constraints", {{{"driver", d0}, {"mode", "percentage"}, {"lo", 40}, {"hi", 80}}}},
                              {"budget", 15},
                              {"n_init", 5},
                              {"seed", 4}}
                             .dump())
                  .body);
  return problems;
}

}  // namespace whatif::testing
