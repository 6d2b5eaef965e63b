#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "whatif/service.hpp"
#include "whatif/stats.hpp"

namespace py = pybind11;
using namespace whatif;

namespace {

py::object to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return py::none();
    case json::value_t::boolean: return py::bool_(j.get<bool>());
    case json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
    case json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
    case json::value_t::number_float: return py::float_(j.get<double>());
    case json::value_t::string: return py::str(j.get_ref<const std::string&>());
    case json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(to_py(v));
      return out;
    }
    case json::value_t::object: {
      py::dict out;
      for (const auto& [k, v] : j.items()) out[py::str(k)] = to_py(v);
      return out;
    }
    default: throw py::type_error("unsupported JSON value");
  }
}

json from_py(py::handle h) {
  if (h.is_none()) return nullptr;
  if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
  if (py::isinstance<py::int_>(h)) {
    const auto v = h.cast<py::int_>();
    if (py::int_(0) <= v) return h.cast<std::uint64_t>();
    return h.cast<std::int64_t>();
  }
  if (py::isinstance<py::float_>(h)) return h.cast<double>();
  if (py::isinstance<py::str>(h)) return h.cast<std::string>();
  if (py::isinstance<py::dict>(h)) {
    json out = json::object();
    for (const auto& [k, v] : h.cast<py::dict>()) out[py::str(k).cast<std::string>()] = from_py(v);
    return out;
  }
  if (py::isinstance<py::list>(h) || py::isinstance<py::tuple>(h)) {
    json out = json::array();
    for (const auto& v : h) out.push_back(from_py(v));
    return out;
  }
  if (py::hasattr(h, "__index__")) return from_py(h.attr("__index__")());
  if (py::hasattr(h, "__float__")) return h.attr("__float__")().cast<double>();
  throw py::type_error("cannot convert " + py::repr(h).cast<std::string>() + " to JSON");
}

struct Bound {
  TrainedModel model;
  Matrix rows;
  Vector y;
};

Bound bind(const py::dict& model_json, const std::string& csv) {
  TrainedModel model = model_from_json(from_py(model_json));
  const Dataset ds = parse_csv(csv);
  Matrix rows = driver_matrix(ds, model.frame);
  Vector y = kpi_vector(ds, model.frame);
  return {std::move(model), std::move(rows), std::move(y)};
}

py::object finite(json j) {
  ensure_finite(j);
  return to_py(j);
}

}  // namespace

PYBIND11_MODULE(_whatif, m) {
  m.doc() = "What-if analysis engine";

  // Lives as long as the interpreter; carries .code and .kind.
  static PyObject* error_type = PyErr_NewException("whatif.WhatifError", PyExc_ValueError, nullptr);
  m.attr("WhatifError") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(error_type)(std::string(e.code()) + ": " + e.what());
      exc.attr("code") = std::string(e.code());
      exc.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error_type, exc.ptr());
    } catch (const json::exception& e) {
      PyErr_SetString(error_type, e.what());
    }
  });

  m.def("dataset_summary", [](const std::string& csv) { return to_py(dataset_summary(parse_csv(csv))); },
        py::arg("csv"), "Parse CSV text and return {dataset_id, schema, row_count, dropped_rows}.");

  m.def(
      "generate_synthetic",
      [](const std::string& use_case, std::size_t n_rows, std::uint64_t seed) {
        const auto data = generate_synthetic(parse_use_case(use_case), n_rows, seed);
        py::dict out;
        out["csv"] = data.csv;
        out["summary"] = to_py(dataset_summary(data.dataset));
        out["ground_truth"] = to_py(ground_truth_json(data.truth));
        return out;
      },
      py::arg("use_case"), py::arg("n_rows") = 500, py::arg("seed") = 0);

  m.def(
      "train",
      [](const std::string& csv, const std::string& kpi, std::optional<std::vector<std::string>> drivers,
         std::uint64_t seed, std::optional<py::dict> hyper) {
        const Dataset ds = parse_csv(csv);
        const auto frame = make_frame(ds, kpi, drivers.value_or(std::vector<std::string>{}));
        Hyperparameters h;
        if (hyper) h = from_py(*hyper).get<Hyperparameters>();
        return finite(model_to_json(train(ds, frame, h, seed)));
      },
      py::arg("csv"), py::arg("kpi"), py::arg("drivers") = py::none(), py::arg("seed") = 0,
      py::arg("hyper") = py::none(), "Train a model; returns the model as a dict.");

  m.def(
      "predict",
      [](const py::dict& model_json, const Eigen::Ref<const Matrix>& rows) {
        return predict(model_from_json(from_py(model_json)), rows);
      },
      py::arg("model"), py::arg("rows"),
      "Predictions for a (rows x drivers) array: values, or class-1 probabilities.");

  m.def(
      "kpi_value",
      [](const py::dict& model_json, const std::string& csv) {
        const auto b = bind(model_json, csv);
        return kpi_value(b.model, b.rows);
      },
      py::arg("model"), py::arg("csv"));

  m.def(
      "importance",
      [](const py::dict& model_json, const std::string& csv, std::size_t permutations,
         std::optional<std::uint64_t> seed) {
        const auto b = bind(model_json, csv);
        ShapleyOptions options;
        options.permutations = permutations;
        options.seed = seed.value_or(b.model.seed);
        return finite(importance_json(driver_importance(b.model, b.rows, b.y, options)));
      },
      py::arg("model"), py::arg("csv"), py::arg("permutations") = 20, py::arg("seed") = py::none());

  m.def(
      "sensitivity",
      [](const py::dict& model_json, const std::string& csv, const py::object& spec) {
        const auto b = bind(model_json, csv);
        return finite(sensitivity_response(b.model, b.rows, perturbation_spec_from_json(from_py(spec))));
      },
      py::arg("model"), py::arg("csv"), py::arg("spec"));

  m.def(
      "sweep",
      [](const py::dict& model_json, const std::string& csv, const py::dict& spec) {
        const auto b = bind(model_json, csv);
        return finite(comparison_response(b.model, b.rows, sweep_spec_from_json(from_py(spec))));
      },
      py::arg("model"), py::arg("csv"), py::arg("spec") = py::dict());

  m.def(
      "row_sensitivity",
      [](const py::dict& model_json, const std::string& csv, std::size_t row, const py::object& spec) {
        const auto b = bind(model_json, csv);
        return finite(row_sensitivity_response(b.model, b.rows, row, perturbation_spec_from_json(from_py(spec))));
      },
      py::arg("model"), py::arg("csv"), py::arg("row"), py::arg("spec"));

  m.def(
      "goal",
      [](const py::dict& model_json, const std::string& csv, const py::dict& spec) {
        const auto b = bind(model_json, csv);
        const auto goal_spec = goal_spec_from_json(from_py(spec));
        GoalResult result;
        {
          py::gil_scoped_release release;
          result = optimize_goal(b.model, b.rows, goal_spec);
        }
        return finite(goal_result_json(goal_spec, result));
      },
      py::arg("model"), py::arg("csv"), py::arg("spec"));

  m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return stats::pearson(x, y); });
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return stats::spearman(x, y); });

  py::class_<Service>(m, "Service", "In-process JSON API; handle() mirrors the HTTP routes.")
      .def(py::init([](std::size_t budget_cap, double timeout_s) {
             ServiceConfig config;
             config.goal_budget_cap = budget_cap;
             config.goal_timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000));
             return std::make_unique<Service>(config);
           }),
           py::arg("budget_cap") = 200, py::arg("timeout_s") = 120.0)
      .def(
          "handle",
          [](Service& s, const std::string& method, const std::string& path, const std::string& body) {
            ApiResponse res;
            {
              py::gil_scoped_release release;
              res = s.handle(method, path, body);
            }
            return py::make_tuple(res.status, to_py(res.body));
          },
          py::arg("method"), py::arg("path"), py::arg("body") = "");
}
