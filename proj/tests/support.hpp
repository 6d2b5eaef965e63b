#pragma once

#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "whatif/error.hpp"
#include "whatif/goalseek.hpp"
#include "whatif/importance.hpp"
#include "whatif/json_io.hpp"
#include "whatif/model.hpp"
#include "whatif/sensitivity.hpp"
#include "whatif/synthetic.hpp"

namespace whatif::testing {

// Runs `fn` and returns the code of the whatif::Error it throws, or "" if none.
template <class Fn>
std::string error_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

template <class Fn>
ErrorKind error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a whatif::Error";
  return ErrorKind::invalid_input;
}

// Columns x1..xd uniform on [0, 10) and y = intercept + sum coef_j x_j + noise.
inline std::string linear_csv(double intercept, const std::vector<double>& coefs, std::size_t n, std::uint64_t seed,
                              double noise_sigma = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 10.0);
  std::normal_distribution<double> noise(0.0, noise_sigma > 0 ? noise_sigma : 1.0);
  std::string csv;
  for (std::size_t j = 0; j < coefs.size(); ++j) csv += "x" + std::to_string(j + 1) + ",";
  csv += "y\n";
  for (std::size_t r = 0; r < n; ++r) {
    double y = intercept;
    for (double c : coefs) {
      const double x = unit(rng);
      y += c * x;
      csv += format_number(x) + ",";
    }
    if (noise_sigma > 0) y += noise(rng);
    csv += format_number(y) + "\n";
  }
  return csv;
}

inline AnalysisFrame frame_for(std::size_t drivers, KpiKind kind, std::vector<ColumnKind> driver_kinds = {}) {
  AnalysisFrame f;
  f.dataset_id = "ds-test";
  f.kpi = "y";
  f.kpi_kind = kind;
  for (std::size_t j = 0; j < drivers; ++j) f.drivers.push_back("x" + std::to_string(j + 1));
  f.driver_kinds = driver_kinds.empty() ? std::vector<ColumnKind>(drivers, ColumnKind::numeric) : driver_kinds;
  return f;
}

inline TrainedModel linear_model(double intercept, std::vector<double> coefs) {
  TrainedModel m;
  m.frame = frame_for(coefs.size(), KpiKind::continuous);
  m.fit = LinearFit{intercept, std::move(coefs)};
  m.confidence = 1.0;
  return m;
}

// One tree, one split: x1 < threshold -> class-1 probability 0, else 1.
inline TrainedModel stump_model(double threshold, std::size_t drivers = 1) {
  TrainedModel m;
  m.frame = frame_for(drivers, KpiKind::discrete);
  DecisionTree tree;
  tree.nodes = {TreeNode{0, threshold, 1, 2, 10, 0.5}, TreeNode{-1, 0.0, -1, -1, 5, 0.0},
                TreeNode{-1, 0.0, -1, -1, 5, 1.0}};
  m.fit = Forest{{tree}};
  m.confidence = 1.0;
  return m;
}

inline Matrix column(std::initializer_list<double> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

}  // namespace whatif::testing
