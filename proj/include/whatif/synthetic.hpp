#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "whatif/dataset.hpp"

namespace whatif {

enum class UseCase { marketing_mix, retention, deal_closing };

UseCase parse_use_case(std::string_view name);
std::string_view to_string(UseCase use_case) noexcept;

// Parameters the generator used; the oracle for recovery tests.
struct GroundTruth {
  UseCase use_case = UseCase::marketing_mix;
  std::size_t n_rows = 0;
  std::uint64_t seed = 0;
  std::string kpi;
  std::string link;  // "identity" (continuous KPI) or "logistic" (binary KPI)
  double intercept = 0.0;
  std::vector<std::pair<std::string, double>> coefficients;  // on the linear predictor
  double noise_sigma = 0.0;                                  // identity link only
};

struct SyntheticData {
  std::string csv;
  Dataset dataset;
  GroundTruth truth;
};

// Deterministic in (use_case, n_rows, seed). `csv` is the exact text that
// parse_csv turned into `dataset`.
SyntheticData generate_synthetic(UseCase use_case, std::size_t n_rows, std::uint64_t seed);

}  // namespace whatif
