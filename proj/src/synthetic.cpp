#include "whatif/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "whatif/error.hpp"
#include "whatif/random.hpp"

namespace whatif {

namespace {

struct CountDriver {
  const char* name;
  double rate;    // Poisson mean
  double weight;  // logit contribution per unit
};

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::string header_line(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out.push_back(',');
    out += names[i];
  }
  out.push_back('\n');
  return out;
}

SyntheticData marketing_mix(std::size_t n, std::uint64_t seed) {
  // Daily spend ranges (in $k) and sales per $k; standardized effects are
  // well separated: TV > Facebook > YouTube > Internet > Radio.
  struct Channel {
    const char* name;
    double max_spend;
    double coefficient;
  };
  static constexpr Channel channels[] = {
      {"Internet", 50.0, 0.10}, {"Facebook", 80.0, 0.15}, {"YouTube", 120.0, 0.07},
      {"TV", 300.0, 0.05},      {"Radio", 60.0, 0.03},
  };
  constexpr double intercept = 20.0;

  // Noise is a tenth of the noise-free response's population std.
  double signal_var = 0.0;
  for (const auto& ch : channels) signal_var += ch.coefficient * ch.coefficient * ch.max_spend * ch.max_spend / 12.0;
  const double sigma = 0.1 * std::sqrt(signal_var);

  std::mt19937_64 rng(derive_seed(seed, "marketing_mix"));
  std::normal_distribution<double> noise(0.0, sigma);

  GroundTruth truth;
  truth.use_case = UseCase::marketing_mix;
  truth.kpi = "sales";
  truth.link = "identity";
  truth.intercept = intercept;
  truth.noise_sigma = sigma;

  std::vector<std::string> header;
  for (const auto& ch : channels) {
    header.emplace_back(ch.name);
    truth.coefficients.emplace_back(ch.name, ch.coefficient);
  }
  header.emplace_back("sales");
  std::string csv = header_line(header);
  for (std::size_t r = 0; r < n; ++r) {
    double sales = intercept;
    for (const auto& ch : channels) {
      std::uniform_real_distribution<double> spend(0.0, ch.max_spend);
      const double x = std::round(spend(rng) * 100.0) / 100.0;
      sales += ch.coefficient * x;
      csv += format_number(x);
      csv.push_back(',');
    }
    sales += noise(rng);
    csv += format_number(std::round(sales * 1e4) / 1e4);
    csv.push_back('\n');
  }
  Dataset ds = parse_csv(csv);
  return SyntheticData{std::move(csv), std::move(ds), std::move(truth)};
}

SyntheticData count_classifier(UseCase use_case, std::size_t n, std::uint64_t seed, const char* id_column,
                               const char* id_prefix, const std::vector<CountDriver>& drivers,
                               const std::vector<std::pair<const char*, std::pair<double, double>>>& flags,
                               const char* kpi, double intercept) {
  std::mt19937_64 rng(derive_seed(seed, to_string(use_case)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  GroundTruth truth;
  truth.use_case = use_case;
  truth.kpi = kpi;
  truth.link = "logistic";
  truth.intercept = intercept;

  std::vector<std::string> header{id_column};
  for (const auto& d : drivers) {
    header.emplace_back(d.name);
    truth.coefficients.emplace_back(d.name, d.weight);
  }
  for (const auto& [name, pw] : flags) {
    header.emplace_back(name);
    truth.coefficients.emplace_back(name, pw.second);
  }
  header.emplace_back(kpi);
  std::string csv = header_line(header);

  char id[32];
  for (std::size_t r = 0; r < n; ++r) {
    std::snprintf(id, sizeof id, "%s-%05zu", id_prefix, r + 1);
    csv += id;
    double z = intercept;
    for (const auto& d : drivers) {
      std::poisson_distribution<int> count(d.rate);
      const int x = count(rng);
      z += d.weight * x;
      csv.push_back(',');
      csv += std::to_string(x);
    }
    for (const auto& [name, pw] : flags) {
      const int x = unit(rng) < pw.first ? 1 : 0;
      z += pw.second * x;
      csv.push_back(',');
      csv += std::to_string(x);
    }
    const int label = unit(rng) < logistic(z) ? 1 : 0;
    csv.push_back(',');
    csv += std::to_string(label);
    csv.push_back('\n');
  }
  Dataset ds = parse_csv(csv);
  return SyntheticData{std::move(csv), std::move(ds), std::move(truth)};
}

}  // namespace

UseCase parse_use_case(std::string_view name) {
  if (name == "marketing_mix") return UseCase::marketing_mix;
  if (name == "retention") return UseCase::retention;
  if (name == "deal_closing") return UseCase::deal_closing;
  fail(ErrorKind::invalid_input, "unknown_use_case", "unknown use case '" + std::string(name) + "'");
}

std::string_view to_string(UseCase use_case) noexcept {
  switch (use_case) {
    case UseCase::marketing_mix: return "marketing_mix";
    case UseCase::retention: return "retention";
    case UseCase::deal_closing: return "deal_closing";
  }
  return "marketing_mix";
}

SyntheticData generate_synthetic(UseCase use_case, std::size_t n_rows, std::uint64_t seed) {
  require(n_rows >= 10, "too_few_rows", "synthetic datasets need at least 10 rows");
  SyntheticData out = [&] {
    switch (use_case) {
      case UseCase::marketing_mix:
        return marketing_mix(n_rows, seed);
      case UseCase::deal_closing:
        return count_classifier(use_case, n_rows, seed, "Account", "ACCT",
                                {{"Chat", 2.0, 1.5},
                                 {"Meeting", 1.5, 0.1},
                                 {"Open Marketing Email", 3.0, 12.0},
                                 {"Renewal", 0.8, 9.0},
                                 {"Call", 2.0, 6.0},
                                 {"LinkedIn Contact", 2.0, 0.05},
                                 {"Initiate New Contact", 1.5, 0.08}},
                                {}, "Deal Closed?", -63.0);
      case UseCase::retention:
        return count_classifier(use_case, n_rows, seed, "Customer", "CUST",
                                {{"Help Chat", 2.0, -0.6},
                                 {"New Document", 4.0, 1.2},
                                 {"Add Visualization", 3.0, 0.9},
                                 {"Pivot", 1.0, 0.4},
                                 {"Join", 1.0, 1.5},
                                 {"Demo Meetings", 1.0, 0.3}},
                                {{"3+ Formulas in 2 Weeks", {0.4, 2.5}}}, "Retained6mo?", -9.0);
    }
    fail(ErrorKind::invalid_input, "unknown_use_case", "unknown use case");
  }();
  out.truth.n_rows = n_rows;
  out.truth.seed = seed;
  return out;
}

}  // namespace whatif
