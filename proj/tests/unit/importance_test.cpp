#include <algorithm>
#include <cmath>
#include <set>

#include "support.hpp"
#include "whatif/stats.hpp"

namespace whatif {
namespace {

using testing::linear_csv;

struct Fitted {
  Dataset dataset;
  TrainedModel model;
  Matrix x;
  Vector y;
};

Fitted fit(const std::string& csv, const std::string& kpi, std::uint64_t seed = 0, Hyperparameters h = {}) {
  auto ds = parse_csv(csv);
  const auto frame = make_frame(ds, kpi);
  auto model = train(ds, frame, h, seed);
  Matrix x = driver_matrix(ds, frame);
  Vector y = kpi_vector(ds, frame);
  return {std::move(ds), std::move(model), std::move(x), std::move(y)};
}

void expect_report_invariants(const ImportanceReport& r) {
  double max_abs = 0;
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    EXPECT_GE(r.entries[i].importance, -1.0);
    EXPECT_LE(r.entries[i].importance, 1.0);
    max_abs = std::max(max_abs, std::abs(r.entries[i].importance));
    if (i > 0) EXPECT_GE(r.entries[i - 1].importance, r.entries[i].importance);
  }
  if (max_abs > 0) EXPECT_DOUBLE_EQ(max_abs, 1.0);
  for (const auto& v : r.verification) {
    EXPECT_LE(std::abs(v.pearson), 1.0);
    EXPECT_LE(std::abs(v.spearman), 1.0);
  }
}

double importance_of(const ImportanceReport& r, const std::string& name) {
  for (const auto& e : r.entries) {
    if (e.driver == name) return e.importance;
  }
  ADD_FAILURE() << "no entry for " << name;
  return 0;
}

TEST(Importance, SignalAndNoiseDriver) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::string csv = "x1,x2,y\n";
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng), b = u(rng);
    csv += format_number(a) + "," + format_number(b) + "," + format_number(2 * a) + "\n";
  }
  const auto f = fit(csv, "y");
  const auto r = driver_importance(f.model, f.x, f.y, {});
  expect_report_invariants(r);
  EXPECT_EQ(r.entries[0].driver, "x1");
  // Independent standardized OLS via QR.
  Matrix design(f.x.rows(), 3);
  design.col(0).setOnes();
  design.rightCols(2) = f.x;
  const Vector beta = design.householderQr().solve(f.y);
  const double s1 = beta(1) * stats::stddev(std::span<const double>(f.x.col(0).data(), 200));
  const double s2 = beta(2) * stats::stddev(std::span<const double>(f.x.col(1).data(), 200));
  EXPECT_NEAR(importance_of(r, "x1"), 1.0, 1e-12);
  EXPECT_NEAR(importance_of(r, "x2"), s2 / s1, 1e-6);
  EXPECT_NEAR(importance_of(r, "x2"), 0.0, 1e-6);
}

TEST(Importance, SingleDriverIsUnit) {
  const auto f = fit(linear_csv(1, {-3}, 50, 2, 0.5), "y");
  const auto r = driver_importance(f.model, f.x, f.y, {});
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_DOUBLE_EQ(r.entries[0].importance, -1.0);
  EXPECT_FALSE(r.agreement.flagged);
}

TEST(Importance, LinearSignFollowsCoefficient) {
  const auto f = fit(linear_csv(0, {2, -4, 0.5, -1}, 300, 5, 0.1), "y");
  const auto raw = raw_importances(f.model, f.x, f.y);
  for (std::size_t j = 0; j < raw.size(); ++j) {
    EXPECT_EQ(std::signbit(raw[j]), std::signbit(f.model.linear().coefficients[j]));
  }
  const auto r = driver_importance(f.model, f.x, f.y, {});
  expect_report_invariants(r);
  EXPECT_EQ(r.entries.back().driver, "x2");
  EXPECT_DOUBLE_EQ(r.entries.back().importance, -1.0);
}

TEST(Importance, OrderingInvariantUnderColumnRescaling) {
  const auto csv = linear_csv(5, {1, -2, 3}, 200, 6, 0.3);
  const auto base = fit(csv, "y");
  const auto r0 = driver_importance(base.model, base.x, base.y, {});
  // Rescale x2 by 1000 and x3 by 0.01.
  std::string scaled = "x1,x2,x3,y\n";
  for (Eigen::Index i = 0; i < base.x.rows(); ++i) {
    scaled += format_number(base.x(i, 0)) + "," + format_number(base.x(i, 1) * 1000) + "," +
              format_number(base.x(i, 2) * 0.01) + "," + format_number(base.y(i)) + "\n";
  }
  const auto other = fit(scaled, "y");
  const auto r1 = driver_importance(other.model, other.x, other.y, {});
  for (std::size_t i = 0; i < r0.entries.size(); ++i) {
    EXPECT_EQ(r0.entries[i].driver, r1.entries[i].driver);
    EXPECT_NEAR(r0.entries[i].importance, r1.entries[i].importance, 1e-6);
  }
}

TEST(Importance, ForestSignsFollowPearson) {
  const auto data = generate_synthetic(UseCase::retention, 400, 2);
  const auto f = fit(data.csv, "Retained6mo?", 2);
  const auto raw = raw_importances(f.model, f.x, f.y);
  const auto mdi = gini_importance(f.model.forest(), raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) {
    EXPECT_NEAR(std::abs(raw[j]), mdi[j], 1e-15);
    const auto p = stats::pearson(std::span<const double>(f.x.col(static_cast<Eigen::Index>(j)).data(), 400),
                                  std::span<const double>(f.y.data(), 400));
    if (p && *p < 0 && mdi[j] > 0) EXPECT_LT(raw[j], 0);
    if (p && *p > 0 && mdi[j] > 0) EXPECT_GT(raw[j], 0);
  }
  const auto r = driver_importance(f.model, f.x, f.y, {});
  expect_report_invariants(r);
  EXPECT_LT(importance_of(r, "Help Chat"), 0.0);
}

TEST(Importance, DealClosingOrdering) {
  const auto data = generate_synthetic(UseCase::deal_closing, 500, 1);
  const auto f = fit(data.csv, "Deal Closed?", 1);
  ShapleyOptions options;
  options.seed = 1;
  const auto r = driver_importance(f.model, f.x, f.y, options);
  expect_report_invariants(r);
  const std::set<std::string> top{r.entries[0].driver, r.entries[1].driver, r.entries[2].driver};
  EXPECT_EQ(top, (std::set<std::string>{"Open Marketing Email", "Renewal", "Call"}));
  std::set<std::string> bottom;
  for (std::size_t i = 4; i < 7; ++i) bottom.insert(r.entries[i].driver);
  EXPECT_EQ(bottom, (std::set<std::string>{"LinkedIn Contact", "Initiate New Contact", "Meeting"}));
  EXPECT_EQ(r.entries[0].driver, "Open Marketing Email");
  EXPECT_FALSE(r.agreement.flagged);
}

TEST(Verify, IdenticalAndReversedRankings) {
  ImportanceReport r;
  for (int j = 0; j < 4; ++j) {
    const std::string name = "d" + std::to_string(j);
    r.entries.push_back({name, 1.0 - 0.25 * j});
    r.verification.push_back({name, 0, 0, 0.4 - 0.1 * j, true});
  }
  auto a = verify_importances(r);
  EXPECT_DOUBLE_EQ(a.spearman_rank_agreement, 1.0);
  EXPECT_FALSE(a.flagged);
  for (int j = 0; j < 4; ++j) r.verification[static_cast<std::size_t>(j)].shapley = 0.1 * j;
  a = verify_importances(r);
  EXPECT_DOUBLE_EQ(a.spearman_rank_agreement, -1.0);
  EXPECT_TRUE(a.flagged);
}

TEST(Verify, SyntheticLinearAgreement) {
  const auto f = fit(linear_csv(0, {5, -3, 1, 0.2}, 400, 8, 1.0), "y");
  const auto r = driver_importance(f.model, f.x, f.y, {});
  EXPECT_GE(r.agreement.spearman_rank_agreement, 0.5);
  EXPECT_FALSE(r.agreement.flagged);
}

TEST(Shapley, SingleDriverEqualsScoreGain) {
  const auto f = fit(linear_csv(2, {1.5}, 80, 9, 2.0), "y");
  ShapleyOptions options;
  options.permutations = 3;
  const auto s = shapley_performance(f.x, f.y, f.model.frame, f.model.hyper, options);
  const double full = cross_validate(f.x, f.y, KpiKind::continuous, f.model.hyper, options.seed).mean;
  ASSERT_EQ(s.values.size(), 1u);
  EXPECT_NEAR(s.values[0], full - 0.0, 1e-12);
  EXPECT_NEAR(coalition_score(f.x, f.y, KpiKind::continuous, f.model.hyper, 0, {true}), full, 1e-15);
  EXPECT_EQ(coalition_score(f.x, f.y, KpiKind::continuous, f.model.hyper, 0, {false}), 0.0);
}

TEST(Shapley, EmptyCoalitionScore) {
  Vector y(5);
  y << 1, 0, 1, 1, 0;
  EXPECT_DOUBLE_EQ(empty_coalition_score(KpiKind::discrete, y), 0.6);
  EXPECT_DOUBLE_EQ(empty_coalition_score(KpiKind::continuous, y), 0.0);
}

double exact_two_driver(const Fitted& f, std::uint64_t seed, int driver) {
  const auto& h = f.model.hyper;
  const auto kind = f.model.frame.kpi_kind;
  const double s0 = coalition_score(f.x, f.y, kind, h, seed, {false, false});
  const double s1 = coalition_score(f.x, f.y, kind, h, seed, {true, false});
  const double s2 = coalition_score(f.x, f.y, kind, h, seed, {false, true});
  const double s12 = coalition_score(f.x, f.y, kind, h, seed, {true, true});
  return driver == 0 ? 0.5 * ((s1 - s0) + (s12 - s2)) : 0.5 * ((s2 - s0) + (s12 - s1));
}

TEST(Shapley, TwoDriverMonteCarloNearExact) {
  const auto f = fit(linear_csv(1, {3, 1}, 120, 10, 2.0), "y");
  ShapleyOptions options;
  options.permutations = 400;
  options.seed = 4;
  const auto mc = shapley_performance(f.x, f.y, f.model.frame, f.model.hyper, options);
  options.exact = true;
  const auto exact = shapley_performance(f.x, f.y, f.model.frame, f.model.hyper, options);
  for (int j = 0; j < 2; ++j) {
    const double oracle = exact_two_driver(f, 4, j);
    EXPECT_NEAR(exact.values[static_cast<std::size_t>(j)], oracle, 1e-12);
    // Only two orders exist; the estimate mixes their marginals.
    EXPECT_NEAR(mc.values[static_cast<std::size_t>(j)], oracle, 0.05);
  }
}

TEST(Shapley, ExactEfficiency) {
  const auto lin = fit(linear_csv(1, {3, -1, 0.5, 2}, 100, 11, 1.0), "y");
  ShapleyOptions options;
  options.exact = true;
  const auto s = shapley_performance(lin.x, lin.y, lin.model.frame, lin.model.hyper, options);
  double sum = 0;
  for (double v : s.values) sum += v;
  EXPECT_NEAR(sum, s.score_all - s.score_none, 1e-9);

  const auto data = generate_synthetic(UseCase::deal_closing, 120, 4);
  Hyperparameters h;
  h.forest.n_trees = 10;
  auto ds = parse_csv(data.csv);
  const auto frame = make_frame(ds, "Deal Closed?", {"Open Marketing Email", "Renewal"});
  const Matrix x = driver_matrix(ds, frame);
  const Vector y = kpi_vector(ds, frame);
  for (const auto mode : {Neutralization::retrain, Neutralization::impute}) {
    options.neutralization = mode;
    const auto fs = shapley_performance(x, y, frame, h, options);
    EXPECT_NEAR(fs.values[0] + fs.values[1], fs.score_all - fs.score_none, 1e-9);
    EXPECT_DOUBLE_EQ(fs.score_none, empty_coalition_score(KpiKind::discrete, y));
  }
}

TEST(Shapley, NoiseDriverNearZero) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  std::string csv = "signal,noise,y\n";
  for (int i = 0; i < 150; ++i) {
    const double a = u(rng);
    csv += format_number(a) + "," + format_number(u(rng)) + "," + format_number(4 * a - 1) + "\n";
  }
  const auto f = fit(csv, "y");
  ShapleyOptions options;
  options.permutations = 30;
  const auto s = shapley_performance(f.x, f.y, f.model.frame, f.model.hyper, options);
  EXPECT_LT(std::abs(s.values[1]), 0.05);
  EXPECT_NEAR(s.values[0], 1.0, 0.05);
}

TEST(Shapley, DeterministicAndNeutralizationChoice) {
  const auto f = fit(linear_csv(1, {1, 2, 3}, 60, 13, 1.0), "y");
  ShapleyOptions options;
  options.seed = 77;
  const auto a = shapley_performance(f.x, f.y, f.model.frame, f.model.hyper, options);
  const auto b = shapley_performance(f.x, f.y, f.model.frame, f.model.hyper, options);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.neutralization, Neutralization::retrain);
  options.retrain_work_budget = 0;
  EXPECT_EQ(shapley_performance(f.x, f.y, f.model.frame, f.model.hyper, options).neutralization,
            Neutralization::impute);
}

}  // namespace
}  // namespace whatif
