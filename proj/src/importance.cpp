#include "whatif/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include "whatif/error.hpp"
#include "whatif/random.hpp"
#include "whatif/stats.hpp"

namespace whatif {

namespace {

constexpr std::size_t kMaxExactDrivers = 8;
constexpr std::size_t kMaxRetrainDrivers = 8;

std::span<const double> column_span(const Matrix& x, Eigen::Index j) {
  return {x.col(j).data(), static_cast<std::size_t>(x.rows())};
}

std::span<const double> vector_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

using Mask = std::uint64_t;

Matrix impute_excluded(const Matrix& x, const Eigen::RowVectorXd& means, Mask mask) {
  Matrix out = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (!(mask >> j & 1U)) out.col(j).setConstant(means(j));
  }
  return out;
}

// Evaluates coalition scores with caching. Retrain mode fits a fresh CV model
// per coalition; impute mode reuses k fold models trained on all drivers.
class CoalitionScorer {
 public:
  CoalitionScorer(const Matrix& x, const Vector& y, KpiKind kind, const Hyperparameters& hyper, std::uint64_t seed,
                  Neutralization mode)
      : x_(x), y_(y), kind_(kind), hyper_(hyper), seed_(seed), mode_(mode), none_(empty_coalition_score(kind, y)) {
    if (mode_ == Neutralization::impute) prepare_folds();
  }

  double operator()(Mask mask) {
    if (mask == 0) return none_;
    if (auto it = cache_.find(mask); it != cache_.end()) return it->second;
    const double s = mode_ == Neutralization::retrain ? retrained(mask) : imputed(mask);
    cache_.emplace(mask, s);
    return s;
  }

 private:
  double retrained(Mask mask) const {
    const Matrix xi = impute_excluded(x_, x_.colwise().mean(), mask);
    return cross_validate(xi, y_, kind_, hyper_, seed_).mean;
  }

  void prepare_folds() {
    const auto n = static_cast<std::size_t>(x_.rows());
    const auto k = static_cast<std::size_t>(hyper_.cv_folds);
    require(n >= 2 * k, "too_few_rows", "too few rows for cross-validation");
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(derive_seed(seed_, "cv-folds"));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t f = 0; f < k; ++f) {
      Fold fold;
      const std::size_t lo = f * n / k, hi = (f + 1) * n / k;
      std::vector<Eigen::Index> fit_rows;
      for (std::size_t i = 0; i < n; ++i) {
        if (i >= lo && i < hi) fold.test.push_back(order[i]);
        else fit_rows.push_back(order[i]);
      }
      Matrix x_fit(static_cast<Eigen::Index>(fit_rows.size()), x_.cols());
      Vector y_fit(static_cast<Eigen::Index>(fit_rows.size()));
      for (std::size_t i = 0; i < fit_rows.size(); ++i) {
        x_fit.row(static_cast<Eigen::Index>(i)) = x_.row(fit_rows[i]);
        y_fit(static_cast<Eigen::Index>(i)) = y_(fit_rows[i]);
      }
      fold.fit_means = x_fit.colwise().mean();
      fold.model.frame.kpi_kind = kind_;
      fold.model.frame.drivers.resize(static_cast<std::size_t>(x_.cols()));
      if (kind_ == KpiKind::continuous) {
        fold.model.fit = fit_linear(x_fit, y_fit, hyper_.linear.ridge_lambda);
      } else {
        fold.model.fit = fit_forest(x_fit, y_fit, hyper_.forest, derive_seed(derive_seed(seed_, "cv-model"), f));
      }
      fold.x_test.resize(static_cast<Eigen::Index>(fold.test.size()), x_.cols());
      fold.y_test.resize(static_cast<Eigen::Index>(fold.test.size()));
      for (std::size_t i = 0; i < fold.test.size(); ++i) {
        fold.x_test.row(static_cast<Eigen::Index>(i)) = x_.row(fold.test[i]);
        fold.y_test(static_cast<Eigen::Index>(i)) = y_(fold.test[i]);
      }
      folds_.push_back(std::move(fold));
    }
  }

  double imputed(Mask mask) const {
    double total = 0.0;
    for (const auto& fold : folds_) {
      const Matrix xi = impute_excluded(fold.x_test, fold.fit_means, mask);
      total += score_predictions(kind_, fold.y_test, predict(fold.model, xi));
    }
    return total / static_cast<double>(folds_.size());
  }

  struct Fold {
    std::vector<Eigen::Index> test;
    Eigen::RowVectorXd fit_means;
    TrainedModel model;
    Matrix x_test;
    Vector y_test;
  };

  const Matrix& x_;
  const Vector& y_;
  KpiKind kind_;
  const Hyperparameters& hyper_;
  std::uint64_t seed_;
  Neutralization mode_;
  double none_;
  std::vector<Fold> folds_;
  std::unordered_map<Mask, double> cache_;
};

Neutralization choose_neutralization(const ShapleyOptions& options, KpiKind kind, const Hyperparameters& hyper,
                                     std::size_t d, std::size_t n) {
  if (options.neutralization != Neutralization::automatic) return options.neutralization;
  if (d > kMaxRetrainDrivers) return Neutralization::impute;
  const double coalitions =
      options.exact ? std::ldexp(1.0, static_cast<int>(d))
                    : std::min(std::ldexp(1.0, static_cast<int>(d)), static_cast<double>(options.permutations * d + 1));
  const double per_fit = kind == KpiKind::discrete ? static_cast<double>(hyper.forest.n_trees) : 1.0;
  const double work = coalitions * hyper.cv_folds * per_fit * static_cast<double>(n);
  return work <= options.retrain_work_budget ? Neutralization::retrain : Neutralization::impute;
}

}  // namespace

double empty_coalition_score(KpiKind kind, const Vector& y) {
  if (kind == KpiKind::continuous || y.size() == 0) return 0.0;
  const double p = y.mean();
  return std::max(p, 1.0 - p);
}

double coalition_score(const Matrix& x, const Vector& y, KpiKind kind, const Hyperparameters& hyper,
                       std::uint64_t seed, const std::vector<bool>& included) {
  require(included.size() == static_cast<std::size_t>(x.cols()), "width_mismatch", "coalition mask width mismatch");
  Mask mask = 0;
  for (std::size_t j = 0; j < included.size(); ++j) {
    if (included[j]) mask |= Mask{1} << j;
  }
  if (mask == 0) return empty_coalition_score(kind, y);
  return cross_validate(impute_excluded(x, x.colwise().mean(), mask), y, kind, hyper, seed).mean;
}

ShapleyResult shapley_performance(const Matrix& x, const Vector& y, const AnalysisFrame& frame,
                                  const Hyperparameters& hyper, const ShapleyOptions& options) {
  hyper.validate();
  const auto d = static_cast<std::size_t>(x.cols());
  require(d == frame.driver_count(), "width_mismatch", "design matrix width does not match the driver count");
  require(d <= 63, "too_many_drivers", "Shapley attribution supports at most 63 drivers");
  require(options.exact || options.permutations >= 1, "invalid_permutations", "permutation count must be at least 1");
  require(!options.exact || d <= kMaxExactDrivers, "too_many_drivers",
          "exact Shapley enumeration supports at most " + std::to_string(kMaxExactDrivers) + " drivers");

  ShapleyResult result;
  result.exact = options.exact;
  result.neutralization = choose_neutralization(options, frame.kpi_kind, hyper, d, static_cast<std::size_t>(x.rows()));
  CoalitionScorer score(x, y, frame.kpi_kind, hyper, options.seed, result.neutralization);
  result.values.assign(d, 0.0);

  auto accumulate = [&](const std::vector<std::size_t>& order) {
    Mask prefix = 0;
    double before = score(prefix);
    for (std::size_t j : order) {
      const Mask with = prefix | (Mask{1} << j);
      const double after = score(with);
      result.values[j] += after - before;
      prefix = with;
      before = after;
    }
  };

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t count = 0;
  if (options.exact) {
    do {
      accumulate(order);
      ++count;
    } while (std::next_permutation(order.begin(), order.end()));
  } else {
    for (std::size_t p = 0; p < options.permutations; ++p) {
      std::mt19937_64 rng(derive_seed(derive_seed(options.seed, "shapley-permutation"), p));
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      accumulate(order);
      ++count;
    }
  }
  for (auto& v : result.values) v /= static_cast<double>(count);
  result.score_none = score(0);
  result.score_all = d == 0 ? result.score_none : score((Mask{1} << d) - 1);
  return result;
}

std::vector<double> raw_importances(const TrainedModel& model, const Matrix& x, const Vector& y) {
  const auto d = model.frame.driver_count();
  require(static_cast<std::size_t>(x.cols()) == d, "frame_mismatch", "data columns do not match the model's drivers");
  require(x.rows() == y.size(), "shape_mismatch", "design matrix and KPI differ in row count");
  std::vector<double> raw(d, 0.0);
  if (model.kind() == ModelKind::linear) {
    const auto& coef = model.linear().coefficients;
    for (std::size_t j = 0; j < d; ++j) raw[j] = coef[j] * stats::stddev(column_span(x, static_cast<Eigen::Index>(j)));
    return raw;
  }
  const auto mdi = gini_importance(model.forest(), d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto r = stats::pearson(column_span(x, static_cast<Eigen::Index>(j)), vector_span(y));
    raw[j] = (r && *r < 0.0) ? -mdi[j] : mdi[j];
  }
  return raw;
}

Agreement verify_importances(const ImportanceReport& report) {
  Agreement agreement;
  const std::size_t d = report.verification.size();
  if (d < 2) return agreement;  // a single driver trivially agrees
  std::vector<double> imp(d, 0.0), shap(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    const auto& v = report.verification[j];
    const auto it = std::find_if(report.entries.begin(), report.entries.end(),
                                 [&](const ImportanceEntry& e) { return e.driver == v.driver; });
    if (it != report.entries.end()) imp[j] = std::abs(it->importance);
    shap[j] = std::abs(v.shapley);
  }
  const auto rho = stats::spearman(imp, shap);
  agreement.spearman_rank_agreement = rho.value_or(0.0);
  agreement.flagged = agreement.spearman_rank_agreement < 0.5;
  return agreement;
}

ImportanceReport driver_importance(const TrainedModel& model, const Matrix& x, const Vector& y,
                                   const ShapleyOptions& options) {
  const auto& frame = model.frame;
  const auto raw = raw_importances(model, x, y);
  double scale = 0.0;
  for (double v : raw) scale = std::max(scale, std::abs(v));

  ImportanceReport report;
  for (std::size_t j = 0; j < raw.size(); ++j) {
    const double v = scale > 0.0 ? std::clamp(raw[j] / scale, -1.0, 1.0) : 0.0;
    report.entries.push_back({frame.drivers[j], v});
  }
  std::stable_sort(report.entries.begin(), report.entries.end(),
                   [](const ImportanceEntry& a, const ImportanceEntry& b) { return a.importance > b.importance; });

  const auto shapley = shapley_performance(x, y, frame, model.hyper, options);
  report.shapley_neutralization = shapley.neutralization == Neutralization::retrain ? "retrain" : "impute";
  for (std::size_t j = 0; j < raw.size(); ++j) {
    DriverVerification v;
    v.driver = frame.drivers[j];
    const auto xs = column_span(x, static_cast<Eigen::Index>(j));
    const auto p = stats::pearson(xs, vector_span(y));
    const auto s = stats::spearman(xs, vector_span(y));
    v.correlation_defined = p.has_value() && s.has_value();
    v.pearson = p.value_or(0.0);
    v.spearman = s.value_or(0.0);
    v.shapley = shapley.values[j];
    report.verification.push_back(std::move(v));
  }
  report.agreement = verify_importances(report);
  return report;
}

ImportanceReport driver_importance(const TrainedModel& model, const Dataset& dataset, const ShapleyOptions& options) {
  return driver_importance(model, driver_matrix(dataset, model.frame), kpi_vector(dataset, model.frame), options);
}

}  // namespace whatif
