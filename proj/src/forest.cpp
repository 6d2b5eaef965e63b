#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "whatif/error.hpp"
#include "whatif/model.hpp"
#include "whatif/random.hpp"

namespace whatif {

double gini_from_probability(double p1) noexcept { return 1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1); }

double gini(std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  const auto ones = std::count(labels.begin(), labels.end(), 1);
  return gini_from_probability(static_cast<double>(ones) / static_cast<double>(labels.size()));
}

double DecisionTree::predict_probability(std::span<const double> row) const {
  std::size_t node = 0;
  while (!nodes[node].is_leaf()) {
    const auto& n = nodes[node];
    node = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
  }
  return nodes[node].class1_probability;
}

namespace {

constexpr double kGainTolerance = 1e-12;

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const Vector& y, const ForestParams& params, int max_features, std::uint64_t seed)
      : x_(x), y_(y), params_(params), max_features_(max_features), rng_(seed), features_(static_cast<std::size_t>(x.cols())) {
    std::iota(features_.begin(), features_.end(), 0);
  }

  DecisionTree build(std::vector<Eigen::Index> samples) {
    grow(std::move(samples), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = kGainTolerance;
  };

  int grow(std::vector<Eigen::Index> samples, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const std::size_t n = samples.size();
    std::size_t ones = 0;
    for (auto s : samples) ones += y_(s) == 1.0 ? 1 : 0;
    tree_.nodes[id].samples = n;
    tree_.nodes[id].class1_probability = static_cast<double>(ones) / static_cast<double>(n);

    const bool pure = ones == 0 || ones == n;
    if (pure || depth >= params_.max_depth || n < 2 * static_cast<std::size_t>(params_.min_leaf)) return id;

    const Split split = best_split(samples, ones);
    if (split.feature < 0) return id;

    std::vector<Eigen::Index> left, right;
    for (auto s : samples) (x_(s, split.feature) < split.threshold ? left : right).push_back(s);
    samples.clear();
    samples.shrink_to_fit();

    tree_.nodes[id].feature = split.feature;
    tree_.nodes[id].threshold = split.threshold;
    const int l = grow(std::move(left), depth + 1);
    tree_.nodes[id].left = l;
    const int r = grow(std::move(right), depth + 1);
    tree_.nodes[id].right = r;
    return id;
  }

  Split best_split(const std::vector<Eigen::Index>& samples, std::size_t ones) {
    // Partial Fisher-Yates draws the candidate features; they are then
    // scanned in ascending index order so ties favour the lowest index.
    const std::size_t d = features_.size();
    const auto m = static_cast<std::size_t>(std::min<int>(max_features_, static_cast<int>(d)));
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, d - 1);
      std::swap(features_[i], features_[pick(rng_)]);
    }
    std::vector<int> candidates(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(candidates.begin(), candidates.end());

    const std::size_t n = samples.size();
    const double parent = gini_from_probability(static_cast<double>(ones) / static_cast<double>(n));
    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);
    Split best;
    for (int f : candidates) {
      scratch_.clear();
      for (auto s : samples) scratch_.emplace_back(x_(s, f), y_(s) == 1.0 ? 1 : 0);
      std::sort(scratch_.begin(), scratch_.end());
      std::size_t left_n = 0, left_ones = 0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        ++left_n;
        left_ones += static_cast<std::size_t>(scratch_[k].second);
        const double a = scratch_[k].first;
        const double b = scratch_[k + 1].first;
        if (a == b) continue;
        const std::size_t right_n = n - left_n;
        if (left_n < min_leaf || right_n < min_leaf) continue;
        const double gl = gini_from_probability(static_cast<double>(left_ones) / static_cast<double>(left_n));
        const double gr = gini_from_probability(static_cast<double>(ones - left_ones) / static_cast<double>(right_n));
        const double gain = parent - (static_cast<double>(left_n) * gl + static_cast<double>(right_n) * gr) /
                                         static_cast<double>(n);
        if (gain > best.gain + kGainTolerance || (best.feature < 0 && gain > best.gain)) {
          double threshold = std::midpoint(a, b);
          if (!(a < threshold)) threshold = b;
          best = Split{f, threshold, gain};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const Vector& y_;
  const ForestParams& params_;
  int max_features_;
  std::mt19937_64 rng_;
  std::vector<int> features_;
  std::vector<std::pair<double, int>> scratch_;
  DecisionTree tree_;
};

}  // namespace

Forest fit_forest(const Matrix& x, const Vector& labels, const ForestParams& params, std::uint64_t seed) {
  require(x.rows() == labels.size(), "shape_mismatch", "design matrix and labels differ in row count");
  require(x.rows() > 0, "empty_rows", "cannot fit a forest on zero rows");
  require(params.n_trees >= 1, "invalid_hyperparameter", "n_trees must be at least 1");
  const int d = static_cast<int>(x.cols());
  const int max_features = params.max_features > 0
                               ? std::min(params.max_features, d)
                               : std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d)))));
  const auto n = static_cast<std::size_t>(x.rows());

  Forest forest;
  forest.trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    const std::uint64_t tree_seed = derive_seed(seed, static_cast<std::uint64_t>(t));
    std::mt19937_64 sampler(derive_seed(tree_seed, "bootstrap"));
    std::vector<Eigen::Index> samples(n);
    if (params.bootstrap) {
      std::uniform_int_distribution<Eigen::Index> pick(0, static_cast<Eigen::Index>(n) - 1);
      for (auto& s : samples) s = pick(sampler);
    } else {
      std::iota(samples.begin(), samples.end(), Eigen::Index{0});
    }
    TreeBuilder builder(x, labels, params, max_features, derive_seed(tree_seed, "features"));
    forest.trees.push_back(builder.build(std::move(samples)));
  }
  return forest;
}

std::vector<double> gini_importance(const Forest& forest, std::size_t n_features) {
  std::vector<double> total(n_features, 0.0);
  if (forest.trees.empty()) return total;
  for (const auto& tree : forest.trees) {
    const double root = static_cast<double>(tree.nodes.front().samples);
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
      const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
      const double decrease = static_cast<double>(node.samples) * gini_from_probability(node.class1_probability) -
                              static_cast<double>(l.samples) * gini_from_probability(l.class1_probability) -
                              static_cast<double>(r.samples) * gini_from_probability(r.class1_probability);
      total.at(static_cast<std::size_t>(node.feature)) += decrease / root;
    }
  }
  for (auto& v : total) v /= static_cast<double>(forest.trees.size());
  return total;
}

}  // namespace whatif
