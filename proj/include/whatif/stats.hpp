#pragma once

#include <optional>
#include <span>
#include <vector>

namespace whatif::stats {

double mean(std::span<const double> x);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> x);
double sample_variance(std::span<const double> x);

// 1-based ranks; tied values share the mean of the positions they occupy.
std::vector<double> average_ranks(std::span<const double> x);

// Sample Pearson correlation. nullopt when either side is constant or the
// inputs are shorter than two; callers report that case as 0 with a flag.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Pearson correlation of average ranks.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

}  // namespace whatif::stats
