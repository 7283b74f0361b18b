#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace braim {

// Linear interpolation between order statistics (q in [0, 100]). Throws on empty input.
double percentile(std::vector<double> values, double q);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Two-sided Clopper-Pearson interval for k successes in n trials.
Interval clopper_pearson(std::size_t k, std::size_t n, double confidence = 0.95);

// P(Bin(n, p) >= k).
double binomial_upper_tail(std::size_t n, double p, std::size_t k);

// Population standard deviation over mean.
double coefficient_of_variation(std::span<const double> values);

}  // namespace braim
