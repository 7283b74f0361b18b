#include "braim/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/beta.hpp>

#include "braim/error.hpp"

namespace braim {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidInput("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw InvalidInput("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= values.size()) return values.back();
  const double f = pos - static_cast<double>(i);
  return values[i] + f * (values[i + 1] - values[i]);
}

Interval clopper_pearson(std::size_t k, std::size_t n, double confidence) {
  if (n == 0 || k > n) throw InvalidInput("clopper_pearson: need 0 <= k <= n, n > 0");
  const double a = 0.5 * (1.0 - confidence);
  const double kd = static_cast<double>(k), nd = static_cast<double>(n);
  Interval r;
  r.lo = k == 0 ? 0.0 : boost::math::ibeta_inv(kd, nd - kd + 1.0, a);
  r.hi = k == n ? 1.0 : boost::math::ibeta_inv(kd + 1.0, nd - kd, 1.0 - a);
  return r;
}

double binomial_upper_tail(std::size_t n, double p, std::size_t k) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  return boost::math::ibeta(static_cast<double>(k), static_cast<double>(n - k + 1), p);
}

double coefficient_of_variation(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("coefficient_of_variation of an empty sample");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size())) / mean;
}

}  // namespace braim
