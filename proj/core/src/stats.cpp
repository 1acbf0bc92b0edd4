#include "rareis/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rareis/errors.hpp"
#include "rareis/normal.hpp"

namespace rareis {

double log_sum_exp(std::span<const double> args) noexcept {
  if (args.empty()) return -std::numeric_limits<double>::infinity();
  const double max_arg = *std::max_element(args.begin(), args.end());
  if (!std::isfinite(max_arg)) return max_arg;
  double sum = 0.0;
  for (double a : args) sum += std::exp(a - max_arg);
  return max_arg + std::log(sum);
}

MeanVariance sample_mean_variance(std::span<const double> values) noexcept {
  MeanVariance out;
  out.count = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.variance = ss / static_cast<double>(values.size() - 1);
  return out;
}

double normal_critical_value(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0))
    throw DomainError("confidence level must lie in (0, 1)");
  // The usual 1.96 rather than 1.959964 at 95%, so reports match the
  // conventional tables.
  if (confidence == 0.95) return 1.96;
  return std_normal_quantile(0.5 + 0.5 * confidence);
}

}  // namespace rareis
