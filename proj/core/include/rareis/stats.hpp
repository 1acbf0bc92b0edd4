#pragma once

#include <cstddef>
#include <span>

namespace rareis {

/// log(sum_i exp(args[i])), shifted by the max so that nothing overflows.
/// Returns -inf for an empty range or an all -inf range.
double log_sum_exp(std::span<const double> args) noexcept;

struct MeanVariance {
  double mean = 0.0;
  /// Unbiased (n - 1) sample variance; 0 when fewer than two values.
  double variance = 0.0;
  std::size_t count = 0;
};

/// Two-pass mean and variance, summed in index order.
MeanVariance sample_mean_variance(std::span<const double> values) noexcept;

/// 1.96 for 95%; general two-sided normal critical value.
double normal_critical_value(double confidence);

}  // namespace rareis
