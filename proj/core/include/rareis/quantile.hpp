#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "rareis/errors.hpp"
#include "rareis/model.hpp"
#include "rareis/multilevel.hpp"
#include "rareis/rng.hpp"

namespace rareis {

struct QuantileConfig {
  LadderConfig ladder;  // gamma is ignored
  /// Stop once the relative 95% half-width of the exceedance probability at
  /// the current quantile estimate is <= target.
  double target = 0.10;
  std::size_t batch = 1000;
  std::size_t max_runs = 1'000'000;
};

struct QuantileReport {
  double quantile = 0.0;  // model units
  double half_width = std::numeric_limits<double>::infinity();
  double relative_half_width = std::numeric_limits<double>::infinity();  // half_width / |quantile|
  double target_p = 0.0;
  /// Weighted exceedance probability at the quantile and its relative half-width.
  double probability = 0.0;
  double probability_relative_half_width = std::numeric_limits<double>::infinity();
  /// d log S / d gamma at the quantile (oriented), from the centred difference.
  double log_slope = 0.0;
  std::size_t exploration_runs = 0;
  std::size_t final_runs = 0;
  double speedup = 0.0;
  double confidence = 0.95;
  ShiftVector theta;
  bool converged = false;

  std::size_t total_runs() const noexcept { return exploration_runs + final_runs; }
};

struct QuantileRun {
  QuantileReport report;
  LadderTrace trace;
};

class QuantileBudgetExhausted : public BudgetExhausted {
 public:
  explicit QuantileBudgetExhausted(QuantileRun partial) : partial_(std::move(partial)) {}
  const QuantileRun& partial() const noexcept { return partial_; }

 private:
  QuantileRun partial_;
};

/// Smallest sample value y with (1/n) sum_j w_j 1{r_j >= y} >= p, i.e. the
/// generalized inverse of the weighted survival function; n = responses.size().
/// Returns the minimum response when the total mass is below p.
double weighted_upper_quantile(std::span<const double> responses, std::span<const double> weights, double p);

/// Gamma(p) for the model's tail: P(h >= gamma) = p (right) or
/// P(h <= gamma) = p (left).
///
/// 1. Ladder with gamma = +inf until the intermediate estimate is <= p
///    (stream rng.substream(1)).
/// 2. Initial guess from the weighted quantile of the last ladder batch; the
///    shift is re-solved at that level.
/// 3. Final batches under that shift (stream rng.substream(2)) are pooled
///    and the weighted survival function is inverted at p until the
///    probability half-width meets config.target.
/// The CI on gamma is the probability CI mapped through the centred-difference
/// slope of log S at gamma +- one standard deviation of the responses above it.
/// Throws QuantileBudgetExhausted, MaxLevelsExceeded, DegenerateBatch.
QuantileRun estimate_quantile(Model& model, double p, const QuantileConfig& config, RngStream& rng);

}  // namespace rareis
