#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "rareis/dimred.hpp"
#include "rareis/errors.hpp"
#include "rareis/gaussian_is.hpp"
#include "rareis/model.hpp"
#include "rareis/rng.hpp"

namespace rareis {

struct LadderConfig {
  std::size_t n = 1000;  // points per level
  double rho = 0.10;
  int max_levels = 30;
  double gamma = std::numeric_limits<double>::infinity();  // model units
  double confidence = 0.95;
  NewtonSettings newton;
  DimredConfig dimred;
  /// When > 0 the ladder also stops at the first level whose intermediate
  /// estimate is <= this probability. Used by the quantile search, which
  /// runs with gamma = +inf.
  double stop_below_probability = 0.0;

  /// Throws ConfigError.
  void validate() const;
};

/// One ladder iteration: the level reached, the shift solved at that level
/// and the intermediate estimate of P(oriented response >= level).
struct LevelRecord {
  int iteration = 0;
  std::size_t runs = 0;  // cumulative model evaluations
  double level = 0.0;    // model units
  ShiftVector theta;
  std::size_t survivors = 0;
  double estimate = 0.0;
  double relative_half_width = 0.0;
  int newton_iterations = 0;
  double gradient_norm = 0.0;
};

struct LadderTrace {
  std::vector<LevelRecord> levels;
  /// Coordinates the shift was restricted to; empty when the full space was used.
  std::vector<std::size_t> selected;

  std::size_t runs() const noexcept { return levels.empty() ? 0 : levels.back().runs; }
};

class MaxLevelsExceeded : public Error {
 public:
  MaxLevelsExceeded(const std::string& message, LadderTrace trace)
      : Error(message), trace_(std::move(trace)) {}
  const LadderTrace& trace() const noexcept { return trace_; }

 private:
  LadderTrace trace_;
};

/// min(gamma, r_(k)) where r_(0) <= ... <= r_(n-1) are the sorted responses
/// and k = ceil((1 - rho) n) clamped to n - 1, so that at least
/// ceil(rho n) - 1 responses lie at or above the level. With n = 100 and
/// rho = 0.1 this is the 91st smallest value. Throws DegenerateBatch when all
/// responses are equal and below gamma.
double next_level(std::span<const double> responses, double rho, double gamma);

struct LadderResult {
  ShiftVector theta;
  LadderTrace trace;
  /// The last level's batch (drawn under the shift that preceded it), with
  /// survivors flagged at the last level.
  WeightedBatch last_batch;
};

/// Adaptive level ladder: sample under the current shift, raise the level
/// to the (1 - rho) empirical quantile (capped at gamma), re-solve the shift
/// on the survivors, stop once the level equals gamma.
/// Throws MaxLevelsExceeded (carrying the trace) or DegenerateBatch.
LadderResult run_ladder(Model& model, const LadderConfig& config, RngStream& rng);

/// Responses (oriented) and log-weights -theta.x - |theta|^2/2 of a sample
/// drawn as x + theta, x ~ N(0, I).
struct ImportanceSample {
  ShiftVector theta;
  std::vector<double> responses;
  std::vector<double> log_weights;

  std::size_t size() const noexcept { return responses.size(); }
  void append(const ImportanceSample& more);
};

ImportanceSample draw_importance_sample(Model& model, const ShiftVector& theta, std::size_t m, RngStream& rng);

struct ProbabilityEstimate {
  double estimate = 0.0;
  double std_error = 0.0;  // of the mean
  double relative_half_width = std::numeric_limits<double>::infinity();
  std::size_t hits = 0;
};

/// Mean of 1{response >= threshold} w over the sample; threshold oriented.
ProbabilityEstimate weighted_exceedance(const ImportanceSample& sample, double oriented_threshold,
                                        double confidence = 0.95);

struct EstimateReport {
  double estimate = 0.0;
  double relative_half_width = std::numeric_limits<double>::infinity();
  double confidence = 0.95;
  std::size_t exploration_runs = 0;
  std::size_t final_runs = 0;
  double speedup = 0.0;
  ShiftVector theta;
  std::size_t hits = 0;
  bool converged = false;
  bool zero_hits = false;

  std::size_t total_runs() const noexcept { return exploration_runs + final_runs; }
};

/// Plain Monte Carlo run count for relative half-width eps at probability p:
/// z^2 (1 - p) / (p eps^2).
double plain_mc_runs(double p, double relative_half_width, double confidence = 0.95);

/// plain_mc_runs / runs_used; 0 when p or eps is unusable.
double speedup(double p, double relative_half_width, std::size_t runs_used, double confidence = 0.95);

/// S = (1/m) sum 1{h(x_j + theta) >= gamma} exp(-theta.x_j - |theta|^2/2) on a
/// fresh sample from `rng`. A sample without hits yields estimate 0 and
/// zero_hits = true.
EstimateReport estimate_probability(Model& model, double gamma, const ShiftVector& theta, std::size_t m,
                                    RngStream& rng, double confidence = 0.95);

struct PrecisionRun {
  EstimateReport report;
  LadderTrace trace;
  ImportanceSample final_sample;
};

class PrecisionBudgetExhausted : public BudgetExhausted {
 public:
  explicit PrecisionBudgetExhausted(PrecisionRun partial) : partial_(std::move(partial)) {}
  const PrecisionRun& partial() const noexcept { return partial_; }

 private:
  PrecisionRun partial_;
};

/// Ladder once (stream rng.substream(1)), then final batches of `batch`
/// points (stream rng.substream(2)) until the relative half-width is <=
/// target. Throws PrecisionBudgetExhausted when max_runs would be exceeded.
PrecisionRun estimate_to_precision(Model& model, double gamma, LadderConfig config, double target,
                                   std::size_t batch, RngStream& rng,
                                   std::size_t max_runs = 1'000'000);

}  // namespace rareis
