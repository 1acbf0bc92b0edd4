#include "rareis/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rareis/dimred.hpp"
#include "rareis/stats.hpp"

namespace rareis {
namespace {

std::vector<double> weights_of(const ImportanceSample& sample) {
  std::vector<double> w(sample.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = std::exp(sample.log_weights[j]);
  return w;
}

// Log-slope of the weighted survival curve by a centred difference of width 2 s.
double log_survival_slope(const ImportanceSample& sample, double gamma_hat, double step, double confidence) {
  for (int halvings = 0; halvings < 40; ++halvings, step *= 0.5) {
    const double upper = weighted_exceedance(sample, gamma_hat + step, confidence).estimate;
    const double lower = weighted_exceedance(sample, gamma_hat - step, confidence).estimate;
    if (upper > 0.0 && lower > upper) return (std::log(lower) - std::log(upper)) / (2.0 * step);
  }
  return 0.0;
}

double survivor_spread(const ImportanceSample& sample, double gamma_hat) {
  std::vector<double> above;
  for (double r : sample.responses)
    if (r >= gamma_hat) above.push_back(r);
  const double sd = std::sqrt(sample_mean_variance(above).variance);
  return sd > 0.0 ? sd : 1e-3 * std::max(1.0, std::abs(gamma_hat));
}

}  // namespace

double weighted_upper_quantile(std::span<const double> responses, std::span<const double> weights, double p) {
  if (responses.empty() || responses.size() != weights.size())
    throw DomainError("weighted_upper_quantile: sizes differ or are zero");
  std::vector<std::size_t> order(responses.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return responses[a] > responses[b]; });
  const double target = p * static_cast<double>(responses.size());
  double mass = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    mass += weights[order[k]];
    // Ties share one survival value, so only stop at the end of a tie run.
    const bool tie_follows = k + 1 < order.size() && responses[order[k + 1]] == responses[order[k]];
    if (mass >= target && !tie_follows) return responses[order[k]];
  }
  return responses[order.back()];
}

QuantileRun estimate_quantile(Model& model, double p, const QuantileConfig& config, RngStream& rng) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("estimate_quantile: p must lie in (0, 1)");
  if (!(config.target > 0.0 && config.target < 1.0)) throw ConfigError("precision", "must lie in (0, 1)");
  if (config.batch < 1) throw ConfigError("batch", "must be >= 1");
  const ModelSpec& spec = model.spec();
  const double z = normal_critical_value(config.ladder.confidence);

  LadderConfig ladder_config = config.ladder;
  ladder_config.gamma = from_oriented(spec, std::numeric_limits<double>::infinity());
  ladder_config.stop_below_probability = p;
  RngStream ladder_rng = rng.substream(1);
  RngStream final_rng = rng.substream(2);

  LadderResult ladder = run_ladder(model, ladder_config, ladder_rng);
  QuantileRun run;
  run.trace = std::move(ladder.trace);

  // Initial guess from the last ladder batch, weighted back to the nominal law.
  const WeightedBatch& last = ladder.last_batch;
  const double prev_sq = last.theta_prev.squaredNorm();
  std::vector<double> last_weights(last.size());
  for (std::size_t j = 0; j < last.size(); ++j)
    last_weights[j] = std::exp(-last.points.row(static_cast<Eigen::Index>(j)).dot(last.theta_prev.transpose()) +
                               0.5 * prev_sq);
  const double gamma0 = weighted_upper_quantile(last.responses, last_weights, p);
  const WeightedBatch at_guess = last.with_threshold(gamma0);
  const ShiftSolution solution =
      run.trace.selected.empty()
          ? solve_optimal_shift(at_guess, ladder.theta, ladder_config.newton)
          : solve_optimal_shift_on(at_guess, run.trace.selected, ladder.theta, ladder_config.newton);

  ImportanceSample pooled;
  pooled.theta = solution.theta;
  QuantileReport& report = run.report;
  report.target_p = p;
  report.confidence = config.ladder.confidence;
  report.theta = solution.theta;
  report.exploration_runs = run.trace.runs();

  auto update = [&] {
    const std::vector<double> w = weights_of(pooled);
    const double gamma_hat = weighted_upper_quantile(pooled.responses, w, p);
    const ProbabilityEstimate pe = weighted_exceedance(pooled, gamma_hat, report.confidence);
    const double slope = log_survival_slope(pooled, gamma_hat, survivor_spread(pooled, gamma_hat), report.confidence);
    report.quantile = from_oriented(spec, gamma_hat);
    report.probability = pe.estimate;
    report.probability_relative_half_width = pe.relative_half_width;
    report.log_slope = slope;
    report.half_width = slope > 0.0 && pe.estimate > 0.0 ? z * (pe.std_error / pe.estimate) / slope
                                                          : std::numeric_limits<double>::infinity();
    report.relative_half_width =
        gamma_hat != 0.0 ? report.half_width / std::abs(gamma_hat) : std::numeric_limits<double>::infinity();
    report.final_runs = pooled.size();
    report.speedup = speedup(p, pe.relative_half_width, report.total_runs(), report.confidence);
  };

  while (true) {
    if (report.exploration_runs + pooled.size() + config.batch > config.max_runs) {
      if (pooled.size() > 0) update();
      report.converged = false;
      throw QuantileBudgetExhausted(std::move(run));
    }
    pooled.append(draw_importance_sample(model, solution.theta, config.batch, final_rng));
    update();
    if (report.probability > 0.0 && report.probability_relative_half_width <= config.target) {
      report.converged = true;
      return run;
    }
  }
}

}  // namespace rareis
