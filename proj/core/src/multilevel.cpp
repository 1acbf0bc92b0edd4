#include "rareis/multilevel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "rareis/normal.hpp"
#include "rareis/stats.hpp"

namespace rareis {
namespace {

constexpr int kStallLimit = 3;
constexpr double kStallFloor = 1e-9;

std::vector<double> oriented_values(const ModelSpec& spec, const std::vector<double>& raw) {
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = oriented_response(spec, raw[i]);
  return out;
}

// log of exp(-theta.x - |theta|^2/2) for y = x + theta, written in y.
double log_weight_at(const ShiftVector& theta, double theta_sq, const Eigen::Ref<const Vector>& y) {
  return -theta.dot(y) + 0.5 * theta_sq;
}

}  // namespace

void LadderConfig::validate() const {
  if (n < 100) throw ConfigError("n", "points per level must be >= 100");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho", "must lie in (0, 1)");
  if (max_levels < 1) throw ConfigError("max_levels", "must be >= 1");
  if (std::isnan(gamma)) throw ConfigError("gamma", "must not be NaN");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence", "must lie in (0, 1)");
  if (!(dimred.energy_threshold > 0.0 && dimred.energy_threshold <= 1.0))
    throw ConfigError("dimred.energy", "must lie in (0, 1]");
  if (dimred.max_selected < 1) throw ConfigError("dimred.max", "must be >= 1");
  if (stop_below_probability < 0.0 || stop_below_probability >= 1.0)
    throw ConfigError("stop_below_probability", "must lie in [0, 1)");
}

double next_level(std::span<const double> responses, double rho, double gamma) {
  if (responses.empty()) throw DomainError("next_level: empty responses");
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("next_level: rho must lie in (0, 1)");
  std::vector<double> sorted(responses.begin(), responses.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  if (sorted.front() == sorted.back() && sorted.back() < gamma)
    throw DegenerateBatch("all responses equal " + std::to_string(sorted.front()) + ", below the target level");
  // The 1e-9 absorbs rounding in (1 - rho) n for exact products such as 0.9 * 100.
  const double position = std::ceil((1.0 - rho) * static_cast<double>(n) - 1e-9);
  const auto k = std::min(n - 1, static_cast<std::size_t>(std::max(0.0, position)));
  return std::min(gamma, sorted[k]);
}

LadderResult run_ladder(Model& model, const LadderConfig& config, RngStream& rng) {
  config.validate();
  const ModelSpec& spec = model.spec();
  const std::size_t d = model.dim();
  const double target = oriented_threshold(spec, config.gamma);
  const double z = normal_critical_value(config.confidence);

  LadderResult result;
  result.theta = ShiftVector::Zero(static_cast<Eigen::Index>(d));
  std::optional<SubspaceSelection> selection;
  std::size_t runs = 0;
  int stalls = 0;
  double previous_level = -std::numeric_limits<double>::infinity();

  for (int k = 0; k < config.max_levels; ++k) {
    const ShiftVector& theta = result.theta;
    PointMatrix points = sample_std_normal_batch(rng, config.n, d);
    points.rowwise() += theta.transpose();
    std::vector<double> responses = oriented_values(spec, model.evaluate(points));
    runs += config.n;

    const double level = next_level(responses, config.rho, target);
    WeightedBatch batch = WeightedBatch::make(std::move(points), std::move(responses), level, theta);

    const double theta_sq = theta.squaredNorm();
    std::vector<double> terms(batch.size(), 0.0);
    for (std::size_t j = 0; j < batch.size(); ++j)
      if (batch.survivors[j])
        terms[j] = std::exp(log_weight_at(theta, theta_sq, batch.points.row(static_cast<Eigen::Index>(j)).transpose()));
    const MeanVariance mv = sample_mean_variance(terms);

    if (k == 0 && config.dimred.active_for(d)) {
      selection = select_important(batch, config.dimred);
      result.trace.selected = selection->indices;
    }
    const ShiftSolution solution = selection ? solve_shift_in_subspace(batch, *selection, theta, config.newton)
                                             : solve_optimal_shift(batch, theta, config.newton);

    LevelRecord record;
    record.iteration = k + 1;
    record.runs = runs;
    record.level = from_oriented(spec, level);
    record.theta = solution.theta;
    record.survivors = batch.survivor_count();
    record.estimate = mv.mean;
    record.relative_half_width =
        mv.mean > 0.0 ? z * std::sqrt(mv.variance / static_cast<double>(batch.size())) / mv.mean
                      : std::numeric_limits<double>::infinity();
    record.newton_iterations = solution.iterations;
    record.gradient_norm = solution.gradient_norm;
    result.trace.levels.push_back(record);

    const double scale = std::isfinite(target) ? std::abs(target) : std::abs(level);
    if (k > 0 && level - previous_level < kStallFloor * std::max(1.0, scale)) {
      if (++stalls >= kStallLimit)
        throw MaxLevelsExceeded("ladder stalled: level did not rise for " + std::to_string(kStallLimit) +
                                    " consecutive iterations",
                                std::move(result.trace));
    } else {
      stalls = 0;
    }
    previous_level = level;
    result.theta = solution.theta;
    result.last_batch = std::move(batch);

    if (level >= target) return result;
    if (config.stop_below_probability > 0.0 && mv.mean <= config.stop_below_probability) return result;
  }
  throw MaxLevelsExceeded("ladder did not reach the target level within " + std::to_string(config.max_levels) +
                              " levels",
                          std::move(result.trace));
}

void ImportanceSample::append(const ImportanceSample& more) {
  if (more.theta.size() != theta.size() || more.theta != theta)
    throw DomainError("cannot pool importance samples drawn under different shifts");
  responses.insert(responses.end(), more.responses.begin(), more.responses.end());
  log_weights.insert(log_weights.end(), more.log_weights.begin(), more.log_weights.end());
}

ImportanceSample draw_importance_sample(Model& model, const ShiftVector& theta, std::size_t m, RngStream& rng) {
  if (static_cast<std::size_t>(theta.size()) != model.dim()) throw DomainError("shift dimension differs from model");
  PointMatrix x = sample_std_normal_batch(rng, m, model.dim());
  ImportanceSample sample;
  sample.theta = theta;
  sample.log_weights.resize(m);
  const double half_sq = 0.5 * theta.squaredNorm();
  for (std::size_t j = 0; j < m; ++j)
    sample.log_weights[j] = -x.row(static_cast<Eigen::Index>(j)).dot(theta.transpose()) - half_sq;
  x.rowwise() += theta.transpose();
  sample.responses = oriented_values(model.spec(), model.evaluate(x));
  return sample;
}

ProbabilityEstimate weighted_exceedance(const ImportanceSample& sample, double oriented_threshold,
                                        double confidence) {
  ProbabilityEstimate out;
  if (sample.size() == 0) return out;
  std::vector<double> terms(sample.size(), 0.0);
  for (std::size_t j = 0; j < sample.size(); ++j) {
    if (sample.responses[j] >= oriented_threshold) {
      terms[j] = std::exp(sample.log_weights[j]);
      ++out.hits;
    }
  }
  const MeanVariance mv = sample_mean_variance(terms);
  out.estimate = mv.mean;
  out.std_error = std::sqrt(mv.variance / static_cast<double>(sample.size()));
  if (out.estimate > 0.0) out.relative_half_width = normal_critical_value(confidence) * out.std_error / out.estimate;
  return out;
}

double plain_mc_runs(double p, double relative_half_width, double confidence) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("plain_mc_runs: p must lie in (0, 1]");
  if (!(relative_half_width > 0.0)) throw DomainError("plain_mc_runs: precision must be positive");
  const double z = normal_critical_value(confidence);
  return z * z * (1.0 - p) / (p * relative_half_width * relative_half_width);
}

double speedup(double p, double relative_half_width, std::size_t runs_used, double confidence) {
  if (!(p > 0.0 && p <= 1.0) || !(relative_half_width > 0.0) || !std::isfinite(relative_half_width) ||
      runs_used == 0)
    return 0.0;
  return plain_mc_runs(p, relative_half_width, confidence) / static_cast<double>(runs_used);
}

namespace {

EstimateReport report_from(const ImportanceSample& sample, double oriented_gamma, double confidence,
                           std::size_t exploration_runs) {
  const ProbabilityEstimate pe = weighted_exceedance(sample, oriented_gamma, confidence);
  EstimateReport report;
  report.estimate = pe.estimate;
  report.relative_half_width = pe.relative_half_width;
  report.confidence = confidence;
  report.exploration_runs = exploration_runs;
  report.final_runs = sample.size();
  report.theta = sample.theta;
  report.hits = pe.hits;
  report.zero_hits = pe.hits == 0;
  report.speedup = speedup(pe.estimate, pe.relative_half_width, report.total_runs(), confidence);
  return report;
}

}  // namespace

EstimateReport estimate_probability(Model& model, double gamma, const ShiftVector& theta, std::size_t m,
                                    RngStream& rng, double confidence) {
  if (m < 1) throw DomainError("estimate_probability: m must be >= 1");
  const ImportanceSample sample = draw_importance_sample(model, theta, m, rng);
  EstimateReport report = report_from(sample, oriented_threshold(model.spec(), gamma), confidence, 0);
  report.converged = !report.zero_hits;
  return report;
}

PrecisionRun estimate_to_precision(Model& model, double gamma, LadderConfig config, double target,
                                   std::size_t batch, RngStream& rng, std::size_t max_runs) {
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("precision", "must lie in (0, 1)");
  if (batch < 1) throw ConfigError("batch", "must be >= 1");
  config.gamma = gamma;
  const double oriented_gamma = oriented_threshold(model.spec(), gamma);

  RngStream ladder_rng = rng.substream(1);
  RngStream final_rng = rng.substream(2);

  PrecisionRun run;
  LadderResult ladder = run_ladder(model, config, ladder_rng);
  run.trace = std::move(ladder.trace);
  const std::size_t exploration = run.trace.runs();
  run.final_sample.theta = ladder.theta;

  while (true) {
    if (exploration + run.final_sample.size() + batch > max_runs) {
      run.report = report_from(run.final_sample, oriented_gamma, config.confidence, exploration);
      run.report.converged = false;
      throw PrecisionBudgetExhausted(std::move(run));
    }
    run.final_sample.append(draw_importance_sample(model, ladder.theta, batch, final_rng));
    run.report = report_from(run.final_sample, oriented_gamma, config.confidence, exploration);
    if (!run.report.zero_hits && run.report.relative_half_width <= target) {
      run.report.converged = true;
      return run;
    }
  }
}

}  // namespace rareis
