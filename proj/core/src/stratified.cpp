#include "rareis/stratified.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rareis/normal.hpp"
#include "rareis/stats.hpp"

namespace rareis {

double normal_interval_mass(double a, double b) noexcept {
  if (a >= 0.0) return std_normal_sf(a) - std_normal_sf(b);
  return std_normal_cdf(b) - std_normal_cdf(a);
}

StrataSpec StrataSpec::make(Vector direction, std::vector<double> levels) {
  if (direction.size() < 1) throw DomainError("strata direction is empty");
  if (std::abs(direction.norm() - 1.0) > 1e-12) throw DomainError("strata direction must have unit norm");
  if (levels.size() < 2) throw DomainError("strata need at least two levels");
  if (levels.front() != -std::numeric_limits<double>::infinity() ||
      levels.back() != std::numeric_limits<double>::infinity())
    throw DomainError("strata levels must start at -inf and end at +inf");
  StrataSpec spec;
  spec.direction = std::move(direction);
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (!(levels[i - 1] < levels[i])) throw DomainError("strata levels must increase strictly");
    const double mass = normal_interval_mass(levels[i - 1], levels[i]);
    if (!(mass > 0.0)) throw DomainError("stratum " + std::to_string(i - 1) + " has zero probability");
    spec.weights.push_back(mass);
  }
  spec.levels = std::move(levels);
  return spec;
}

StrataSpec strata_from_shift(const ShiftVector& theta, std::size_t count) {
  if (count < 2) throw DomainError("strata_from_shift: need at least two strata");
  const double norm = theta.norm();
  if (!(norm > 0.0)) throw DomainError("strata_from_shift: zero shift has no direction");
  StrataSpec spec;
  spec.direction = theta / norm;
  spec.levels.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 1; i < count; ++i)
    spec.levels.push_back(std_normal_quantile(static_cast<double>(i) / static_cast<double>(count)));
  spec.levels.push_back(std::numeric_limits<double>::infinity());
  spec.weights.assign(count, 1.0 / static_cast<double>(count));
  return spec;
}

namespace {

double clamp_probability(double q) {
  return std::clamp(q, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

// Z ~ N(0, 1) conditioned on [a, b]. For a >= 0 the inversion runs on the
// upper tail, S(z) = Phi(-z), so that intervals far out keep full precision.
double truncated_normal(double a, double b, double mass, RngStream& rng) {
  const double u = rng.uniform();
  const double z = a >= 0.0 ? -std_normal_quantile(clamp_probability(std_normal_sf(b) + u * mass))
                            : std_normal_quantile(clamp_probability(std_normal_cdf(a) + u * mass));
  return std::clamp(z, a, b);
}

double checked_mass(const Vector& u, double a, double b) {
  if (!(a < b)) throw DomainError("conditional sample needs a < b");
  if (std::abs(u.norm() - 1.0) > 1e-12) throw DomainError("conditional sample needs a unit direction");
  const double mass = normal_interval_mass(a, b);
  if (!(mass > 0.0)) throw DegenerateStratum("stratum [" + std::to_string(a) + ", " + std::to_string(b) +
                                             "] has zero probability in double precision");
  return mass;
}

void conditional_row(const Vector& u, double a, double b, double mass, RngStream& rng, double* out) {
  const double z = truncated_normal(a, b, mass, rng);
  const auto d = u.size();
  Eigen::Map<Vector> x(out, d);
  rng.fill_normal(std::span<double>(out, static_cast<std::size_t>(d)));
  x += (z - u.dot(x)) * u;
}

}  // namespace

Point conditional_gaussian_sample(const Vector& u, double a, double b, RngStream& rng) {
  const double mass = checked_mass(u, a, b);
  Point x(u.size());
  conditional_row(u, a, b, mass, rng, x.data());
  return x;
}

PointMatrix conditional_gaussian_batch(const Vector& u, double a, double b, std::size_t n, RngStream& rng) {
  const double mass = checked_mass(u, a, b);
  PointMatrix x(static_cast<Eigen::Index>(n), u.size());
  for (std::size_t j = 0; j < n; ++j) conditional_row(u, a, b, mass, rng, x.row(static_cast<Eigen::Index>(j)).data());
  return x;
}

std::size_t AllocationPlan::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

AllocationPlan optimal_allocation(const std::vector<double>& p, const std::vector<double>& v, std::size_t total) {
  if (p.empty() || p.size() != v.size()) throw DomainError("optimal_allocation: p and v sizes differ or are zero");
  double p_sum = 0.0;
  double pv_sum = 0.0;
  std::size_t populated = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0) || !(v[i] >= 0.0)) throw DomainError("optimal_allocation: negative p or v");
    p_sum += p[i];
    pv_sum += p[i] * v[i];
    if (p[i] > 0.0) ++populated;
  }
  if (std::abs(p_sum - 1.0) > 1e-9) throw DomainError("optimal_allocation: p must sum to 1");
  if (!(pv_sum > 0.0)) throw DomainError("optimal_allocation: every p_i v_i is zero");
  if (total < populated) throw DomainError("optimal_allocation: fewer samples than populated strata");

  const std::size_t n = p.size();
  std::vector<double> ideal(n);
  AllocationPlan plan;
  plan.deviations = v;
  plan.counts.assign(n, 0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ideal[i] = p[i] * v[i] / pv_sum * static_cast<double>(total);
    plan.counts[i] = static_cast<std::size_t>(std::floor(ideal[i]));
    if (p[i] > 0.0) plan.counts[i] = std::max<std::size_t>(plan.counts[i], 1);
    assigned += plan.counts[i];
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto excess = [&](std::size_t i) { return static_cast<double>(plan.counts[i]) - ideal[i]; };
  if (assigned < total) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return excess(a) < excess(b); });
    for (std::size_t k = 0; assigned < total; k = (k + 1) % n) {
      if (p[order[k]] <= 0.0 || v[order[k]] <= 0.0) continue;
      ++plan.counts[order[k]];
      ++assigned;
    }
  }
  while (assigned > total) {
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i)
      if (plan.counts[i] > 1 && (pick == n || excess(i) > excess(pick))) pick = i;
    --plan.counts[pick];
    --assigned;
  }
  return plan;
}

StratifiedResult stratified_estimate(Model& model, double gamma, const StrataSpec& strata, double pilot_fraction,
                                     std::size_t total, RngStream& rng, double confidence) {
  const std::size_t count = strata.count();
  if (count == 0 || strata.levels.size() != count + 1) throw DomainError("malformed strata");
  if (static_cast<std::size_t>(strata.direction.size()) != model.dim())
    throw DomainError("strata direction dimension differs from the model");
  if (total < 2 * count) throw DomainError("stratified_estimate: need at least two samples per stratum");
  if (!(pilot_fraction > 0.0 && pilot_fraction < 1.0))
    throw DomainError("stratified_estimate: pilot fraction must lie in (0, 1)");
  const double oriented_gamma = oriented_threshold(model.spec(), gamma);

  std::vector<RngStream> streams;
  streams.reserve(count);
  for (std::size_t i = 0; i < count; ++i) streams.push_back(rng.substream(i));
  std::vector<std::vector<double>> hits(count);

  auto draw = [&](std::size_t i, std::size_t n) {
    if (n == 0) return;
    const PointMatrix x =
        conditional_gaussian_batch(strata.direction, strata.levels[i], strata.levels[i + 1], n, streams[i]);
    for (double value : model.evaluate(x))
      hits[i].push_back(oriented_response(model.spec(), value) >= oriented_gamma ? 1.0 : 0.0);
  };

  const auto pilot_total =
      std::max(count, static_cast<std::size_t>(std::ceil(pilot_fraction * static_cast<double>(total))));
  const AllocationPlan pilot = optimal_allocation(strata.weights, std::vector<double>(count, 1.0), pilot_total);
  StratifiedResult result;
  result.strata.resize(count);
  std::vector<double> deviations(count);
  for (std::size_t i = 0; i < count; ++i) {
    draw(i, pilot.counts[i]);
    deviations[i] = std::sqrt(sample_mean_variance(hits[i]).variance);
    result.strata[i].pilot_count = pilot.counts[i];
    result.strata[i].pilot_deviation = deviations[i];
  }

  double pv = 0.0;
  double pv2 = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    pv += strata.weights[i] * deviations[i];
    pv2 += strata.weights[i] * deviations[i] * deviations[i];
  }
  result.optimal_variance = pv * pv;
  result.proportional_variance = pv2;

  const std::size_t remaining = total - pilot.total();
  if (remaining > 0) {
    // No pilot variance anywhere: fall back to proportional allocation.
    const AllocationPlan second =
        pv > 0.0 ? optimal_allocation(strata.weights, deviations, remaining)
                 : optimal_allocation(strata.weights, std::vector<double>(count, 1.0), remaining);
    for (std::size_t i = 0; i < count; ++i) draw(i, second.counts[i]);
  }

  double estimate = 0.0;
  double variance = 0.0;
  std::size_t hit_count = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const MeanVariance mv = sample_mean_variance(hits[i]);
    StratumSummary& s = result.strata[i];
    s.weight = strata.weights[i];
    s.lower = strata.levels[i];
    s.upper = strata.levels[i + 1];
    s.count = hits[i].size();
    s.mean = mv.mean;
    s.variance = mv.variance;
    estimate += s.weight * mv.mean;
    variance += s.weight * s.weight * mv.variance / static_cast<double>(s.count);
    hit_count += static_cast<std::size_t>(std::lround(mv.mean * static_cast<double>(s.count)));
  }
  result.variance = variance;

  EstimateReport& report = result.report;
  report.estimate = estimate;
  report.confidence = confidence;
  report.final_runs = total;
  report.hits = hit_count;
  report.zero_hits = hit_count == 0;
  report.relative_half_width = estimate > 0.0
                                   ? normal_critical_value(confidence) * std::sqrt(variance) / estimate
                                   : std::numeric_limits<double>::infinity();
  report.speedup = speedup(estimate, report.relative_half_width, total, confidence);
  report.theta = ShiftVector::Zero(static_cast<Eigen::Index>(model.dim()));
  report.converged = !report.zero_hits;
  return result;
}

}  // namespace rareis
