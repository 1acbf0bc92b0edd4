#pragma once

#include <cstddef>
#include <vector>

#include "rareis/model.hpp"
#include "rareis/multilevel.hpp"
#include "rareis/rng.hpp"

namespace rareis {

/// Strata D_i = {x : a_{i-1} <= u.x < a_i}, a_0 = -inf, a_I = +inf.
struct StrataSpec {
  Vector direction;             // unit norm
  std::vector<double> levels;   // I + 1 entries, strictly increasing
  std::vector<double> weights;  // p_i = Phi(a_i) - Phi(a_{i-1})

  std::size_t count() const noexcept { return weights.size(); }

  /// Normalizes nothing: throws DomainError unless |direction| = 1 (to 1e-12),
  /// levels start at -inf, end at +inf and increase, and every p_i > 0.
  static StrataSpec make(Vector direction, std::vector<double> levels);
};

/// u = theta / |theta|, a_i = Phi^{-1}(i / count), p_i = 1 / count.
/// Throws DomainError for a zero shift or count < 2.
StrataSpec strata_from_shift(const ShiftVector& theta, std::size_t count);

/// Phi(b) - Phi(a), evaluated on the side of zero that keeps precision.
double normal_interval_mass(double a, double b) noexcept;

/// A draw from N(0, I_d) conditioned on a <= u.x <= b:
/// u Z + Y - u (u.Y), Z = Phi^{-1}(Phi(a) + U (Phi(b) - Phi(a))), Y ~ N(0, I_d).
/// Throws DomainError if a >= b, DegenerateStratum if the mass underflows.
Point conditional_gaussian_sample(const Vector& u, double a, double b, RngStream& rng);

/// n such draws as rows, in draw order.
PointMatrix conditional_gaussian_batch(const Vector& u, double a, double b, std::size_t n, RngStream& rng);

struct AllocationPlan {
  std::vector<std::size_t> counts;
  std::vector<double> deviations;  // the v_i used

  std::size_t total() const noexcept;
};

/// N_i proportional to p_i v_i, rounded by largest remainder. Every stratum
/// with p_i > 0 keeps at least one sample, taken from the strata that were
/// rounded up the most. Throws DomainError if sum p != 1 (to 1e-9), all
/// p_i v_i are zero, or N is below the number of strata with p_i > 0.
AllocationPlan optimal_allocation(const std::vector<double>& p, const std::vector<double>& v, std::size_t total);

struct StratumSummary {
  double weight = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t pilot_count = 0;
  std::size_t count = 0;  // pilot + second phase
  double pilot_deviation = 0.0;
  double mean = 0.0;
  double variance = 0.0;  // sample variance of the indicator in the stratum
};

struct StratifiedResult {
  EstimateReport report;
  std::vector<StratumSummary> strata;
  /// (sum p_i v_i)^2 and sum p_i v_i^2 on the pilot deviations: per-sample
  /// variance under optimal and proportional allocation.
  double optimal_variance = 0.0;
  double proportional_variance = 0.0;
  double variance = 0.0;  // of the estimate
};

/// Two-pass stratified estimate of P(h >= gamma) under the nominal law:
/// ceil(pilot_fraction N) samples allocated proportionally, then the rest by
/// optimal_allocation on the pilot deviations. Stratum i draws from
/// rng.substream(i). Throws DomainError if N < 2 * strata.count().
StratifiedResult stratified_estimate(Model& model, double gamma, const StrataSpec& strata, double pilot_fraction,
                                     std::size_t total, RngStream& rng, double confidence = 0.95);

}  // namespace rareis
