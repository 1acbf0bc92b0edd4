#include "rareis/cvar.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "rareis/stats.hpp"

namespace rareis {
namespace {

struct TailMoments {
  std::vector<double> indicator_w;  // 1 w
  std::vector<double> value_w;      // Y 1 w, oriented Y
  std::size_t hits = 0;
};

TailMoments tail_moments(const ImportanceSample& sample, double oriented_gamma) {
  TailMoments t;
  t.indicator_w.assign(sample.size(), 0.0);
  t.value_w.assign(sample.size(), 0.0);
  for (std::size_t j = 0; j < sample.size(); ++j) {
    if (sample.responses[j] < oriented_gamma) continue;
    const double w = std::exp(sample.log_weights[j]);
    t.indicator_w[j] = w;
    t.value_w[j] = sample.responses[j] * w;
    ++t.hits;
  }
  return t;
}

}  // namespace

CvarReport estimate_cvar(const ImportanceSample& sample, const ModelSpec& spec, double gamma, double confidence) {
  const double oriented_gamma = oriented_threshold(spec, gamma);
  const TailMoments t = tail_moments(sample, oriented_gamma);
  if (t.hits == 0) throw ZeroHits();

  const auto n = static_cast<double>(sample.size());
  double sum_w = 0.0, sum_yw = 0.0, sum_yw2 = 0.0, sum_w2 = 0.0;
  for (std::size_t j = 0; j < sample.size(); ++j) {
    const double w = t.indicator_w[j];
    sum_w += w;
    sum_yw += t.value_w[j];
    sum_yw2 += t.value_w[j] * w;
    sum_w2 += w * w;
  }
  const double p = sum_w / n;
  const double m = sum_yw / n;
  const double oriented_cvar = sum_yw / sum_w;
  const double var_yw = sample_mean_variance(t.value_w).variance;
  const double e_yw2 = sum_yw2 / n;
  const double e_w2 = sum_w2 / n;

  CvarReport report;
  report.cvar = from_oriented(spec, oriented_cvar);
  report.confidence = confidence;
  report.sigma_sq = std::max(0.0, var_yw / (p * p) - 2.0 * m * e_yw2 / (p * p * p) +
                                      m * m / (p * p * p) * (e_w2 / p + p));
  report.sigma_bar_sq = var_yw / (p * p);
  report.relative_half_width =
      normal_critical_value(confidence) * std::sqrt(report.sigma_sq / n) / std::abs(oriented_cvar);
  report.probability = p;
  report.hits = t.hits;
  report.runs = sample.size();
  report.gamma = gamma;
  return report;
}

UnnormalizedCvar estimate_cvar_unnormalized(const ImportanceSample& sample, const ModelSpec& spec, double gamma,
                                            double p) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("estimate_cvar_unnormalized: p must lie in (0, 1]");
  const TailMoments t = tail_moments(sample, oriented_threshold(spec, gamma));
  if (t.hits == 0) throw ZeroHits();
  const MeanVariance mv = sample_mean_variance(t.value_w);
  UnnormalizedCvar out;
  out.value = from_oriented(spec, mv.mean / p);
  out.sigma_bar_sq = mv.variance / (p * p);
  return out;
}

double cvar_exact_bias(double cvar, double p, std::size_t n) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("cvar_exact_bias: p must lie in (0, 1]");
  return -cvar * std::pow(1.0 - p, static_cast<double>(n));
}

}  // namespace rareis
