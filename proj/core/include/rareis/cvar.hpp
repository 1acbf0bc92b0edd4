#pragma once

#include <cstddef>
#include <limits>

#include "rareis/model.hpp"
#include "rareis/multilevel.hpp"

namespace rareis {

struct CvarReport {
  double cvar = 0.0;  // model units
  double relative_half_width = std::numeric_limits<double>::infinity();
  double confidence = 0.95;
  /// Plug-in asymptotic variance of sqrt(n) (CVaR_n - CVaR).
  double sigma_sq = 0.0;
  /// Plug-in variance of the unnormalized estimator at the estimated p.
  double sigma_bar_sq = 0.0;
  double probability = 0.0;
  std::size_t hits = 0;
  std::size_t runs = 0;
  double gamma = 0.0;  // model units
};

/// Self-normalized estimate of E[h | tail event] from an importance sample:
///   sum h 1 w / sum 1 w,  w = exp(-theta.x - |theta|^2/2).
/// sigma^2 uses the delta-method formula with every moment replaced by its
/// weighted sample counterpart:
///   Var(Y1w)/p^2 - 2 m E[Y1w^2]/p^3 + m^2/p^3 (E[1w^2]/p + p),  m = E[Y1w].
/// Left tails are handled in oriented units and mapped back. Throws ZeroHits.
CvarReport estimate_cvar(const ImportanceSample& sample, const ModelSpec& spec, double gamma,
                         double confidence = 0.95);

struct UnnormalizedCvar {
  double value = 0.0;
  /// Var(Y 1 w) / p^2.
  double sigma_bar_sq = 0.0;
};

/// sum h 1 w / (n p) with a given tail probability p > 0. Throws ZeroHits.
UnnormalizedCvar estimate_cvar_unnormalized(const ImportanceSample& sample, const ModelSpec& spec, double gamma,
                                            double p);

/// -cvar (1 - p)^n, the bias of the self-normalized estimator at theta = 0
/// when a sample without hits contributes 0.
double cvar_exact_bias(double cvar, double p, std::size_t n);

}  // namespace rareis
