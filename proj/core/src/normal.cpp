#include "rareis/normal.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <span>

#include "rareis/errors.hpp"

namespace rareis {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

constexpr double kA[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                         1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
constexpr double kB[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                         6.680131188771972e+01, -1.328068155288572e+01};
constexpr double kC[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                         -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
constexpr double kD[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                         3.754408661907416e+00};
constexpr double kLowRegion = 0.02425;

// Lower-tail rational approximation, valid for q = min(p, 1-p) < kLowRegion.
double acklam_tail(double q) {
  const double t = std::sqrt(-2.0 * std::log(q));
  return (((((kC[0] * t + kC[1]) * t + kC[2]) * t + kC[3]) * t + kC[4]) * t + kC[5]) /
         ((((kD[0] * t + kD[1]) * t + kD[2]) * t + kD[3]) * t + 1.0);
}

double acklam_central(double p) {
  const double q = p - 0.5;
  const double r = q * q;
  return (((((kA[0] * r + kA[1]) * r + kA[2]) * r + kA[3]) * r + kA[4]) * r + kA[5]) * q /
         (((((kB[0] * r + kB[1]) * r + kB[2]) * r + kB[3]) * r + kB[4]) * r + 1.0);
}

}  // namespace

double std_normal_pdf(double x) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double std_normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x * kInvSqrt2); }

double std_normal_sf(double x) noexcept { return 0.5 * std::erfc(x * kInvSqrt2); }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("std_normal_quantile: p must lie in (0, 1)");

  // Work on the smaller tail so that the residual is computed without
  // cancellation; the result is mirrored back for p > 1/2.
  const bool upper = p > 0.5;
  const double q = upper ? 1.0 - p : p;
  double x = q < kLowRegion ? acklam_tail(q) : acklam_central(q);

  // Halley refinement on Phi(x) - q.
  const double residual = std_normal_cdf(x) - q;
  const double u = residual * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);

  return upper ? -x : x;
}

Point sample_std_normal(RngStream& rng, std::size_t dim) {
  Point x(static_cast<Eigen::Index>(dim));
  rng.fill_normal(std::span<double>(x.data(), dim));
  return x;
}

PointMatrix sample_std_normal_batch(RngStream& rng, std::size_t n, std::size_t dim) {
  PointMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  rng.fill_normal(std::span<double>(x.data(), n * dim));
  return x;
}

}  // namespace rareis
