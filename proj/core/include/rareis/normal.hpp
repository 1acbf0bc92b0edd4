#pragma once

#include <cstddef>

#include "rareis/rng.hpp"
#include "rareis/types.hpp"

namespace rareis {

double std_normal_pdf(double x) noexcept;

/// Phi(x), computed through erfc so both tails keep full relative accuracy.
double std_normal_cdf(double x) noexcept;

/// Upper tail 1 - Phi(x) = Phi(-x).
double std_normal_sf(double x) noexcept;

/// Phi^{-1}(p). Acklam's rational approximation followed by one Halley
/// step against erfc. Throws DomainError unless 0 < p < 1.
double std_normal_quantile(double p);

/// One N(0, I_d) point.
Point sample_std_normal(RngStream& rng, std::size_t dim);

/// n i.i.d. N(0, I_d) rows, drawn sequentially from `rng`.
PointMatrix sample_std_normal_batch(RngStream& rng, std::size_t n, std::size_t dim);

}  // namespace rareis
