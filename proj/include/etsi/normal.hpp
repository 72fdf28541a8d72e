#pragma once

namespace etsi {

/// Standard normal density.
double normal_pdf(double x);

/// Standard normal CDF, evaluated through erfc so both tails keep full
/// relative precision.
double normal_cdf(double x);

/// Upper tail 1 - Phi(x) without cancellation.
double normal_sf(double x);

/// Inverse standard normal CDF for p in (0, 1). Rational initial guess
/// refined by two Halley steps against normal_cdf.
double normal_quantile(double p);

}  // namespace etsi
