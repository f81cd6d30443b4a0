#pragma once

namespace binagree {

/// Standard normal density.
double norm_pdf(double x);
/// Standard normal CDF, accurate in both tails.
double norm_cdf(double x);
/// Upper tail 1 - Phi(x) without cancellation.
double norm_sf(double x);
/// Inverse standard normal CDF; p must lie in (0, 1).
double norm_quantile(double p);

}  // namespace binagree
