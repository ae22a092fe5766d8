#pragma once

#include <numbers>

namespace selfsel {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343819;
inline constexpr double kLogSqrt2Pi = 0.9189385332046727417803297364056177;

/// Standard normal density.
double std_pdf(double z);
double std_log_pdf(double z);

/// Standard normal CDF. Full relative accuracy in the lower tail until
/// underflow (about z = -37.5).
double std_cdf(double z);

/// log Phi(z), finite for every finite z. Uses a continued fraction for the
/// Mills ratio below z = -7.
double std_log_cdf(double z);

/// log(1 - Phi(z)) = log Phi(-z).
inline double std_log_sf(double z) { return std_log_cdf(-z); }

/// phi(z) / Phi(z), the lower-truncation hazard. Never NaN; behaves like -z
/// for z -> -inf and decays to 0 for z -> +inf.
double std_mills_lower(double z);

/// Inverse of the standard normal CDF. Throws std::domain_error unless
/// 0 < p < 1.
double std_quantile(double p);

/// Quantile from a log-probability: returns z with log Phi(z) = log_p.
/// Works for arbitrarily small probabilities (log_p down to -1e300).
double std_quantile_log(double log_p);

/// log(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b);

/// log(exp(a) - exp(b)) for a >= b. Returns -inf when a == b.
double log_sub_exp(double a, double b);

}  // namespace selfsel
