#pragma once

#include "selfsel/rng.hpp"
#include "selfsel/types.hpp"

namespace selfsel {

/// Truncation set for a scalar Gaussian. Either end may be infinite.
struct TruncInterval {
    double lower = -kInf;
    double upper = kInf;

    static TruncInterval below(double b) { return {-kInf, b}; }
    static TruncInterval above(double a) { return {a, kInf}; }
    static TruncInterval between(double a, double b) { return {a, b}; }

    [[nodiscard]] bool valid() const noexcept { return lower < upper; }
    [[nodiscard]] bool contains(double x) const noexcept { return x >= lower && x <= upper; }
};

/// Per-draw TV budget for the clipped inverse-transform window.
inline constexpr double kDefaultSamplerTv = 1e-9;

/// Half-width of the inverse-transform window past a truncation point that
/// sits `gap` standard deviations beyond the mean.
double inverse_transform_window(double gap, double tv = kDefaultSamplerTv);

/// Draw from N(mu, 1) conditioned on `interval`.
///
/// Intervals holding at least half of the mass use plain rejection (capped
/// at 1024 proposals, falling back to inverse transform). Everything else
/// goes through inverse transform, computed in log-probability space so that
/// truncation points deep in the tail remain exact; one-sided intervals are
/// first clipped to a window carrying all but `tv` of the conditional mass.
double sample_truncnorm(double mu, TruncInterval interval, Rng& rng,
                        double tv = kDefaultSamplerTv);

/// log P(N(mu,1) in interval).
double truncnorm_log_mass(double mu, TruncInterval interval);

/// E[z | z in interval], z ~ N(mu, 1).
double truncnorm_mean(double mu, TruncInterval interval);

/// Var[z | z in interval], z ~ N(mu, 1). Always in [0, 1].
double truncnorm_variance(double mu, TruncInterval interval);

/// E[z^2 | z <= b] = mu^2 + 1 - (mu + b) phi(b - mu) / Phi(b - mu).
double truncnorm_m2(double mu, double b);

/// E[z^4 | z <= b] = mu^4 + 6 mu^2 + 3
///   - (b^3 + b^2 mu + b mu^2 + 3 b + 5 mu + mu^3) phi(b - mu) / Phi(b - mu).
double truncnorm_m4(double mu, double b);

}  // namespace selfsel
