#include "selfsel/truncnorm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "selfsel/gaussian.hpp"

namespace selfsel {

namespace {

constexpr int kMaxRejections = 1024;

// Inverse transform for the standard normal restricted to [alpha, beta].
// Works on whichever side keeps the tail on the left so that log Phi keeps
// full relative precision.
double inverse_transform_std(double alpha, double beta, Rng& rng) {
    bool mirrored = false;
    if (alpha > 0.0) {
        const double a = -beta;
        beta = -alpha;
        alpha = a;
        mirrored = true;
    }
    const double u = rng.uniform();
    const double log_hi = std_log_cdf(beta);
    double log_p = log_hi + std::log(u);
    if (alpha != -kInf) {
        const double log_lo = std_log_cdf(alpha);
        log_p = log_add_exp(log_lo + std::log1p(-u), log_p);
    }
    double x = std_quantile_log(std::min(log_p, -1e-300));
    x = std::clamp(x, alpha, beta);
    return mirrored ? -x : x;
}

}  // namespace

double inverse_transform_window(double gap, double tv) {
    return std::max(8.0, 4.0 * std::sqrt(2.0 * std::log(1.0 / tv)) + std::abs(gap));
}

double truncnorm_log_mass(double mu, TruncInterval interval) {
    double alpha = interval.lower - mu;
    double beta = interval.upper - mu;
    if (alpha > 0.0) {
        const double a = -beta;
        beta = -alpha;
        alpha = a;
    }
    const double log_hi = std_log_cdf(beta);
    if (alpha == -kInf) {
        return log_hi;
    }
    return log_sub_exp(log_hi, std_log_cdf(alpha));
}

double sample_truncnorm(double mu, TruncInterval interval, Rng& rng, double tv) {
    if (!interval.valid()) {
        throw std::invalid_argument("sample_truncnorm: interval must satisfy lower < upper");
    }
    if (interval.lower == -kInf && interval.upper == kInf) {
        return mu + rng.normal();
    }
    const bool lower_open = interval.lower == -kInf;
    const bool upper_open = interval.upper == kInf;
    // Rejection whenever the interval holds the mean-side half of the mass.
    bool use_rejection = false;
    if (lower_open) {
        use_rejection = interval.upper >= mu;
    } else if (upper_open) {
        use_rejection = interval.lower <= mu;
    } else {
        use_rejection = truncnorm_log_mass(mu, interval) >= -std::numbers::ln2;
    }
    if (use_rejection) {
        for (int i = 0; i < kMaxRejections; ++i) {
            const double x = mu + rng.normal();
            if (interval.contains(x)) {
                return x;
            }
        }
    }
    double alpha = interval.lower - mu;
    double beta = interval.upper - mu;
    if (lower_open) {
        alpha = beta - inverse_transform_window(beta, tv);
    } else if (upper_open) {
        beta = alpha + inverse_transform_window(alpha, tv);
    }
    return mu + inverse_transform_std(alpha, beta, rng);
}

double truncnorm_mean(double mu, TruncInterval interval) {
    if (!interval.valid()) {
        throw std::invalid_argument("truncnorm_mean: interval must satisfy lower < upper");
    }
    const double alpha = interval.lower - mu;
    const double beta = interval.upper - mu;
    if (alpha == -kInf && beta == kInf) {
        return mu;
    }
    if (alpha == -kInf) {
        return mu - std_mills_lower(beta);
    }
    if (beta == kInf) {
        return mu + std_mills_lower(-alpha);
    }
    // Two-sided: reflect so that the interval does not sit right of zero.
    const bool mirrored = alpha > 0.0;
    const double lo = mirrored ? -beta : alpha;
    const double hi = mirrored ? -alpha : beta;
    const double log_z = log_sub_exp(std_log_cdf(hi), std_log_cdf(lo));
    double shift = std::exp(std_log_pdf(lo) - log_z) - std::exp(std_log_pdf(hi) - log_z);
    shift = std::clamp(shift, lo, hi);
    return mirrored ? mu - shift : mu + shift;
}

double truncnorm_variance(double mu, TruncInterval interval) {
    if (!interval.valid()) {
        throw std::invalid_argument("truncnorm_variance: interval must satisfy lower < upper");
    }
    double alpha = interval.lower - mu;
    double beta = interval.upper - mu;
    if (alpha == -kInf && beta == kInf) {
        return 1.0;
    }
    // Variance is reflection invariant; reflect so the open end (if any) and
    // the tail both sit on the left.
    if (beta == kInf || (alpha > 0.0 && alpha != -kInf)) {
        const double a = -beta;
        beta = -alpha;
        alpha = a;
    }
    double var = 0.0;
    if (alpha == -kInf) {
        const double lam = std_mills_lower(beta);
        var = 1.0 - beta * lam - lam * lam;
    } else {
        const double log_z = log_sub_exp(std_log_cdf(beta), std_log_cdf(alpha));
        const double ra = std::exp(std_log_pdf(alpha) - log_z);
        const double rb = std::exp(std_log_pdf(beta) - log_z);
        const double m = ra - rb;
        var = 1.0 + alpha * ra - beta * rb - m * m;
    }
    return std::clamp(var, 0.0, 1.0);
}

double truncnorm_m2(double mu, double b) {
    if (b == kInf) {
        return mu * mu + 1.0;
    }
    return mu * mu + 1.0 - (mu + b) * std_mills_lower(b - mu);
}

double truncnorm_m4(double mu, double b) {
    const double mu2 = mu * mu;
    if (b == kInf) {
        return mu2 * mu2 + 6.0 * mu2 + 3.0;
    }
    const double poly = b * b * b + b * b * mu + b * mu2 + 3.0 * b + 5.0 * mu + mu2 * mu;
    return mu2 * mu2 + 6.0 * mu2 + 3.0 - poly * std_mills_lower(b - mu);
}

}  // namespace selfsel
