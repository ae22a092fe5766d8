#include "selfsel/gaussian.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace selfsel {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kSqrt2Pi = 2.5066282746310005024157652848110453;

// Below this argument log Phi and phi/Phi switch to the continued fraction.
constexpr double kTailSwitch = -7.0;

// Mills ratio Q(t)/phi(t) for t >= 7 by backward evaluation of
// 1/(t + 1/(t + 2/(t + 3/(t + ...)))).
double mills_upper_cf(double t) {
    double f = t;
    for (int n = 60; n >= 1; --n) {
        f = t + n / f;
    }
    return 1.0 / f;
}

// Acklam's rational approximation for 0 < p <= 0.5, refined with one Halley
// step against erfc.
double quantile_lower_half(double p) {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x = 0.0;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    // Halley refinement. phi(x) stays normal for p above ~1e-300.
    const double e = 0.5 * std::erfc(-x / kSqrt2) - p;
    const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

}  // namespace

double std_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double std_log_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

double std_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double std_log_cdf(double z) {
    if (z > 0.0) {
        return std::log1p(-0.5 * std::erfc(z / kSqrt2));
    }
    if (z >= kTailSwitch) {
        return std::log(0.5 * std::erfc(-z / kSqrt2));
    }
    if (std::isinf(z)) {
        return -std::numeric_limits<double>::infinity();
    }
    return std_log_pdf(z) + std::log(mills_upper_cf(-z));
}

double std_mills_lower(double z) {
    if (z >= kTailSwitch) {
        if (z > 40.0) {
            return 0.0;
        }
        return std_pdf(z) / std_cdf(z);
    }
    if (std::isinf(z)) {
        return std::numeric_limits<double>::infinity();
    }
    return 1.0 / mills_upper_cf(-z);
}

double std_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("std_quantile: p must lie strictly inside (0, 1)");
    }
    if (p <= 0.5) {
        return quantile_lower_half(p);
    }
    return -quantile_lower_half(1.0 - p);
}

double std_quantile_log(double log_p) {
    if (!(log_p < 0.0)) {
        throw std::domain_error("std_quantile_log: log_p must be negative");
    }
    if (log_p > -std::numbers::ln2) {
        // Upper half: 1 - p is available to full precision through expm1.
        return -quantile_lower_half(-std::expm1(log_p));
    }
    if (log_p > -650.0) {
        return quantile_lower_half(std::exp(log_p));
    }
    // Deep tail: Newton on the concave map x -> log Phi(x).
    const double big_l = -log_p;
    double x = -std::sqrt(2.0 * big_l - std::log(4.0 * std::numbers::pi * big_l));
    for (int it = 0; it < 50; ++it) {
        const double step = (std_log_cdf(x) - log_p) / std_mills_lower(x);
        x -= step;
        if (std::abs(step) <= 1e-15 * std::abs(x)) {
            break;
        }
    }
    return x;
}

double log_add_exp(double a, double b) {
    if (a < b) {
        std::swap(a, b);
    }
    if (b == -std::numeric_limits<double>::infinity()) {
        return a;
    }
    return a + std::log1p(std::exp(b - a));
}

double log_sub_exp(double a, double b) {
    if (b == -std::numeric_limits<double>::infinity()) {
        return a;
    }
    const double diff = b - a;
    if (diff >= 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    // log(1 - e^diff), choosing the accurate branch.
    const double tail = diff > -std::numbers::ln2 ? std::log(-std::expm1(diff))
                                                  : std::log1p(-std::exp(diff));
    return a + tail;
}

}  // namespace selfsel
