#include "selfsel/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "selfsel/gaussian.hpp"
#include "selfsel/truncnorm.hpp"

namespace selfsel {

namespace {

constexpr Eigen::Index kNone = -1;

// log phi(y - mu_j) - log Phi(y - mu_j): the log-weight of pinning coordinate
// j at y once the common factor prod_l Phi(y - mu_l) is divided out.
inline double log_pin_weight(double y, double mu) {
    const double t = y - mu;
    return std_log_pdf(t) - std_log_cdf(t);
}

// Normalized weights over all j != skip from log-weights. Entry `skip` gets 0.
// Returns the log normalizer.
double normalize_pin_weights(const Vector& mu, double y, Eigen::Index skip, Vector& w) {
    const Eigen::Index k = mu.size();
    double top = -kInf;
    for (Eigen::Index j = 0; j < k; ++j) {
        if (j == skip) {
            w(j) = -kInf;
            continue;
        }
        w(j) = log_pin_weight(y, mu(j));
        top = std::max(top, w(j));
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
        w(j) = j == skip ? 0.0 : std::exp(w(j) - top);
        total += w(j);
    }
    w /= total;
    return top + std::log(total);
}

Eigen::Index draw_index(const Vector& w, Eigen::Index skip, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    Eigen::Index last = kNone;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
        if (j == skip) {
            continue;
        }
        acc += w(j);
        last = j;
        if (u < acc) {
            return j;
        }
    }
    return last;
}

void check_second_price(const Vector& mu, Eigen::Index i_max) {
    if (mu.size() < 2) {
        throw std::invalid_argument("second-price model needs k >= 2");
    }
    if (i_max < 0 || i_max >= mu.size()) {
        throw std::out_of_range("second-price winner index out of range");
    }
}

void sample_max_into(const Vector& mu, double y, Rng& rng, double tv, Vector& w, Vector& z) {
    normalize_pin_weights(mu, y, kNone, w);
    const Eigen::Index pinned = draw_index(w, kNone, rng);
    const TruncInterval below = TruncInterval::below(y);
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
        z(j) = j == pinned ? y : sample_truncnorm(mu(j), below, rng, tv);
    }
}

void sample_second_price_into(const Vector& mu, Eigen::Index i_max, double y, Rng& rng, double tv,
                              Vector& w, Vector& z) {
    normalize_pin_weights(mu, y, i_max, w);
    const Eigen::Index pinned = draw_index(w, i_max, rng);
    const TruncInterval below = TruncInterval::below(y);
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
        if (j == i_max) {
            z(j) = sample_truncnorm(mu(j), TruncInterval::above(y), rng, tv);
        } else {
            z(j) = j == pinned ? y : sample_truncnorm(mu(j), below, rng, tv);
        }
    }
}

// Conditional covariance of a slab mixture. Slab s pins coordinate s to y;
// every other coordinate j has mean a(j) and variance v(j) in every slab.
Matrix slab_mixture_cov(const Vector& w, const Vector& a, const Vector& v, double y,
                        Eigen::Index skip) {
    const Eigen::Index k = a.size();
    Vector mean = Vector::Zero(k);
    Matrix second = Matrix::Zero(k, k);
    Vector m(k);
    for (Eigen::Index s = 0; s < k; ++s) {
        if (s == skip || w(s) == 0.0) {
            continue;
        }
        m = a;
        m(s) = y;
        mean += w(s) * m;
        second += w(s) * (m * m.transpose());
        for (Eigen::Index j = 0; j < k; ++j) {
            if (j != s) {
                second(j, j) += w(s) * v(j);
            }
        }
    }
    return second - mean * mean.transpose();
}

}  // namespace

ConditionalMixture max_mixture_weights(const Vector& mu, double y_max) {
    if (mu.size() < 1) {
        throw std::invalid_argument("max_mixture_weights: k must be >= 1");
    }
    ConditionalMixture out{Vector(mu.size()), mu};
    normalize_pin_weights(mu, y_max, kNone, out.weights);
    return out;
}

Vector sample_conditional_max(const Vector& mu, double y_max, Rng& rng, double tv) {
    Vector w(mu.size());
    Vector z(mu.size());
    sample_max_into(mu, y_max, rng, tv, w, z);
    return z;
}

Vector exact_conditional_mean_max(const Vector& mu, double y_max) {
    Vector w(mu.size());
    normalize_pin_weights(mu, y_max, kNone, w);
    Vector mean(mu.size());
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
        const double below = mu(j) - std_mills_lower(y_max - mu(j));
        mean(j) = w(j) * y_max + (1.0 - w(j)) * below;
    }
    return mean;
}

Matrix exact_conditional_cov_max(const Vector& mu, double y_max) {
    const Eigen::Index k = mu.size();
    Vector w(k);
    normalize_pin_weights(mu, y_max, kNone, w);
    Vector a(k);
    Vector v(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        a(j) = truncnorm_mean(mu(j), TruncInterval::below(y_max));
        v(j) = truncnorm_variance(mu(j), TruncInterval::below(y_max));
    }
    return slab_mixture_cov(w, a, v, y_max, kNone);
}

double max_log_density(const Vector& mu, double y) {
    double log_common = 0.0;
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
        log_common += std_log_cdf(y - mu(j));
    }
    Vector w(mu.size());
    return log_common + normalize_pin_weights(mu, y, kNone, w);
}

double max_nll(const RegressorMatrix& w, const MaxObservation& obs) {
    return -max_log_density(w.transpose() * obs.x, obs.y_max);
}

Matrix exact_gradient_max(const RegressorMatrix& w, const MaxObservation& obs) {
    const Vector mu = w.transpose() * obs.x;
    return obs.x * (mu - exact_conditional_mean_max(mu, obs.y_max)).transpose();
}

Matrix stochastic_gradient_max(const RegressorMatrix& w, const MaxObservation& obs, Rng& rng) {
    GradientWorkspace ws(w.cols());
    Matrix out;
    stochastic_gradient_max_into(w, obs, rng, ws, out);
    return out;
}

ConditionalMixture second_price_mixture_weights(const Vector& mu, Eigen::Index i_max,
                                                double y_smax) {
    check_second_price(mu, i_max);
    Vector full(mu.size());
    normalize_pin_weights(mu, y_smax, i_max, full);
    ConditionalMixture out{Vector(mu.size() - 1), Vector(mu.size() - 1)};
    Eigen::Index slot = 0;
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
        if (j != i_max) {
            out.weights(slot) = full(j);
            out.mus(slot) = mu(j);
            ++slot;
        }
    }
    return out;
}

Vector sample_conditional_second_price(const Vector& mu, Eigen::Index i_max, double y_smax,
                                       Rng& rng, double tv) {
    check_second_price(mu, i_max);
    Vector w(mu.size());
    Vector z(mu.size());
    sample_second_price_into(mu, i_max, y_smax, rng, tv, w, z);
    return z;
}

Vector exact_conditional_mean_second_price(const Vector& mu, Eigen::Index i_max, double y_smax) {
    check_second_price(mu, i_max);
    Vector w(mu.size());
    normalize_pin_weights(mu, y_smax, i_max, w);
    Vector mean(mu.size());
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
        if (j == i_max) {
            mean(j) = mu(j) + std_mills_lower(mu(j) - y_smax);
        } else {
            const double below = mu(j) - std_mills_lower(y_smax - mu(j));
            mean(j) = w(j) * y_smax + (1.0 - w(j)) * below;
        }
    }
    return mean;
}

Matrix exact_conditional_cov_second_price(const Vector& mu, Eigen::Index i_max, double y_smax) {
    check_second_price(mu, i_max);
    const Eigen::Index k = mu.size();
    Vector w(k);
    normalize_pin_weights(mu, y_smax, i_max, w);
    Vector a(k);
    Vector v(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const TruncInterval range =
            j == i_max ? TruncInterval::above(y_smax) : TruncInterval::below(y_smax);
        a(j) = truncnorm_mean(mu(j), range);
        v(j) = truncnorm_variance(mu(j), range);
    }
    return slab_mixture_cov(w, a, v, y_smax, i_max);
}

double second_price_log_density(const Vector& mu, Eigen::Index i_max, double y) {
    check_second_price(mu, i_max);
    double log_common = std_log_sf(y - mu(i_max));
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
        if (j != i_max) {
            log_common += std_log_cdf(y - mu(j));
        }
    }
    Vector w(mu.size());
    return log_common + normalize_pin_weights(mu, y, i_max, w);
}

double second_price_nll(const RegressorMatrix& w, const SecondPriceObservation& obs) {
    return -second_price_log_density(w.transpose() * obs.x, obs.i_max, obs.y_smax);
}

Matrix exact_gradient_second_price(const RegressorMatrix& w, const SecondPriceObservation& obs) {
    const Vector mu = w.transpose() * obs.x;
    return obs.x *
           (mu - exact_conditional_mean_second_price(mu, obs.i_max, obs.y_smax)).transpose();
}

Matrix stochastic_gradient_second_price(const RegressorMatrix& w,
                                        const SecondPriceObservation& obs, Rng& rng) {
    GradientWorkspace ws(w.cols());
    Matrix out;
    stochastic_gradient_second_price_into(w, obs, rng, ws, out);
    return out;
}

void stochastic_gradient_max_into(const RegressorMatrix& w, const MaxObservation& obs, Rng& rng,
                                  GradientWorkspace& ws, Matrix& out, double tv) {
    if (ws.mu.size() != w.cols()) {
        ws.resize(w.cols());
    }
    ws.mu.noalias() = w.transpose().lazyProduct(obs.x);
    sample_max_into(ws.mu, obs.y_max, rng, tv, ws.weights, ws.z);
    ws.z = ws.mu - ws.z;
    out.resize(w.rows(), w.cols());
    out.noalias() = obs.x * ws.z.transpose();
}

void stochastic_gradient_second_price_into(const RegressorMatrix& w,
                                           const SecondPriceObservation& obs, Rng& rng,
                                           GradientWorkspace& ws, Matrix& out, double tv) {
    if (ws.mu.size() != w.cols()) {
        ws.resize(w.cols());
    }
    ws.mu.noalias() = w.transpose().lazyProduct(obs.x);
    check_second_price(ws.mu, obs.i_max);
    sample_second_price_into(ws.mu, obs.i_max, obs.y_smax, rng, tv, ws.weights, ws.z);
    ws.z = ws.mu - ws.z;
    out.resize(w.rows(), w.cols());
    out.noalias() = obs.x * ws.z.transpose();
}

double per_step_tv(double total_tv, std::size_t steps) {
    return total_tv / static_cast<double>(std::max<std::size_t>(steps, 1));
}

}  // namespace selfsel
