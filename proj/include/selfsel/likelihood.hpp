#pragma once

#include <vector>

#include "selfsel/models.hpp"
#include "selfsel/rng.hpp"
#include "selfsel/truncnorm.hpp"
#include "selfsel/types.hpp"

namespace selfsel {

/// Law of the slab index given the observation: slab i pins z_i to the
/// observed value and truncates the remaining coordinates.
struct ConditionalMixture {
    Vector weights;
    Vector mus;
};

// ---------------------------------------------------------------------------
// Max self-selection: observe (x, max_i y_i) with y = W^T x + xi.
// ---------------------------------------------------------------------------

/// weight_i proportional to phi(y - mu_i) prod_{j != i} Phi(y - mu_j).
[[nodiscard]] ConditionalMixture max_mixture_weights(const Vector& mu, double y_max);

/// z ~ N(mu, I) conditioned on max_j z_j = y_max.
[[nodiscard]] Vector sample_conditional_max(const Vector& mu, double y_max, Rng& rng,
                                            double tv = kDefaultSamplerTv);

/// E[z | max_j z_j = y_max], z ~ N(mu, I).
[[nodiscard]] Vector exact_conditional_mean_max(const Vector& mu, double y_max);

/// Cov[z | max_j z_j = y_max], by total variance over slabs.
[[nodiscard]] Matrix exact_conditional_cov_max(const Vector& mu, double y_max);

/// log of the density of max_i (mu_i + xi_i) at y.
[[nodiscard]] double max_log_density(const Vector& mu, double y);

/// Per-sample NLL, -log density of the observation. Differs from the
/// surface-integral form only by a W-independent constant.
[[nodiscard]] double max_nll(const RegressorMatrix& w, const MaxObservation& obs);

/// x x^T W - x E[z | obs]^T.
[[nodiscard]] Matrix exact_gradient_max(const RegressorMatrix& w, const MaxObservation& obs);

/// x x^T W - x z^T with z drawn from the conditional law; unbiased for
/// exact_gradient_max.
[[nodiscard]] Matrix stochastic_gradient_max(const RegressorMatrix& w, const MaxObservation& obs,
                                             Rng& rng);

// ---------------------------------------------------------------------------
// Second-price: observe (x, winner index, second-highest value).
// ---------------------------------------------------------------------------

/// Weights over the runner-up index j != i_max (k - 1 entries, ascending j),
/// proportional to phi(y - mu_j) prod_{l != j, i_max} Phi(y - mu_l).
[[nodiscard]] ConditionalMixture second_price_mixture_weights(const Vector& mu,
                                                              Eigen::Index i_max, double y_smax);

/// z ~ N(mu, I) conditioned on argmax z = i_max and second-highest = y_smax.
[[nodiscard]] Vector sample_conditional_second_price(const Vector& mu, Eigen::Index i_max,
                                                     double y_smax, Rng& rng,
                                                     double tv = kDefaultSamplerTv);

[[nodiscard]] Vector exact_conditional_mean_second_price(const Vector& mu, Eigen::Index i_max,
                                                         double y_smax);
[[nodiscard]] Matrix exact_conditional_cov_second_price(const Vector& mu, Eigen::Index i_max,
                                                        double y_smax);

/// log of the joint density of (winner = i_max, second-highest = y).
[[nodiscard]] double second_price_log_density(const Vector& mu, Eigen::Index i_max, double y);

[[nodiscard]] double second_price_nll(const RegressorMatrix& w,
                                      const SecondPriceObservation& obs);
[[nodiscard]] Matrix exact_gradient_second_price(const RegressorMatrix& w,
                                                 const SecondPriceObservation& obs);
[[nodiscard]] Matrix stochastic_gradient_second_price(const RegressorMatrix& w,
                                                      const SecondPriceObservation& obs,
                                                      Rng& rng);

// ---------------------------------------------------------------------------
// Allocation-free forms for optimizer inner loops.
// ---------------------------------------------------------------------------

/// Scratch space sized for k regressors.
struct GradientWorkspace {
    explicit GradientWorkspace(Eigen::Index k = 0) { resize(k); }
    void resize(Eigen::Index k) {
        mu.resize(k);
        z.resize(k);
        weights.resize(k);
    }

    Vector mu;
    Vector z;
    Vector weights;
};

/// Writes x x^T W - x z^T into `out` (resized on first use).
void stochastic_gradient_max_into(const RegressorMatrix& w, const MaxObservation& obs, Rng& rng,
                                  GradientWorkspace& ws, Matrix& out,
                                  double tv = kDefaultSamplerTv);
void stochastic_gradient_second_price_into(const RegressorMatrix& w,
                                           const SecondPriceObservation& obs, Rng& rng,
                                           GradientWorkspace& ws, Matrix& out,
                                           double tv = kDefaultSamplerTv);

/// TV budget per conditional draw when a run of `steps` gradient evaluations
/// shares a total budget `total_tv`.
[[nodiscard]] double per_step_tv(double total_tv, std::size_t steps);

}  // namespace selfsel
