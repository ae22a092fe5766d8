#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "selfsel/coarse_set.hpp"
#include "selfsel/models.hpp"
#include "selfsel/optimizer.hpp"
#include "selfsel/rng.hpp"

namespace selfsel {

struct CoarseConfig {
    /// Bound on ||mu*||_2; the projection set is B(0, D).
    double D = 1.0;
    /// Localization radius. Non-positive means D + 10 ln(m d / delta).
    double R = 0.0;
    /// Failure probability used to pick R.
    double delta = 1e-3;
    /// Information-preservation guess; sets the growth rate eta = sqrt(2) alpha.
    double alpha_hint = 0.5;
    /// Schedule constants for the second stage; eps is the final target.
    /// eps0, eta and G are derived from the data when left at zero.
    PsgdConfig psgd = PsgdConfig::desk();
    /// Gradients drawn to estimate G at the start of each stage.
    std::size_t pilot = 2000;
    /// Hit-and-run steps per polytope draw (0 picks 64 d).
    std::size_t burn_in = 0;
};

/// Effective localization radius for m observations in dimension d.
[[nodiscard]] double localization_radius(const CoarseConfig& config, std::size_t m,
                                         Eigen::Index d);

/// g = mu - y with y ~ N(mu, I) restricted to localize(set, R).
[[nodiscard]] Vector coarse_gradient(const Vector& mu, const CoarseObservation& obs, double radius,
                                     Rng& rng, std::size_t burn_in = 0);

/// Curvature of the population objective along each axis, estimated from
/// paired gradients at mu +- e_i.
struct IdentifiabilityProbe {
    Vector curvature;
    Vector standard_error;
    bool identifiable = true;
};

[[nodiscard]] IdentifiabilityProbe identifiability_probe(
    std::span<const CoarseObservation> observations, const Vector& mu, double radius,
    std::size_t draws, Rng& rng, std::size_t burn_in = 0);

struct CoarseEstimate {
    Vector mu_hat;
    /// Output of the first (O(1)-accuracy) stage.
    Vector warm_point;
    StageTrace stage_a;
    StageTrace stage_b;
    PsgdConfig config_a;
    PsgdConfig config_b;
    double radius = 0.0;
    /// Fraction of observations whose set localize() changed to a singleton.
    double singleton_fraction = 0.0;
    IdentifiabilityProbe probe;
    /// The probe found a direction with no curvature: the partition does not
    /// identify the mean and mu_hat is arbitrary within B(0, D).
    bool non_identifiable = false;
};

/// Two-stage estimator: a first projected-SGD run from the origin to O(1)
/// accuracy, then a second run re-centred at that point down to psgd.eps.
[[nodiscard]] CoarseEstimate estimate_coarse_mean(std::span<const CoarseObservation> observations,
                                                  Eigen::Index d, const CoarseConfig& config,
                                                  Rng& rng);

}  // namespace selfsel
