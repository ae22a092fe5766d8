#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "selfsel/models.hpp"
#include "selfsel/optimizer.hpp"
#include "selfsel/rng.hpp"

namespace selfsel {

/// Settings for warm-started regressor recovery with boosting.
struct RecoveryConfig {
    /// eps and eta are used as given. Non-positive eps0 or G are derived:
    /// G from a pilot batch of gradients at the warm start, eps0 = G r0.
    PsgdConfig psgd = PsgdConfig::desk();
    /// r0, the assumed bound on ||W0 - W*||_F.
    double warm_radius = 0.2;
    /// The Frobenius ball of K has radius radius_factor * r0 around W0.
    double radius_factor = 2.0;
    /// Per-column norm cap C of K.
    double column_cap = kInf;
    /// Independent PSGD runs fed to cluster_boost.
    std::size_t reps = 24;
    double boost_radius = 0.1;
    std::size_t pilot = 2000;
    /// Sampler TV budget for a whole run, split evenly over its gradient steps.
    double total_tv = 1e-3;
};

struct RecoveryResult {
    Matrix estimate;
    std::vector<Matrix> candidates;
    std::vector<StageTrace> traces;
    /// Empty when no candidate had majority support; estimate is then the
    /// first candidate.
    std::optional<BoostChoice> choice;
    /// Schedule constants after eps0 and G were resolved.
    PsgdConfig resolved;
    ProjectionSet feasible;
};

/// W* + r0 V with V uniform on the unit Frobenius sphere.
[[nodiscard]] Matrix oracle_warm_start(const Matrix& w_star, double r0, Rng& rng);

/// Root mean squared gradient norm over `draws` random observations at W.
[[nodiscard]] double pilot_gradient_scale(std::span<const MaxObservation> data, const Matrix& w,
                                          std::size_t draws, Rng& rng);
[[nodiscard]] double pilot_gradient_scale(std::span<const SecondPriceObservation> data,
                                          const Matrix& w, std::size_t draws, Rng& rng);

/// Runs config.reps independent iterative_psgd passes from w0 over shuffled
/// epochs of `data` and boosts the outputs.
[[nodiscard]] RecoveryResult recover_regressors(std::span<const MaxObservation> data,
                                                const Matrix& w0, const RecoveryConfig& config,
                                                Rng& rng);
[[nodiscard]] RecoveryResult recover_regressors(std::span<const SecondPriceObservation> data,
                                                const Matrix& w0, const RecoveryConfig& config,
                                                Rng& rng);

}  // namespace selfsel
