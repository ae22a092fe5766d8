#include "selfsel/coarse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace selfsel {

namespace {

double pilot_second_moment(std::span<const CoarseSet> sets, const Vector& mu, std::size_t draws,
                           std::size_t burn_in, Rng& rng) {
    double total = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        const CoarseSet& set = sets[rng.below(sets.size())];
        total += (mu - sample_truncated_gaussian_on_set(mu, set, rng, burn_in)).squaredNorm();
    }
    return total / static_cast<double>(draws);
}

StageTrace run_stage(std::span<const CoarseSet> sets, const ProjectionSet& feasible,
                     const Vector& start, PsgdConfig& config, std::size_t burn_in, Rng& rng,
                     Vector& out) {
    EpochOrder order(sets.size(), rng);
    GradientOracle oracle = [&](const Matrix& w, Rng& step_rng, Matrix& g) {
        const CoarseSet& set = sets[order.next()];
        g = w - sample_truncated_gaussian_on_set(w.col(0), set, step_rng, burn_in);
    };
    PsgdResult result = iterative_psgd(config, feasible, start, oracle);
    out = result.estimate.col(0);
    return std::move(result.trace);
}

}  // namespace

double localization_radius(const CoarseConfig& config, std::size_t m, Eigen::Index d) {
    if (config.R > 0.0) {
        return config.R;
    }
    const double md = static_cast<double>(std::max<std::size_t>(m, 1)) * static_cast<double>(d);
    return config.D + 10.0 * std::log(md / config.delta);
}

Vector coarse_gradient(const Vector& mu, const CoarseObservation& obs, double radius, Rng& rng,
                       std::size_t burn_in) {
    const CoarseSet local = localize(obs.set, radius);
    return mu - sample_truncated_gaussian_on_set(mu, local, rng, burn_in);
}

IdentifiabilityProbe identifiability_probe(std::span<const CoarseObservation> observations,
                                           const Vector& mu, double radius, std::size_t draws,
                                           Rng& rng, std::size_t burn_in) {
    if (observations.empty() || draws < 2) {
        throw std::invalid_argument("identifiability_probe: need observations and draws >= 2");
    }
    const Eigen::Index d = mu.size();
    IdentifiabilityProbe probe{Vector(d), Vector(d), true};
    for (Eigen::Index axis = 0; axis < d; ++axis) {
        const Vector step = Vector::Unit(d, axis);
        double mean = 0.0;
        double m2 = 0.0;
        for (std::size_t i = 0; i < draws; ++i) {
            const CoarseObservation& obs = observations[rng.below(observations.size())];
            const Vector up = coarse_gradient(mu + step, obs, radius, rng, burn_in);
            const Vector down = coarse_gradient(mu - step, obs, radius, rng, burn_in);
            const double value = 0.5 * (up(axis) - down(axis));
            const double delta = value - mean;
            mean += delta / static_cast<double>(i + 1);
            m2 += delta * (value - mean);
        }
        probe.curvature(axis) = mean;
        probe.standard_error(axis) =
            std::sqrt(m2 / static_cast<double>(draws - 1) / static_cast<double>(draws));
        if (mean <= 4.0 * probe.standard_error(axis) + 1e-2) {
            probe.identifiable = false;
        }
    }
    return probe;
}

CoarseEstimate estimate_coarse_mean(std::span<const CoarseObservation> observations,
                                    Eigen::Index d, const CoarseConfig& config, Rng& rng) {
    if (observations.empty()) {
        throw std::invalid_argument("estimate_coarse_mean: no observations");
    }
    if (!(config.D > 0.0) || !(config.alpha_hint > 0.0)) {
        throw std::invalid_argument("estimate_coarse_mean: D and alpha_hint must be positive");
    }
    CoarseEstimate est;
    est.radius = localization_radius(config, observations.size(), d);
    if (est.radius < config.D) {
        throw std::invalid_argument("estimate_coarse_mean: localization radius below D");
    }

    std::vector<CoarseSet> sets;
    sets.reserve(observations.size());
    std::size_t singletons = 0;
    for (const CoarseObservation& obs : observations) {
        if (dim(obs.set) != d) {
            throw std::invalid_argument("estimate_coarse_mean: observation dimension mismatch");
        }
        sets.push_back(localize(obs.set, est.radius));
        if (std::holds_alternative<Singleton>(sets.back()) &&
            !std::holds_alternative<Singleton>(obs.set)) {
            ++singletons;
        }
    }
    est.singleton_fraction =
        static_cast<double>(singletons) / static_cast<double>(observations.size());

    const double eta = std::sqrt(2.0) * config.alpha_hint;
    const std::size_t pilot = std::max<std::size_t>(config.pilot, 2);

    // Stage A: from the origin inside B(0, D) to distance ~1.
    const Vector origin = Vector::Zero(d);
    ProjectionSet set_a{Matrix::Zero(d, 1), config.D, kInf, {}};
    est.config_a = config.psgd;
    est.config_a.eta = eta;
    est.config_a.G = std::sqrt(pilot_second_moment(sets, origin, pilot, config.burn_in, rng));
    est.config_a.eps0 = est.config_a.G * config.D;
    est.config_a.eps = std::min(0.5 * eta * eta, est.config_a.eps0);
    est.config_a.seed = rng.next_u64();
    est.stage_a = run_stage(sets, set_a, origin, est.config_a, config.burn_in, rng, est.warm_point);

    est.probe = identifiability_probe(observations, est.warm_point, est.radius, pilot, rng,
                                      config.burn_in);
    est.non_identifiable = !est.probe.identifiable;

    // Stage B: re-centred on the warm point, unit trust region.
    constexpr double kWarmRadius = 1.0;
    ProjectionSet set_b{Matrix::Zero(d, 1), config.D, kInf, {Ball{est.warm_point, kWarmRadius}}};
    est.config_b = config.psgd;
    est.config_b.eta = eta;
    est.config_b.G =
        std::sqrt(pilot_second_moment(sets, est.warm_point, pilot, config.burn_in, rng));
    est.config_b.eps0 = est.config_b.G * kWarmRadius;
    est.config_b.eps = std::min(config.psgd.eps, est.config_b.eps0);
    est.config_b.seed = rng.next_u64();
    est.stage_b =
        run_stage(sets, set_b, est.warm_point, est.config_b, config.burn_in, rng, est.mu_hat);
    return est;
}

}  // namespace selfsel
