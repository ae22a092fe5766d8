#include "selfsel/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "selfsel/likelihood.hpp"

namespace selfsel {

namespace {

void gradient_into(const Matrix& w, const MaxObservation& obs, Rng& rng, GradientWorkspace& ws,
                   Matrix& out, double tv = kDefaultSamplerTv) {
    stochastic_gradient_max_into(w, obs, rng, ws, out, tv);
}

void gradient_into(const Matrix& w, const SecondPriceObservation& obs, Rng& rng,
                   GradientWorkspace& ws, Matrix& out, double tv = kDefaultSamplerTv) {
    stochastic_gradient_second_price_into(w, obs, rng, ws, out, tv);
}

template <class Obs>
double pilot_scale(std::span<const Obs> data, const Matrix& w, std::size_t draws, Rng& rng) {
    if (data.empty() || draws == 0) {
        throw std::invalid_argument("pilot_gradient_scale: need data and draws > 0");
    }
    GradientWorkspace ws(w.cols());
    Matrix g;
    double total = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        gradient_into(w, data[rng.below(data.size())], rng, ws, g);
        total += g.squaredNorm();
    }
    return std::sqrt(total / static_cast<double>(draws));
}

template <class Obs>
RecoveryResult recover(std::span<const Obs> data, const Matrix& w0, const RecoveryConfig& config,
                       Rng& rng) {
    if (data.empty()) {
        throw std::invalid_argument("recover_regressors: no observations");
    }
    if (data.front().x.size() != w0.rows()) {
        throw std::invalid_argument("recover_regressors: warm start has the wrong row count");
    }
    if (!(config.warm_radius > 0.0) || !(config.radius_factor > 0.0) || config.reps == 0) {
        throw std::invalid_argument(
            "recover_regressors: warm_radius, radius_factor and reps must be positive");
    }
    RecoveryResult result;
    result.resolved = config.psgd;
    if (!(result.resolved.G > 0.0)) {
        result.resolved.G = pilot_scale(data, w0, config.pilot, rng);
    }
    if (!(result.resolved.eps0 > 0.0)) {
        result.resolved.eps0 = result.resolved.G * config.warm_radius;
    }
    result.resolved.eps0 = std::max(result.resolved.eps0, result.resolved.eps);
    result.feasible =
        ProjectionSet{w0, config.radius_factor * config.warm_radius, config.column_cap, {}};
    if (result.feasible.violation(w0) > 0.0) {
        throw std::invalid_argument("recover_regressors: warm start violates the column cap");
    }

    const Schedule plan = schedule(result.resolved);
    const double tv = std::min(
        kDefaultSamplerTv,
        per_step_tv(config.total_tv, static_cast<std::size_t>(plan.tau) * plan.iterations));

    result.candidates.reserve(config.reps);
    result.traces.reserve(config.reps);
    for (std::size_t rep = 0; rep < config.reps; ++rep) {
        Rng order_rng = rng.split(2 * rep);
        EpochOrder order(data.size(), order_rng);
        GradientWorkspace ws(w0.cols());
        GradientOracle oracle = [&](const Matrix& w, Rng& step_rng, Matrix& g) {
            gradient_into(w, data[order.next()], step_rng, ws, g, tv);
        };
        PsgdConfig run = result.resolved;
        run.seed = rng.split(2 * rep + 1).next_u64();
        PsgdResult out = iterative_psgd(run, result.feasible, w0, oracle);
        result.candidates.push_back(std::move(out.estimate));
        result.traces.push_back(std::move(out.trace));
    }
    result.choice = cluster_boost(result.candidates, config.boost_radius);
    result.estimate = result.candidates[result.choice ? result.choice->index : 0];
    return result;
}

}  // namespace

Matrix oracle_warm_start(const Matrix& w_star, double r0, Rng& rng) {
    Matrix v(w_star.rows(), w_star.cols());
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            v(i, j) = rng.normal();
        }
    }
    return w_star + (r0 / v.norm()) * v;
}

double pilot_gradient_scale(std::span<const MaxObservation> data, const Matrix& w,
                            std::size_t draws, Rng& rng) {
    return pilot_scale(data, w, draws, rng);
}

double pilot_gradient_scale(std::span<const SecondPriceObservation> data, const Matrix& w,
                            std::size_t draws, Rng& rng) {
    return pilot_scale(data, w, draws, rng);
}

RecoveryResult recover_regressors(std::span<const MaxObservation> data, const Matrix& w0,
                                  const RecoveryConfig& config, Rng& rng) {
    return recover(data, w0, config, rng);
}

RecoveryResult recover_regressors(std::span<const SecondPriceObservation> data, const Matrix& w0,
                                  const RecoveryConfig& config, Rng& rng) {
    return recover(data, w0, config, rng);
}

}  // namespace selfsel
