#include "selfsel/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace selfsel {

namespace {

constexpr int kMaxSweeps = 500;
constexpr double kMoveTol = 1e-10;
constexpr double kFeasTol = 1e-8;

void project_ball(Matrix& w, const Matrix& center, double radius) {
    const double dist = (w - center).norm();
    if (dist > radius) {
        w = center + (radius / dist) * (w - center);
    }
}

void project_columns(Matrix& w, double cap) {
    for (Eigen::Index i = 0; i < w.cols(); ++i) {
        const double n = w.col(i).norm();
        if (n > cap) {
            w.col(i) *= cap / n;
        }
    }
}

// Dykstra over a fixed list of convex sets with reusable buffers.
class Projector {
public:
    explicit Projector(const ProjectionSet& set) : set_(set) {
        count_ = 1 + (std::isfinite(set.column_cap) ? 1 : 0) + set.extra.size();
    }

    // Projects `w` in place; returns sweeps used (0 when already feasible) and
    // sets `warning` if the sweep cap was hit.
    int apply(Matrix& w, bool& warning) {
        warning = false;
        if (set_.violation(w) <= 0.0) {
            return 0;
        }
        increments_.resize(count_);
        for (auto& p : increments_) {
            p.setZero(w.rows(), w.cols());
        }
        int sweep = 0;
        for (; sweep < kMaxSweeps; ++sweep) {
            previous_ = w;
            for (std::size_t s = 0; s < count_; ++s) {
                shifted_ = w + increments_[s];
                w = shifted_;
                project_one(s, w);
                increments_[s] = shifted_ - w;
            }
            if ((w - previous_).norm() < kMoveTol) {
                ++sweep;
                break;
            }
        }
        if (sweep >= kMaxSweeps) {
            warning = true;
        }
        // Final clamp: plain cyclic projections until every constraint holds.
        for (int pass = 0; pass < 1000 && set_.violation(w) > kFeasTol * 0.01; ++pass) {
            for (std::size_t s = 0; s < count_; ++s) {
                project_one(s, w);
            }
        }
        return sweep;
    }

private:
    void project_one(std::size_t s, Matrix& w) const {
        if (s == 0) {
            project_ball(w, set_.center, set_.radius);
            return;
        }
        std::size_t idx = s - 1;
        if (std::isfinite(set_.column_cap)) {
            if (idx == 0) {
                project_columns(w, set_.column_cap);
                return;
            }
            --idx;
        }
        const Ball& ball = set_.extra[idx];
        project_ball(w, ball.center, ball.radius);
    }

    const ProjectionSet& set_;
    std::size_t count_ = 0;
    std::vector<Matrix> increments_;
    Matrix previous_;
    Matrix shifted_;
};

double distance(const Matrix& a, const Matrix& b) {
    const double* pa = a.data();
    const double* pb = b.data();
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double t = pa[i] - pb[i];
        s += t * t;
    }
    return std::sqrt(s);
}

double min_slack(const ProjectionSet& set, const Matrix& w) {
    double slack = set.radius - distance(w, set.center);
    if (std::isfinite(set.column_cap)) {
        slack = std::min(slack, set.column_cap - w.colwise().norm().maxCoeff());
    }
    for (const Ball& b : set.extra) {
        slack = std::min(slack, b.radius - distance(w, b.center));
    }
    return slack;
}

}  // namespace

PsgdConfig PsgdConfig::paper() { return PsgdConfig{}; }

PsgdConfig PsgdConfig::desk() {
    PsgdConfig c;
    c.t_multiplier = 40.0;
    c.gamma_divisor = 10.0;
    c.t_cap = 200000;
    return c;
}

void PsgdConfig::validate() const {
    std::ostringstream msg;
    if (!(eps > 0.0)) {
        msg << "eps must be positive";
    } else if (!(eps0 >= eps)) {
        msg << "eps0 must be at least eps";
    } else if (!(eta > 0.0) || !(G > 0.0)) {
        msg << "eta and G must be positive";
    } else if (!(t_multiplier > 0.0) || !(gamma_divisor > 0.0)) {
        msg << "t_multiplier and gamma_divisor must be positive";
    } else if (t_cap == 0) {
        msg << "t_cap must be positive";
    } else {
        return;
    }
    throw std::invalid_argument("PsgdConfig: " + msg.str());
}

Schedule schedule(const PsgdConfig& config) {
    config.validate();
    Schedule s;
    s.tau = static_cast<int>(std::ceil(std::log2(config.eps0 / config.eps)));
    s.tau = std::max(s.tau, 0);
    s.d0 = 2.0 * config.eps0 / (config.eta * std::sqrt(config.eps));
    if (s.tau == 0) {
        return s;
    }
    const double g2 = config.G * config.G;
    const double tau = static_cast<double>(s.tau);
    s.gamma0 = config.eps0 / (config.gamma_divisor * g2 * tau);
    const double t = std::ceil(config.t_multiplier * g2 * tau * tau /
                               (config.eta * config.eta * config.eps));
    s.iterations = t >= static_cast<double>(config.t_cap) ? config.t_cap
                                                          : static_cast<std::size_t>(t);
    s.iterations = std::max<std::size_t>(s.iterations, 1);
    return s;
}

double ProjectionSet::violation(const Matrix& w) const {
    return std::max(0.0, -min_slack(*this, w));
}

ProjectionResult project(const Matrix& w, const ProjectionSet& set) {
    if (w.rows() != set.center.rows() || w.cols() != set.center.cols()) {
        throw std::invalid_argument("project: shape mismatch with projection set");
    }
    ProjectionResult out{w, 0, false};
    Projector projector(set);
    out.sweeps = projector.apply(out.point, out.warning);
    return out;
}

PsgdResult iterative_psgd(const PsgdConfig& config, const ProjectionSet& feasible,
                          const Matrix& w0, const GradientOracle& oracle) {
    PsgdResult result;
    result.trace.plan = schedule(config);
    const Schedule& plan = result.trace.plan;
    if (feasible.violation(w0) > kFeasTol) {
        throw std::invalid_argument("iterative_psgd: starting point lies outside the feasible set");
    }
    result.estimate = w0;
    if (plan.tau == 0) {
        return result;
    }

    Rng rng(config.seed);
    ProjectionSet stage_set = feasible;
    stage_set.extra.push_back(Ball{w0, plan.d0});
    Matrix w = w0;
    Matrix g(w0.rows(), w0.cols());
    Matrix sum(w0.rows(), w0.cols());
    const double inv_t = 1.0 / static_cast<double>(plan.iterations);

    for (int stage = 1; stage <= plan.tau; ++stage) {
        const double gamma = std::ldexp(plan.gamma0, -stage);
        const double radius = std::ldexp(plan.d0, -stage);
        stage_set.extra.back() = Ball{result.estimate, radius};
        Projector projector(stage_set);
        w = result.estimate;
        sum.setZero();
        for (std::size_t t = 1; t <= plan.iterations; ++t) {
            oracle(w, rng, g);
            if (!g.allFinite()) {
                std::ostringstream msg;
                msg << "iterative_psgd: gradient oracle returned non-finite entries at stage "
                    << stage << ", step " << t;
                throw std::runtime_error(msg.str());
            }
            w.noalias() -= gamma * g;
            bool warning = false;
            projector.apply(w, warning);
            if (warning) {
                ++result.trace.projection_warnings;
            }
            sum += w;
            if (config.trace_stride > 0 && t % config.trace_stride == 0) {
                result.trace.steps.push_back(
                    StepRecord{stage, t, gamma, min_slack(stage_set, w), g.norm()});
            }
        }
        Matrix next = sum * inv_t;
        result.trace.stages.push_back(StageRecord{stage, gamma, radius, plan.iterations,
                                                  (next - result.estimate).norm(), next});
        result.estimate = std::move(next);
    }
    return result;
}

std::vector<Eigen::Index> hungarian_assignment(const Matrix& cost) {
    const Eigen::Index n = cost.rows();
    if (cost.cols() != n) {
        throw std::invalid_argument("hungarian_assignment: cost matrix must be square");
    }
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials; p[j] is the row matched to column j.
    std::vector<double> u(n + 1, 0.0);
    std::vector<double> v(n + 1, 0.0);
    std::vector<Eigen::Index> p(n + 1, 0);
    std::vector<Eigen::Index> way(n + 1, 0);
    for (Eigen::Index i = 1; i <= n; ++i) {
        p[0] = i;
        Eigen::Index j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const Eigen::Index i0 = p[j0];
            double delta = inf;
            Eigen::Index j1 = 0;
            for (Eigen::Index j = 1; j <= n; ++j) {
                if (used[j]) {
                    continue;
                }
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (Eigen::Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const Eigen::Index j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<Eigen::Index> assignment(n, 0);
    for (Eigen::Index j = 1; j <= n; ++j) {
        assignment[p[j] - 1] = j - 1;
    }
    return assignment;
}

Matching permutation_distance(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument("permutation_distance: shape mismatch");
    }
    const Eigen::Index k = a.cols();
    Matrix cost(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            cost(i, j) = (a.col(i) - b.col(j)).squaredNorm();
        }
    }
    Matching out;
    if (k <= 8) {
        std::vector<Eigen::Index> perm(k);
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        double best = std::numeric_limits<double>::infinity();
        do {
            double total = 0.0;
            for (Eigen::Index i = 0; i < k; ++i) {
                total += cost(i, perm[i]);
            }
            if (total < best) {
                best = total;
                out.permutation = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        out.distance = std::sqrt(best);
        return out;
    }
    out.permutation = hungarian_assignment(cost);
    double total = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        total += cost(i, out.permutation[i]);
    }
    out.distance = std::sqrt(total);
    return out;
}

std::optional<BoostChoice> cluster_boost(std::span<const Matrix> candidates, double radius) {
    const std::size_t m = candidates.size();
    if (m == 0) {
        return std::nullopt;
    }
    // Strict majority, so two clusters of m/2 each cannot both qualify.
    const std::size_t needed = m / 2 + 1;
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t support = 0;
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j || permutation_distance(candidates[i], candidates[j]).distance <= radius) {
                ++support;
            }
        }
        if (support >= needed) {
            return BoostChoice{i, support};
        }
    }
    return std::nullopt;
}

}  // namespace selfsel
