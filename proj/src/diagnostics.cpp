#include "selfsel/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/gamma.hpp>

#include "selfsel/likelihood.hpp"

namespace selfsel {

namespace {

constexpr std::size_t kMaxHessianDim = 64;
constexpr Eigen::Index kExactCovMaxK = 8;

Matrix random_unit_direction(Eigen::Index d, Eigen::Index k, Rng& rng) {
    Matrix v(d, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) {
            v(i, j) = rng.normal();
        }
    }
    return v / v.norm();
}

// Entrywise running mean and sum of squared deviations.
struct Welford {
    Matrix mean;
    Matrix m2;
    std::size_t n = 0;

    void add(const Matrix& value) {
        if (n == 0) {
            mean = Matrix::Zero(value.rows(), value.cols());
            m2 = Matrix::Zero(value.rows(), value.cols());
        }
        ++n;
        const Matrix delta = value - mean;
        mean += delta / static_cast<double>(n);
        m2.array() += delta.array() * (value - mean).array();
    }

    [[nodiscard]] Matrix standard_error() const {
        return (m2.array() / static_cast<double>(n - 1) / static_cast<double>(n)).sqrt().matrix();
    }
};

Matrix sampled_cov(const Vector& mu, const std::function<Vector(Rng&)>& draw, std::size_t n_inner,
                   Rng& rng) {
    if (n_inner < 2) {
        throw std::invalid_argument("hessian_min_eig_estimate: n_inner must be >= 2 when k > 8");
    }
    const Eigen::Index k = mu.size();
    Vector mean = Vector::Zero(k);
    Matrix second = Matrix::Zero(k, k);
    for (std::size_t s = 0; s < n_inner; ++s) {
        const Vector z = draw(rng);
        mean += z;
        second += z * z.transpose();
    }
    const double n = static_cast<double>(n_inner);
    mean /= n;
    return (second - n * mean * mean.transpose()) / (n - 1.0);
}

}  // namespace

std::string to_string(SelectionModel model) {
    return model == SelectionModel::Max ? "max" : "second-price";
}

DiagnosticReport make_report(std::string name, double statistic, double threshold,
                             double standard_error, std::map<std::string, std::size_t> sample_sizes,
                             std::uint64_t seed) {
    DiagnosticReport r;
    r.name = std::move(name);
    r.statistic = statistic;
    r.threshold = threshold;
    r.standard_error = standard_error;
    r.pass = statistic <= threshold;
    r.sample_sizes = std::move(sample_sizes);
    r.seed = seed;
    return r;
}

DiagnosticReport fd_gradient_check(const LossFn& loss, const GradFn& grad, const Matrix& point,
                                   double h, double threshold) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("fd_gradient_check: h must be positive");
    }
    const Matrix g = grad(point);
    if (g.rows() != point.rows() || g.cols() != point.cols()) {
        throw std::invalid_argument("fd_gradient_check: gradient shape mismatch");
    }
    Matrix probe = point;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < point.cols(); ++j) {
        for (Eigen::Index i = 0; i < point.rows(); ++i) {
            probe(i, j) = point(i, j) + h;
            const double up = loss(probe);
            probe(i, j) = point(i, j) - h;
            const double down = loss(probe);
            probe(i, j) = point(i, j);
            const double fd = (up - down) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - g(i, j)) / std::max(1.0, std::abs(g(i, j))));
        }
    }
    return make_report("fd_gradient_check", worst, threshold, 0.0,
                       {{"entries", static_cast<std::size_t>(point.size())}}, 0);
}

double hessian_min_eig_estimate(SelectionModel model, const InstanceSpec& truth, const Matrix& w,
                                std::size_t n_obs, std::size_t n_inner, Rng& rng) {
    const Eigen::Index d = truth.d();
    const Eigen::Index k = truth.k();
    const auto dk = static_cast<std::size_t>(d * k);
    if (dk > kMaxHessianDim) {
        throw std::invalid_argument("hessian_min_eig_estimate: d*k exceeds 64");
    }
    if (w.rows() != d || w.cols() != k) {
        throw std::invalid_argument("hessian_min_eig_estimate: W shape mismatch");
    }
    if (n_obs == 0) {
        throw std::invalid_argument("hessian_min_eig_estimate: n_obs must be positive");
    }
    const Matrix eye = Matrix::Identity(k, k);
    Matrix h = Matrix::Zero(d * k, d * k);
    Matrix outer(d, d);
    Matrix cov(k, k);

    auto accumulate = [&](const Vector& x) {
        outer.noalias() = x * x.transpose();
        const Matrix core = eye - cov;
        for (Eigen::Index a = 0; a < k; ++a) {
            for (Eigen::Index b = 0; b < k; ++b) {
                h.block(a * d, b * d, d, d) += core(a, b) * outer;
            }
        }
    };

    if (model == SelectionModel::Max) {
        for (const MaxObservation& obs : gen_max_observations(truth, n_obs, rng)) {
            const Vector mu = w.transpose() * obs.x;
            if (k <= kExactCovMaxK) {
                cov = exact_conditional_cov_max(mu, obs.y_max);
            } else {
                cov = sampled_cov(
                    mu, [&](Rng& r) { return sample_conditional_max(mu, obs.y_max, r); }, n_inner,
                    rng);
            }
            accumulate(obs.x);
        }
    } else {
        for (const SecondPriceObservation& obs : gen_second_price_observations(truth, n_obs, rng)) {
            const Vector mu = w.transpose() * obs.x;
            if (k <= kExactCovMaxK) {
                cov = exact_conditional_cov_second_price(mu, obs.i_max, obs.y_smax);
            } else {
                cov = sampled_cov(
                    mu,
                    [&](Rng& r) {
                        return sample_conditional_second_price(mu, obs.i_max, obs.y_smax, r);
                    },
                    n_inner, rng);
            }
            accumulate(obs.x);
        }
    }
    h /= static_cast<double>(n_obs);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

DiagnosticReport stationarity_test(SelectionModel model, const InstanceSpec& truth, std::size_t n,
                                   Rng& rng) {
    if (n < 2) {
        throw std::invalid_argument("stationarity_test: n must be >= 2");
    }
    const std::uint64_t seed = rng.seed();
    Welford acc;
    if (model == SelectionModel::Max) {
        for (const MaxObservation& obs : gen_max_observations(truth, n, rng)) {
            acc.add(exact_gradient_max(truth.w_star, obs));
        }
    } else {
        for (const SecondPriceObservation& obs : gen_second_price_observations(truth, n, rng)) {
            acc.add(exact_gradient_second_price(truth.w_star, obs));
        }
    }
    const Matrix se = acc.standard_error();
    double worst = 0.0;
    double worst_se = 0.0;
    for (Eigen::Index i = 0; i < se.size(); ++i) {
        const double m = std::abs(acc.mean(i));
        const double z = se(i) > 0.0 ? m / se(i) : (m > 0.0 ? kInf : 0.0);
        if (z >= worst) {
            worst = z;
            worst_se = se(i);
        }
    }
    return make_report("stationarity_" + to_string(model), worst, 4.0, worst_se,
                       {{"observations", n}}, seed);
}

std::vector<GrowthPoint> growth_probe(SelectionModel model, const InstanceSpec& truth,
                                      std::span<const double> radii, std::size_t n, Rng& rng,
                                      std::size_t directions) {
    if (n < 2) {
        throw std::invalid_argument("growth_probe: n must be >= 2");
    }
    std::vector<MaxObservation> max_data;
    std::vector<SecondPriceObservation> sp_data;
    if (model == SelectionModel::Max) {
        max_data = gen_max_observations(truth, n, rng);
    } else {
        sp_data = gen_second_price_observations(truth, n, rng);
    }
    auto loss = [&](const Matrix& w, std::size_t i) {
        return model == SelectionModel::Max ? max_nll(w, max_data[i])
                                            : second_price_nll(w, sp_data[i]);
    };
    std::vector<double> base(n);
    for (std::size_t i = 0; i < n; ++i) {
        base[i] = loss(truth.w_star, i);
    }

    std::vector<GrowthPoint> table;
    std::vector<double> diff(n);
    for (std::size_t dir = 0; dir < directions; ++dir) {
        const Matrix v = random_unit_direction(truth.d(), truth.k(), rng);
        for (const double r : radii) {
            const Matrix w = truth.w_star + r * v;
            for (std::size_t i = 0; i < n; ++i) {
                diff[i] = loss(w, i) - base[i];
            }
            const double mean = pairwise_sum(diff) / static_cast<double>(n);
            double ss = 0.0;
            for (const double x : diff) {
                ss += (x - mean) * (x - mean);
            }
            const double se =
                std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
            table.push_back(GrowthPoint{dir, r, mean, se});
        }
    }
    return table;
}

std::vector<DiagnosticReport> growth_reports(std::span<const GrowthPoint> table, std::size_t n,
                                             std::uint64_t seed) {
    double negative = 0.0;
    double negative_se = 0.0;
    double drop = 0.0;
    double drop_se = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const GrowthPoint& p = table[i];
        if (p.standard_error > 0.0 && -p.gap / p.standard_error > negative) {
            negative = -p.gap / p.standard_error;
            negative_se = p.standard_error;
        }
        if (i > 0 && table[i - 1].direction == p.direction && table[i - 1].radius < p.radius) {
            const double se = std::max(p.standard_error, table[i - 1].standard_error);
            if (se > 0.0 && (table[i - 1].gap - p.gap) / se > drop) {
                drop = (table[i - 1].gap - p.gap) / se;
                drop_se = se;
            }
        }
    }
    return {make_report("growth_nonnegative", negative, 4.0, negative_se, {{"observations", n}},
                        seed),
            make_report("growth_monotone", drop, 4.0, drop_se, {{"observations", n}}, seed)};
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) {
        throw std::invalid_argument("ks_statistic: no samples");
    }
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) {
        throw std::invalid_argument("ks_two_sample: empty sample");
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) {
            ++i;
        }
        while (j < b.size() && b[j] <= x) {
            ++j;
        }
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

ChiSquare chi_square_test(std::span<const std::size_t> counts, std::span<const double> probs) {
    if (counts.size() != probs.size() || counts.size() < 2) {
        throw std::invalid_argument("chi_square_test: need matching counts and probs, >= 2 cells");
    }
    double total = 0.0;
    for (const std::size_t c : counts) {
        total += static_cast<double>(c);
    }
    ChiSquare out;
    std::size_t cells = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double expected = total * probs[i];
        if (expected <= 0.0) {
            if (counts[i] > 0) {
                out.statistic = kInf;
            }
            continue;
        }
        const double diff = static_cast<double>(counts[i]) - expected;
        out.statistic += diff * diff / expected;
        ++cells;
    }
    out.dof = cells > 0 ? cells - 1 : 0;
    if (!std::isfinite(out.statistic)) {
        out.p_value = 0.0;
    } else if (out.dof > 0) {
        out.p_value = boost::math::gamma_q(0.5 * static_cast<double>(out.dof), 0.5 * out.statistic);
    }
    return out;
}

double pairwise_sum(std::span<const double> values) {
    constexpr std::size_t kLeaf = 64;
    if (values.size() <= kLeaf) {
        double s = 0.0;
        for (const double v : values) {
            s += v;
        }
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

nlohmann::json to_json(const DiagnosticReport& report) {
    nlohmann::json sizes = nlohmann::json::object();
    for (const auto& [key, value] : report.sample_sizes) {
        sizes[key] = value;
    }
    auto finite_or_null = [](double v) -> nlohmann::json {
        return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    };
    return nlohmann::json{{"name", report.name},
                          {"statistic", finite_or_null(report.statistic)},
                          {"threshold", finite_or_null(report.threshold)},
                          {"standard_error", finite_or_null(report.standard_error)},
                          {"pass", report.pass},
                          {"sample_sizes", sizes},
                          {"seed", report.seed}};
}

std::string format_table(std::span<const DiagnosticReport> reports) {
    std::size_t width = 4;
    for (const DiagnosticReport& r : reports) {
        width = std::max(width, r.name.size());
    }
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width)) << "test" << "  " << std::right
        << std::setw(12) << "statistic" << std::setw(12) << "threshold" << std::setw(12) << "se"
        << "  result  seed\n";
    out << std::setprecision(4);
    for (const DiagnosticReport& r : reports) {
        out << std::left << std::setw(static_cast<int>(width)) << r.name << "  " << std::right
            << std::setw(12) << r.statistic << std::setw(12) << r.threshold << std::setw(12)
            << r.standard_error << "  " << (r.pass ? "PASS  " : "FAIL  ") << "  " << r.seed
            << '\n';
    }
    return out.str();
}

}  // namespace selfsel
