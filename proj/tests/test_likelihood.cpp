#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "selfsel/diagnostics.hpp"
#include "selfsel/likelihood.hpp"
#include "selfsel/models.hpp"

using namespace selfsel;
using Catch::Approx;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = scale * rng.normal();
    return m;
}

}  // namespace

TEST_CASE("max mixture weights", "[likelihood]") {
    CHECK(max_mixture_weights(vec({0.3}), 1.0).weights(0) == 1.0);
    const auto sym = max_mixture_weights(vec({0, 0}), 0.0).weights;
    CHECK(sym(0) == Approx(0.5).epsilon(1e-15));
    CHECK(sym(1) == Approx(0.5).epsilon(1e-15));

    const double a = oracle::phi(0.0) * oracle::Phi(4.0);
    const double b = oracle::phi(4.0) * oracle::Phi(0.0);
    const auto w = max_mixture_weights(vec({2, -2}), 2.0).weights;
    CHECK(w(0) == Approx(a / (a + b)).epsilon(1e-12));
    CHECK(w(0) == Approx(0.99983).margin(5e-6));
}

TEST_CASE("mixture weights are normalized even when every term underflows", "[likelihood]") {
    Rng rng(1);
    for (int rep = 0; rep < 200; ++rep) {
        const Vector mu = random_matrix(5, 1, rng, 20.0);
        const double y = 60.0 * rng.normal();
        const Vector w = max_mixture_weights(mu, y).weights;
        REQUIRE(w.allFinite());
        REQUIRE((w.array() >= 0.0).all());
        REQUIRE(std::abs(w.sum() - 1.0) <= 1e-12);
        const Vector s = second_price_mixture_weights(mu, rep % 5, y).weights;
        REQUIRE(s.size() == 4);
        REQUIRE(s.allFinite());
        REQUIRE((s.array() >= 0.0).all());
        REQUIRE(std::abs(s.sum() - 1.0) <= 1e-12);
    }
    const Vector deep = max_mixture_weights(vec({0, 0, 0}), -60.0).weights;
    CHECK(deep.allFinite());
    CHECK(deep.sum() == Approx(1.0));
}

TEST_CASE("conditional max draws", "[likelihood]") {
    Rng rng(2);
    SECTION("the pinned coordinate is the max") {
        for (int rep = 0; rep < 1000; ++rep) {
            const Vector mu = random_matrix(4, 1, rng, 2.0);
            const double y = 2.0 * rng.normal();
            const Vector z = sample_conditional_max(mu, y, rng);
            REQUIRE(z.maxCoeff() == y);
        }
    }
    SECTION("non-pinned coordinate mean at mu = 0, y = 0") {
        std::vector<double> other;
        for (int rep = 0; rep < 100000; ++rep) {
            const Vector z = sample_conditional_max(vec({0, 0}), 0.0, rng);
            other.push_back(z(0) == 0.0 ? z(1) : z(0));
        }
        const auto ms = oracle::mean_se(other);
        CHECK(std::abs(ms.mean + 0.7978845608) <= 3.0 * ms.se);
    }
    SECTION("k = 2 law matches the L-shape quadrature") {
        const Vector mu = vec({0.4, -0.6});
        const double y = 0.2;
        std::vector<std::vector<double>> legs(2);
        std::vector<std::size_t> counts(2, 0);
        for (int rep = 0; rep < 100000; ++rep) {
            const Vector z = sample_conditional_max(mu, y, rng);
            const int pinned = z(0) == y ? 0 : 1;
            ++counts[static_cast<std::size_t>(pinned)];
            legs[static_cast<std::size_t>(pinned)].push_back(z(1 - pinned));
        }
        const auto w = oracle::l_shape_weights(mu, y);
        CHECK(chi_square_test(counts, std::vector<double>{w[0], w[1]}).p_value > 0.01);
        for (int i = 0; i < 2; ++i) {
            const double ks = oracle::ks_truncated_normal(legs[static_cast<std::size_t>(i)],
                                                          mu(1 - i), -kInf, y);
            INFO("slab " << i << " ks=" << ks);
            CHECK(ks <= 0.02);
        }
    }
}

TEST_CASE("exact conditional mean for the max model", "[likelihood]") {
    CHECK(exact_conditional_mean_max(vec({0.7}), 1.3)(0) == 1.3);
    const Vector m = exact_conditional_mean_max(vec({0, 0}), 0.0);
    CHECK(m(0) == Approx(-0.5 * 0.7978845608028654).epsilon(1e-12));
    CHECK(m(1) == Approx(-0.3989422804014327).epsilon(1e-12));

    Rng rng(3);
    for (double y : {-1.0, 0.5, 2.0}) {
        const Vector mu = vec({0.3, -0.8, 1.1});
        oracle::MatrixMoments mom;
        for (int rep = 0; rep < 100000; ++rep) mom.add(sample_conditional_max(mu, y, rng));
        INFO("y=" << y);
        CHECK(oracle::max_z_score(mom.mean(), exact_conditional_mean_max(mu, y), mom.se()) <= 4.0);
    }
}

TEST_CASE("exact conditional covariance matches sampling", "[likelihood]") {
    Rng rng(4);
    const Vector mu = vec({0.3, -0.8, 1.1});
    const double y = 0.5;
    Matrix sum = Matrix::Zero(3, 3);
    const Vector mean = exact_conditional_mean_max(mu, y);
    const int n = 100000;
    for (int rep = 0; rep < n; ++rep) {
        const Vector c = sample_conditional_max(mu, y, rng) - mean;
        sum += c * c.transpose();
    }
    CHECK((sum / n - exact_conditional_cov_max(mu, y)).cwiseAbs().maxCoeff() <= 0.02);
}

TEST_CASE("max log density", "[likelihood]") {
    CHECK(max_log_density(vec({0}), 0.7) == Approx(std::log(oracle::phi(0.7))).epsilon(1e-14));
    CHECK(max_log_density(vec({0, 0}), 0.0) == Approx(std::log(2.0 * oracle::phi(0) * 0.5)).epsilon(1e-14));
    CHECK(max_log_density(vec({0, 0}), 0.0) == Approx(-0.9189).margin(1e-4));
    for (const Vector& mu : {vec({0.2}), vec({1, -1}), vec({0, 0.5, -2}), vec({0.1, 0.9, -0.4, 2})}) {
        const double total = oracle::integrate(
            [&](double y) { return std::exp(max_log_density(mu, y)); }, -kInf, kInf);
        CHECK(std::abs(total - 1.0) <= 1e-6);
    }
}

TEST_CASE("gradients for k = 1 are the least squares residual gradient", "[likelihood]") {
    Rng rng(5);
    const Matrix w = random_matrix(4, 1, rng);
    const MaxObservation obs{random_matrix(4, 1, rng), 0.37};
    const Matrix expected = obs.x * (obs.x.dot(w.col(0)) - obs.y_max);
    CHECK((exact_gradient_max(w, obs) - expected).norm() <= 1e-12);
    CHECK((stochastic_gradient_max(w, obs, rng) - expected).norm() <= 1e-12);
}

TEST_CASE("exact gradients match finite differences", "[likelihood]") {
    Rng rng(6);
    double worst_max = 0.0;
    double worst_sp = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const Matrix w = random_matrix(4, 3, rng);
        const Vector x = random_matrix(4, 1, rng);
        const MaxObservation mo{x, 1.5 * rng.normal()};
        const SecondPriceObservation so{x, static_cast<Eigen::Index>(rng.below(3)), 1.5 * rng.normal()};
        worst_max = std::max(
            worst_max, fd_gradient_check([&](const Matrix& v) { return max_nll(v, mo); },
                                         [&](const Matrix& v) { return exact_gradient_max(v, mo); },
                                         w, 1e-5)
                           .statistic);
        worst_sp = std::max(
            worst_sp,
            fd_gradient_check([&](const Matrix& v) { return second_price_nll(v, so); },
                              [&](const Matrix& v) { return exact_gradient_second_price(v, so); },
                              w, 1e-5)
                .statistic);
    }
    CHECK(worst_max <= 1e-4);
    CHECK(worst_sp <= 1e-4);
}

TEST_CASE("stochastic gradients are unbiased", "[likelihood]") {
    Rng rng(7);
    const Matrix w = random_matrix(3, 3, rng, 0.6);
    const Vector x = random_matrix(3, 1, rng);
    const MaxObservation mo{x, 0.4};
    const SecondPriceObservation so{x, 1, -0.2};
    oracle::MatrixMoments gm;
    oracle::MatrixMoments gs;
    for (int rep = 0; rep < 100000; ++rep) {
        gm.add(stochastic_gradient_max(w, mo, rng));
        gs.add(stochastic_gradient_second_price(w, so, rng));
    }
    CHECK(oracle::max_z_score(gm.mean(), exact_gradient_max(w, mo), gm.se()) <= 4.0);
    CHECK(oracle::max_z_score(gs.mean(), exact_gradient_second_price(w, so), gs.se()) <= 4.0);
}

TEST_CASE("in-place gradients agree with the allocating forms", "[likelihood]") {
    Rng rng(8);
    const Matrix w = random_matrix(5, 3, rng);
    const MaxObservation mo{random_matrix(5, 1, rng), 0.1};
    const SecondPriceObservation so{mo.x, 2, 0.1};
    GradientWorkspace ws(3);
    Matrix out;
    Rng a(9);
    Rng b(9);
    stochastic_gradient_max_into(w, mo, a, ws, out);
    CHECK((out - stochastic_gradient_max(w, mo, b)).norm() == 0.0);
    stochastic_gradient_second_price_into(w, so, a, ws, out);
    CHECK((out - stochastic_gradient_second_price(w, so, b)).norm() == 0.0);
    CHECK(per_step_tv(1e-3, 1000) == Approx(1e-6));
}

TEST_CASE("population gradient points away from the truth", "[likelihood]") {
    Rng rng(10);
    const InstanceSpec spec = random_instance(3, 2, 0.5, 1.5, 1.0, rng);
    Matrix dir = random_matrix(3, 2, rng);
    dir /= dir.norm();
    const Matrix w = spec.w_star + 0.1 * dir;
    oracle::MatrixMoments mom;
    for (const auto& o : gen_max_observations(spec, 100000, rng)) mom.add(exact_gradient_max(w, o));
    const double inner = (mom.mean().array() * (w - spec.w_star).array()).sum();
    CHECK(inner > 0.0);
}

TEST_CASE("second-price weights", "[likelihood]") {
    CHECK(second_price_mixture_weights(vec({0.2, -0.1}), 0, 0.3).weights(0) == 1.0);
    const Vector sym = second_price_mixture_weights(vec({0, 0, 0}), 0, 0.0).weights;
    CHECK(sym(0) == Approx(0.5));
    CHECK(sym(1) == Approx(0.5));
    const Vector r = second_price_mixture_weights(vec({0, 3, -3}), 0, 0.0).weights;
    CHECK(r(0) / r(1) == Approx(oracle::Phi(3.0) / oracle::Phi(-3.0)).epsilon(1e-10));
    CHECK(r(0) / r(1) == Approx(739.797).margin(1e-3));
}

TEST_CASE("conditional second-price draws", "[likelihood]") {
    Rng rng(11);
    SECTION("winner above, runner-up pinned") {
        for (int rep = 0; rep < 1000; ++rep) {
            const Vector mu = random_matrix(4, 1, rng, 2.0);
            const auto i_max = static_cast<Eigen::Index>(rng.below(4));
            const double y = 2.0 * rng.normal();
            const Vector z = sample_conditional_second_price(mu, i_max, y, rng);
            REQUIRE(z(i_max) >= y);
            double others = -kInf;
            for (Eigen::Index i = 0; i < 4; ++i) {
                if (i != i_max) others = std::max(others, z(i));
            }
            REQUIRE(others == y);
        }
    }
    SECTION("k = 2 winner mean at mu = 0, y = 0") {
        std::vector<double> win;
        for (int rep = 0; rep < 100000; ++rep) {
            win.push_back(sample_conditional_second_price(vec({0, 0}), 0, 0.0, rng)(0));
        }
        const auto ms = oracle::mean_se(win);
        CHECK(std::abs(ms.mean - 0.7978845608) <= 3.0 * ms.se);
    }
    SECTION("k = 3 slab laws match quadrature") {
        const Vector mu = vec({0.5, -0.3, 0.2});
        const Eigen::Index i_max = 1;
        const double y = 0.1;
        std::vector<std::size_t> counts(2, 0);
        std::vector<std::vector<double>> winner(2);
        std::vector<std::vector<double>> loser(2);
        const std::array<Eigen::Index, 2> runner{0, 2};
        for (int rep = 0; rep < 100000; ++rep) {
            const Vector z = sample_conditional_second_price(mu, i_max, y, rng);
            const std::size_t s = z(0) == y ? 0 : 1;
            ++counts[s];
            winner[s].push_back(z(i_max));
            loser[s].push_back(z(runner[1 - s]));
        }
        std::array<double, 2> legs{};
        for (std::size_t s = 0; s < 2; ++s) {
            const Eigen::Index j = runner[s];
            const Eigen::Index l = runner[1 - s];
            legs[s] = oracle::phi(y - mu(j)) * oracle::Phi(y - mu(l));
        }
        const double total = legs[0] + legs[1];
        CHECK(chi_square_test(counts, std::vector<double>{legs[0] / total, legs[1] / total}).p_value > 0.01);
        for (std::size_t s = 0; s < 2; ++s) {
            CHECK(oracle::ks_truncated_normal(winner[s], mu(i_max), y, kInf) <= 0.02);
            CHECK(oracle::ks_truncated_normal(loser[s], mu(runner[1 - s]), -kInf, y) <= 0.02);
        }
    }
}

TEST_CASE("second-price density normalizes over winner and value", "[likelihood]") {
    const Vector mu = vec({0.4, -0.7, 1.2});
    double total = 0.0;
    for (Eigen::Index i = 0; i < 3; ++i) {
        total += oracle::integrate(
            [&](double y) { return std::exp(second_price_log_density(mu, i, y)); }, -kInf, kInf);
    }
    CHECK(std::abs(total - 1.0) <= 1e-6);
}

TEST_CASE("second-price conditional mean and covariance", "[likelihood]") {
    Rng rng(12);
    const Vector mu = vec({0.5, -0.3, 0.2, 1.0});
    const Eigen::Index i_max = 2;
    const double y = 0.4;
    oracle::MatrixMoments mom;
    std::vector<Vector> zs;
    for (int rep = 0; rep < 100000; ++rep) {
        zs.push_back(sample_conditional_second_price(mu, i_max, y, rng));
        mom.add(zs.back());
    }
    const Vector mean = exact_conditional_mean_second_price(mu, i_max, y);
    CHECK(oracle::max_z_score(mom.mean(), mean, mom.se()) <= 4.0);
    Matrix cov = Matrix::Zero(4, 4);
    for (const Vector& z : zs) cov += (z - mean) * (z - mean).transpose();
    cov /= static_cast<double>(zs.size());
    CHECK((cov - exact_conditional_cov_second_price(mu, i_max, y)).cwiseAbs().maxCoeff() <= 0.02);
}
