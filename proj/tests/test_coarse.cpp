#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "selfsel/coarse.hpp"
#include "selfsel/diagnostics.hpp"
#include "selfsel/models.hpp"
#include "selfsel/truncnorm.hpp"

using namespace selfsel;
using Catch::Approx;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

Polytope box_polytope(const Vector& lo, const Vector& hi) {
    const Eigen::Index d = lo.size();
    Matrix a(2 * d, d);
    a << Matrix::Identity(d, d), -Matrix::Identity(d, d);
    Vector b(2 * d);
    b << hi, -lo;
    return Polytope(a, b, 0.5 * (lo + hi));
}

Partition half_lines() {
    return BoxListPartition{{Box{vec({-kInf}), vec({0.0})}, Box{vec({0.0}), vec({kInf})}}};
}

// -log P(z in box), z ~ N(mu, I).
double box_nll(const Vector& mu, const Box& box) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        s -= truncnorm_log_mass(mu(i), TruncInterval{box.lower(i), box.upper(i)});
    }
    return s;
}

}  // namespace

TEST_CASE("locate on grids and single cells", "[coarse]") {
    const Partition grid = GridPartition{1.0, Vector::Zero(2)};
    const Box b = std::get<Box>(locate(grid, vec({0.3, -1.2})));
    CHECK(b.lower == vec({0.0, -2.0}));
    CHECK(b.upper == vec({1.0, -1.0}));
    CHECK(std::get<Box>(locate(grid, vec({1.0, 0.5}))).lower(0) == 1.0);

    const Partition whole = BoxListPartition{{whole_space(2)}};
    const Box w = std::get<Box>(locate(whole, vec({3.0, -7.0})));
    CHECK((w.lower.array() == -kInf).all());
    CHECK((w.upper.array() == kInf).all());

    CHECK(std::get<Box>(locate(half_lines(), vec({0.0}))).lower(0) == 0.0);
    CHECK(std::get<Box>(locate(half_lines(), vec({-1e-300}))).upper(0) == 0.0);
}

TEST_CASE("localize", "[coarse]") {
    const Box quadrant{vec({0.0, -kInf}), vec({kInf, 0.0})};
    const Box clipped = std::get<Box>(localize(quadrant, 5.0));
    CHECK(clipped.lower == vec({0.0, -5.0}));
    CHECK(clipped.upper == vec({5.0, 0.0}));

    const Box far{vec({10.0, 10.0}), vec({11.0, 11.0})};
    CHECK(std::get<Singleton>(localize(far, 5.0)).point == vec({10.5, 10.5}));

    const Box inside{vec({-1.0, 0.0}), vec({1.0, 2.0})};
    const Box same = std::get<Box>(localize(inside, 5.0));
    CHECK(same.lower == inside.lower);
    CHECK(same.upper == inside.upper);

    const Polytope shifted = box_polytope(vec({20.0, 20.0}), vec({21.0, 22.0}));
    CHECK(std::get<Singleton>(localize(shifted, 5.0)).point == shifted.interior);

    const Polytope wide = box_polytope(vec({-30.0, -1.0}), vec({30.0, 1.0}));
    const Polytope cut = std::get<Polytope>(localize(wide, 5.0));
    CHECK(cut.contains(vec({4.9, 0.5})));
    CHECK_FALSE(cut.contains(vec({5.1, 0.5})));
}

TEST_CASE("localization radius", "[coarse]") {
    CoarseConfig c;
    c.D = 3.0;
    c.delta = 1e-3;
    CHECK(localization_radius(c, 1000, 5) == Approx(3.0 + 10.0 * std::log(1000.0 * 5.0 / 1e-3)));
    c.R = 7.0;
    CHECK(localization_radius(c, 1000, 5) == 7.0);
    CHECK(localization_radius(c, 1000, 5) >= c.D);
}

TEST_CASE("box sampling", "[coarse]") {
    Rng rng(1);
    SECTION("whole space is N(mu, I)") {
        std::vector<double> c0;
        for (int i = 0; i < 100000; ++i) {
            c0.push_back(sample_truncated_gaussian_on_set(vec({1.0, 2.0}), whole_space(2), rng)(0) - 1.0);
        }
        CHECK(ks_statistic(c0, oracle::Phi) <= 0.01);
    }
    SECTION("positive orthant at mu = 0") {
        const Box orthant{Vector::Zero(3), Vector::Constant(3, kInf)};
        oracle::MatrixMoments mom;
        for (int i = 0; i < 100000; ++i) {
            mom.add(sample_truncated_gaussian_on_set(Vector::Zero(3), orthant, rng));
        }
        CHECK(oracle::max_z_score(mom.mean(), Vector::Constant(3, 0.7978845608), mom.se()) <= 3.0);
    }
    SECTION("singletons return their point") {
        CHECK(sample_truncated_gaussian_on_set(vec({5.0, 5.0}), Singleton{vec({1.0, 2.0})}, rng) ==
              vec({1.0, 2.0}));
    }
}

TEST_CASE("hit-and-run on a box matches the box sampler", "[coarse]") {
    Rng rng(2);
    const Vector lo = vec({-0.5, 0.2});
    const Vector hi = vec({1.5, 2.0});
    const Vector mu = vec({1.0, -0.3});
    const Polytope poly = box_polytope(lo, hi);
    const Box box{lo, hi};
    std::array<std::vector<double>, 2> chain;
    std::array<std::vector<double>, 2> exact;
    bool feasible = true;
    for (int i = 0; i < 20000; ++i) {
        const Vector z = hit_and_run(mu, poly, poly.interior, 200, rng, [&](const Vector& x) {
            feasible = feasible && poly.contains(x, 1e-9);
        });
        const Vector e = sample_truncated_gaussian_on_set(mu, box, rng);
        for (int c = 0; c < 2; ++c) {
            chain[static_cast<std::size_t>(c)].push_back(z(c));
            exact[static_cast<std::size_t>(c)].push_back(e(c));
        }
    }
    CHECK(feasible);
    for (std::size_t c = 0; c < 2; ++c) CHECK(ks_two_sample(chain[c], exact[c]) <= 0.03);
}

TEST_CASE("hit-and-run basics", "[coarse]") {
    Rng rng(3);
    SECTION("one step on an interval is the exact truncated normal") {
        Matrix a(2, 1);
        a << 1.0, -1.0;
        const Polytope interval(a, vec({1.2, 0.3}), vec({0.0}));
        std::vector<double> z;
        for (int i = 0; i < 50000; ++i) z.push_back(hit_and_run(vec({2.0}), interval, interval.interior, 1, rng)(0));
        CHECK(oracle::ks_truncated_normal(z, 2.0, -0.3, 1.2) <= 0.02);
    }
    SECTION("triangle first moment against rejection") {
        Matrix a(3, 2);
        a << -1.0, 0.0, 0.0, -1.0, 1.0, 1.0;
        const Vector b = vec({0.0, 0.0, 1.0});
        const Polytope tri(a, b, vec({0.25, 0.25}));
        const Vector mu = vec({1.0 / 3.0, 1.0 / 3.0});
        oracle::MatrixMoments hr;
        oracle::MatrixMoments rej;
        while (rej.count() < 20000) {
            const Vector z = mu + vec({rng.normal(), rng.normal()});
            if (tri.contains(z, 0.0)) rej.add(z);
        }
        for (int i = 0; i < 20000; ++i) hr.add(hit_and_run(mu, tri, tri.interior, 200, rng));
        const Matrix se = (hr.se().array().square() + rej.se().array().square()).sqrt();
        CHECK(oracle::max_z_score(hr.mean(), rej.mean(), se) <= 4.0);
    }
    SECTION("infeasible start is rejected") {
        const Polytope p = box_polytope(vec({0.0}), vec({1.0}));
        CHECK_THROWS_AS(hit_and_run(vec({0.0}), p, vec({2.0}), 5, rng), std::invalid_argument);
    }
}

TEST_CASE("coarse gradient", "[coarse]") {
    Rng rng(4);
    const Vector mu_star = vec({0.6, -1.1});
    SECTION("singleton observations give mu - x") {
        const auto traced = gen_coarse_observations_traced(mu_star, GridPartition{1.0, Vector::Zero(2)}, 100000, rng);
        const Vector mu = vec({0.2, 0.3});
        oracle::MatrixMoments mom;
        for (const Vector& z : traced.latents) {
            const CoarseObservation point{Singleton{z}};
            const Vector g = coarse_gradient(mu, point, 50.0, rng);
            REQUIRE(g == mu - z);
            mom.add(g);
        }
        CHECK(oracle::max_z_score(mom.mean(), mu - mu_star, mom.se()) <= 3.0);
    }
    SECTION("stationary at the truth on a unit grid") {
        const auto obs = gen_coarse_observations(mu_star, GridPartition{1.0, Vector::Zero(2)}, 100000, rng);
        oracle::MatrixMoments mom;
        for (const auto& o : obs) mom.add(coarse_gradient(mu_star, o, 20.0, rng));
        CHECK(oracle::max_z_score(mom.mean(), Vector::Zero(2), mom.se()) <= 4.0);
    }
    SECTION("norm bound inside the localization box") {
        const double radius = 4.0;
        const Vector mu = vec({1.5, -0.5});
        for (const auto& o : gen_coarse_observations(mu_star, GridPartition{0.5, Vector::Zero(2)}, 2000, rng)) {
            const Vector g = coarse_gradient(mu, o, radius, rng);
            REQUIRE(g.norm() <= mu.norm() + std::sqrt(2.0) * radius);
        }
    }
}

TEST_CASE("coarse likelihood is midpoint convex on grids", "[coarse]") {
    Rng rng(5);
    const Vector mu_star = vec({0.4, -0.2});
    const auto obs = gen_coarse_observations(mu_star, GridPartition{0.8, Vector::Zero(2)}, 20000, rng);
    for (int rep = 0; rep < 20; ++rep) {
        const Vector a = 2.0 * vec({rng.normal(), rng.normal()});
        const Vector b = 2.0 * vec({rng.normal(), rng.normal()});
        const Vector m = 0.5 * (a + b);
        // Coupled per-sample differences: NLL(m) - (NLL(a) + NLL(b)) / 2 <= 4 SE.
        std::vector<double> diff;
        for (const auto& o : obs) {
            const Box& box = std::get<Box>(o.set);
            diff.push_back(box_nll(m, box) - 0.5 * (box_nll(a, box) + box_nll(b, box)));
        }
        const auto ms = oracle::mean_se(diff);
        CHECK(ms.mean <= 4.0 * ms.se);
    }
}

TEST_CASE("half-line estimate agrees with the direct MLE", "[coarse]") {
    Rng rng(6);
    const Vector mu_star = vec({0.5});
    const auto obs = gen_coarse_observations(mu_star, half_lines(), 100000, rng);
    std::size_t below = 0;
    for (const auto& o : obs) below += std::get<Box>(o.set).upper(0) == 0.0;
    const double mle = oracle::half_line_mle(below, obs.size());
    CHECK(mle == Approx(-oracle::Phi_inv(static_cast<double>(below) / obs.size())).margin(1e-6));

    CoarseConfig c;
    c.D = 2.0;
    c.alpha_hint = 0.5;
    c.psgd.eps = 1e-3;
    const CoarseEstimate est = estimate_coarse_mean(obs, 1, c, rng);
    CHECK_FALSE(est.non_identifiable);
    CHECK(std::abs(est.mu_hat(0) - mu_star(0)) <= 0.05);
    CHECK(std::abs(est.mu_hat(0) - mle) <= 0.02);
    CHECK(est.singleton_fraction <= c.delta);
}

TEST_CASE("whole-space partition is flagged as non-identifiable", "[coarse]") {
    Rng rng(7);
    const auto obs = gen_coarse_observations(vec({0.5, 0.5}), BoxListPartition{{whole_space(2)}}, 20000, rng);
    CoarseConfig c;
    c.D = 2.0;
    c.psgd.eps = 1e-2;
    const CoarseEstimate est = estimate_coarse_mean(obs, 2, c, rng);
    CHECK(est.non_identifiable);
    CHECK(est.mu_hat.norm() <= c.D + 1e-8);
}
