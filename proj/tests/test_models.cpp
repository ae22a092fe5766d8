#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "selfsel/diagnostics.hpp"
#include "selfsel/models.hpp"

using namespace selfsel;

namespace {

InstanceSpec spec_of(std::initializer_list<std::initializer_list<double>> columns, double c,
                     double C) {
    const auto k = static_cast<Eigen::Index>(columns.size());
    const auto d = static_cast<Eigen::Index>(columns.begin()->size());
    Matrix w(d, k);
    Eigen::Index j = 0;
    for (const auto& col : columns) {
        Eigen::Index i = 0;
        for (double v : col) w(i++, j) = v;
        ++j;
    }
    return {w, c, C};
}

bool has_violation_at(const std::vector<AssumptionViolation>& v, Eigen::Index index) {
    for (const auto& a : v) {
        if (a.kind == AssumptionViolation::Kind::Separability && a.index == index) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("assumption checks", "[models]") {
    CHECK(validate_assumptions(spec_of({{1, 0}}, 0.5, 1.0)).empty());
    CHECK(validate_assumptions(spec_of({{1, 0}, {0, 1}}, 0.5, 1.0)).empty());

    const auto same = validate_assumptions(spec_of({{1, 0}, {1, 0}}, 0.5, 1.0));
    CHECK(has_violation_at(same, 0));
    CHECK(has_violation_at(same, 1));
    for (const auto& v : same) {
        if (v.kind == AssumptionViolation::Kind::Separability) CHECK(v.margin == Catch::Approx(-0.5));
    }

    const auto big = validate_assumptions(spec_of({{2, 0}, {0, 1}}, 0.5, 1.0));
    REQUIRE(big.size() == 1);
    CHECK(big[0].kind == AssumptionViolation::Kind::Boundedness);
    CHECK(big[0].index == 0);
    CHECK(big[0].margin == Catch::Approx(-1.0));
}

TEST_CASE("random instances satisfy the assumptions", "[models]") {
    Rng rng(1);
    for (int rep = 0; rep < 20; ++rep) {
        const InstanceSpec spec = random_instance(10, 3, 0.5, 1.5, 1.0, rng);
        CHECK(validate_assumptions(spec).empty());
        CHECK(spec.w_star.colwise().norm().maxCoeff() == Catch::Approx(1.0));
    }
}

TEST_CASE("max observations, closed-form means", "[models]") {
    Rng rng(2);
    SECTION("k = 1, w = 0 gives standard normal outcomes") {
        const auto obs = gen_max_observations({Matrix::Zero(3, 1), 0.5, 1.0}, 100000, rng);
        std::vector<double> y;
        for (const auto& o : obs) y.push_back(o.y_max);
        const auto ms = oracle::mean_se(y);
        CHECK(std::abs(ms.mean) <= 3.0 * ms.se);
    }
    SECTION("k = 2, w = 0 gives the max of two normals") {
        const auto obs = gen_max_observations({Matrix::Zero(3, 2), 0.5, 1.0}, 100000, rng);
        std::vector<double> y;
        for (const auto& o : obs) y.push_back(o.y_max);
        const auto ms = oracle::mean_se(y);
        CHECK(std::abs(ms.mean - 1.0 / std::sqrt(std::numbers::pi)) <= 3.0 * ms.se);
    }
}

TEST_CASE("max observations are the max of their latent outcomes", "[models]") {
    Rng rng(3);
    const InstanceSpec spec = random_instance(4, 3, 0.5, 1.5, 1.0, rng);
    const auto traced = gen_max_observations_traced(spec, 5000, rng);
    std::vector<double> xi;
    for (std::size_t t = 0; t < traced.observations.size(); ++t) {
        const auto& o = traced.observations[t];
        const Vector& y = traced.latents[t];
        for (Eigen::Index i = 0; i < y.size(); ++i) REQUIRE(o.y_max >= y(i));
        REQUIRE(o.y_max == y.maxCoeff());
        const Vector noise = y - spec.w_star.transpose() * o.x;
        for (double v : noise) xi.push_back(v);
    }
    CHECK(ks_statistic(xi, oracle::Phi) <= 0.02);
}

TEST_CASE("second-price observations", "[models]") {
    Rng rng(4);
    CHECK_THROWS_AS(gen_second_price_observations({Matrix::Zero(2, 1), 0.5, 1.0}, 10, rng),
                    std::invalid_argument);

    SECTION("symmetric instance has a uniform winner") {
        const InstanceSpec spec = spec_of({{1, 0}, {0, 1}}, 0.5, 1.0);
        const auto obs = gen_second_price_observations(spec, 100000, rng);
        std::vector<std::size_t> counts(2, 0);
        for (const auto& o : obs) ++counts[static_cast<std::size_t>(o.i_max)];
        const std::vector<double> probs{0.5, 0.5};
        CHECK(chi_square_test(counts, probs).p_value > 0.01);
    }
    SECTION("w = 0: the second price is the min of two normals") {
        const auto obs = gen_second_price_observations({Matrix::Zero(3, 2), 0.5, 1.0}, 100000, rng);
        std::vector<double> y;
        for (const auto& o : obs) y.push_back(o.y_smax);
        const auto ms = oracle::mean_se(y);
        CHECK(std::abs(ms.mean + 1.0 / std::sqrt(std::numbers::pi)) <= 3.0 * ms.se);
    }
    SECTION("winner and runner-up agree with the latent outcomes") {
        const InstanceSpec spec = random_instance(5, 4, 0.5, 1.5, 1.0, rng);
        const auto traced = gen_second_price_observations_traced(spec, 5000, rng);
        for (std::size_t t = 0; t < traced.observations.size(); ++t) {
            const auto& o = traced.observations[t];
            const Vector& y = traced.latents[t];
            Eigen::Index arg = 0;
            y.maxCoeff(&arg);
            REQUIRE(o.i_max == arg);
            REQUIRE(o.y_smax <= y(o.i_max));
            double second = -kInf;
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                if (i != arg) second = std::max(second, y(i));
            }
            REQUIRE(o.y_smax == second);
        }
    }
}

TEST_CASE("coarse observations", "[models]") {
    Rng rng(5);
    SECTION("single-cell partition reports the whole space") {
        const Partition whole = BoxListPartition{{whole_space(3)}};
        for (const auto& o : gen_coarse_observations(Vector::Zero(3), whole, 100, rng)) {
            const Box& b = std::get<Box>(o.set);
            CHECK((b.lower.array() == -kInf).all());
            CHECK((b.upper.array() == kInf).all());
        }
    }
    SECTION("unit grid cell [0, 1) has mass Phi(1) - Phi(0)") {
        const Partition grid = GridPartition{1.0, Vector::Zero(1)};
        const auto obs = gen_coarse_observations(Vector::Zero(1), grid, 100000, rng);
        std::vector<double> hit;
        for (const auto& o : obs) hit.push_back(std::get<Box>(o.set).lower(0) == 0.0 ? 1.0 : 0.0);
        const auto ms = oracle::mean_se(hit);
        CHECK(std::abs(ms.mean - (oracle::Phi(1.0) - 0.5)) <= 3.0 * ms.se);
    }
    SECTION("fine grid frequencies track the density on central cells") {
        const double width = 1e-3;
        const Partition grid = GridPartition{width, Vector::Zero(1)};
        std::vector<double> counts(10, 0.0);
        std::size_t total = 0;
        for (int batch = 0; batch < 10; ++batch) {
            const auto obs = gen_coarse_observations(Vector::Zero(1), grid, 1000000, rng);
            total += obs.size();
            for (const auto& o : obs) {
                const auto cell = static_cast<long>(std::lround(std::get<Box>(o.set).lower(0) / width));
                if (cell >= -5 && cell < 5) counts[static_cast<std::size_t>(cell + 5)] += 1.0;
            }
        }
        for (int c = -5; c < 5; ++c) {
            const double density = counts[static_cast<std::size_t>(c + 5)] /
                                   (static_cast<double>(total) * width);
            const double expected = oracle::phi((c + 0.5) * width);
            INFO("cell " << c);
            CHECK(std::abs(density / expected - 1.0) <= 0.05);
        }
    }
    SECTION("latent draw lies in its cell and in the localized cell") {
        const Partition grid = GridPartition{0.7, Vector::Constant(2, 0.1)};
        Vector mu(2);
        mu << 1.0, -2.0;
        const auto traced = gen_coarse_observations_traced(mu, grid, 20000, rng);
        for (std::size_t t = 0; t < traced.observations.size(); ++t) {
            const Vector& z = traced.latents[t];
            REQUIRE(contains(traced.observations[t].set, z));
            if (z.lpNorm<Eigen::Infinity>() <= 3.0) {
                REQUIRE(contains(localize(traced.observations[t].set, 3.0), z));
            }
        }
    }
}

TEST_CASE("generators are deterministic", "[models]") {
    Rng a(77);
    Rng b(77);
    const InstanceSpec spec = random_instance(4, 2, 0.5, 1.5, 1.0, a);
    const InstanceSpec spec_b = random_instance(4, 2, 0.5, 1.5, 1.0, b);
    REQUIRE(spec.w_star == spec_b.w_star);
    const auto x = gen_second_price_observations(spec, 1000, a);
    const auto y = gen_second_price_observations(spec, 1000, b);
    for (std::size_t i = 0; i < x.size(); ++i) {
        REQUIRE(x[i].x == y[i].x);
        REQUIRE(x[i].i_max == y[i].i_max);
        REQUIRE(x[i].y_smax == y[i].y_smax);
    }
}
