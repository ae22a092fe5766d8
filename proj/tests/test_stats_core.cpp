#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "selfsel/diagnostics.hpp"
#include "selfsel/gaussian.hpp"
#include "selfsel/rng.hpp"
#include "selfsel/truncnorm.hpp"

using namespace selfsel;
using Catch::Approx;

namespace {

std::vector<double> draws(double mu, TruncInterval iv, std::size_t n, Rng& rng) {
    std::vector<double> out(n);
    for (double& z : out) z = sample_truncnorm(mu, iv, rng);
    return out;
}

}  // namespace

TEST_CASE("rng streams are reproducible and distinct", "[rng]") {
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
    Rng s1 = Rng(42).split(1);
    Rng s2 = Rng(42).split(2);
    int equal = 0;
    for (int i = 0; i < 100; ++i) equal += s1.next_u64() == s2.next_u64();
    CHECK(equal == 0);
    Rng u(7);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform();
        REQUIRE(x > 0.0);
        REQUIRE(x < 1.0);
        REQUIRE(u.below(3) < 3);
    }
}

TEST_CASE("epoch order visits every index once per pass", "[rng]") {
    Rng rng(3);
    EpochOrder order(17, rng);
    for (int pass = 0; pass < 3; ++pass) {
        std::set<std::size_t> seen;
        for (int i = 0; i < 17; ++i) seen.insert(order.next());
        CHECK(seen.size() == 17);
    }
}

TEST_CASE("standard normal basics", "[gaussian]") {
    CHECK(std_cdf(0.0) == 0.5);
    CHECK(std_pdf(0.0) == Approx(0.3989422804014327).epsilon(1e-15));
    CHECK(std_quantile(0.5) == 0.0);
    CHECK_THROWS_AS(std_quantile(0.0), std::domain_error);
    CHECK_THROWS_AS(std_quantile(1.0), std::domain_error);
    CHECK(std_log_pdf(1.3) == Approx(std::log(oracle::phi(1.3))).epsilon(1e-14));
}

TEST_CASE("cdf agrees with an independent implementation and is monotone", "[gaussian]") {
    double prev = 0.0;
    for (double z = -37.0; z <= 8.0; z += 0.01) {
        const double c = std_cdf(z);
        REQUIRE(c >= prev);
        prev = c;
        REQUIRE(c == Approx(oracle::Phi(z)).epsilon(1e-13));
        const double log_ref = z < 0.0 ? std::log(oracle::Phi(z)) : std::log1p(-oracle::Phi(-z));
        REQUIRE(std_log_cdf(z) == Approx(log_ref).epsilon(1e-13));
    }
    // log Phi stays finite far beyond underflow: log Phi(z) ~ -z^2/2 - log(-z sqrt(2 pi)).
    const double z = -1e4;
    CHECK(std_log_cdf(z) == Approx(-0.5 * z * z - std::log(-z) - kLogSqrt2Pi).epsilon(1e-12));
}

TEST_CASE("quantile inverts the cdf on |z| <= 8", "[gaussian]") {
    for (double z = -8.0; z <= 5.0; z += 0.001) {
        REQUIRE(std::abs(std_quantile(std_cdf(z)) - z) <= 1e-10);
    }
    // Above z = 5 the cdf rounds to within 2^-52 of 1 and the round trip can
    // only be as good as that rounding allows.
    for (double z = 5.0; z <= 8.0; z += 0.001) {
        REQUIRE(std::abs(std_quantile(std_cdf(z)) - z) <= std::max(1e-10, 0x1p-52 / std_pdf(z)));
    }
    for (double lp : {-1.0, -50.0, -700.0, -1e5, -1e300}) {
        const double z = std_quantile_log(lp);
        REQUIRE(std::isfinite(z));
        CHECK(std_log_cdf(z) == Approx(lp).epsilon(1e-12));
    }
}

TEST_CASE("mills ratio and log-space helpers never produce NaN", "[gaussian]") {
    for (double z : {-1e6, -1e3, -40.0, -7.5, 0.0, 7.5, 40.0, 1e3}) {
        const double r = std_mills_lower(z);
        REQUIRE(std::isfinite(r));
        REQUIRE(r >= 0.0);
    }
    CHECK(std_mills_lower(-1e3) == Approx(1e3).epsilon(1e-5));
    CHECK(log_add_exp(-1000.0, -1000.0) == Approx(-1000.0 + std::log(2.0)));
    CHECK(log_sub_exp(0.0, 0.0) == -kInf);
}

TEST_CASE("inverse transform window", "[truncnorm]") {
    CHECK(inverse_transform_window(0.0, 1e-9) ==
          Approx(std::max(8.0, 4.0 * std::sqrt(2.0 * std::log(1e9)))));
    CHECK(inverse_transform_window(-3.0, 0.5) == Approx(std::max(8.0, 4.0 * std::sqrt(2.0 * std::log(2.0)) + 3.0)));
    CHECK(inverse_transform_window(0.0, 0.9) == 8.0);
}

TEST_CASE("untruncated draws are standard normal", "[truncnorm]") {
    Rng rng(11);
    const auto z = draws(0.0, TruncInterval{}, 100000, rng);
    CHECK(ks_statistic(z, oracle::Phi) <= 0.01);
}

TEST_CASE("lower half-line mean at mu = 0", "[truncnorm]") {
    Rng rng(12);
    const auto z = draws(0.0, TruncInterval::below(0.0), 100000, rng);
    const auto ms = oracle::mean_se(z);
    CHECK(std::abs(ms.mean + 0.7978845608) <= 3.0 * ms.se);
}

TEST_CASE("far tail truncation at mu = 5, b = 0", "[truncnorm]") {
    Rng rng(13);
    const auto z = draws(5.0, TruncInterval::below(0.0), 100000, rng);
    for (double v : z) REQUIRE(v <= 0.0);
    const auto ms = oracle::mean_se(z);
    const double reference = oracle::truncated_mean(5.0, -kInf, 0.0);
    CHECK(std::abs(ms.mean - reference) <= 3.0 * ms.se);
    CHECK(truncnorm_mean(5.0, TruncInterval::below(0.0)) == Approx(reference).epsilon(1e-9));
}

TEST_CASE("sampled law matches the quadrature cdf", "[truncnorm]") {
    struct Case {
        double mu;
        TruncInterval iv;
    };
    const std::vector<Case> cases = {
        {0.0, TruncInterval::below(0.0)},      {3.0, TruncInterval::below(-1.0)},
        {-2.0, TruncInterval::above(1.5)},     {0.0, TruncInterval::between(-0.5, 0.5)},
        {4.0, TruncInterval::between(-1.0, 0.0)}, {0.0, TruncInterval::between(6.0, 6.5)},
        {0.0, TruncInterval::above(-2.0)},     {10.0, TruncInterval::below(3.0)},
    };
    Rng rng(14);
    for (const Case& c : cases) {
        const double mass = std::exp(truncnorm_log_mass(c.mu, c.iv));
        REQUIRE(mass >= 1e-12);
        const auto z = draws(c.mu, c.iv, 100000, rng);
        for (double v : z) REQUIRE(c.iv.contains(v));
        const double ks = oracle::ks_truncated_normal(z, c.mu, c.iv.lower, c.iv.upper);
        INFO("mu=" << c.mu << " [" << c.iv.lower << ", " << c.iv.upper << "] ks=" << ks);
        CHECK(ks <= 0.02);
    }
}

TEST_CASE("truncated mean and variance against quadrature", "[truncnorm]") {
    for (double mu : {-3.0, 0.0, 2.5}) {
        for (auto [lo, hi] : std::vector<std::pair<double, double>>{
                 {-kInf, 0.0}, {-1.0, 2.0}, {1.0, kInf}, {-0.1, 0.1}}) {
            const TruncInterval iv{lo, hi};
            const double m = oracle::truncated_mean(mu, lo, hi);
            const double mass = oracle::integrate([&](double s) { return oracle::phi(s - mu); }, lo, hi);
            const double m2 =
                oracle::integrate([&](double s) { return s * s * oracle::phi(s - mu); }, lo, hi) / mass;
            CHECK(truncnorm_mean(mu, iv) == Approx(m).margin(1e-10));
            CHECK(truncnorm_variance(mu, iv) == Approx(m2 - m * m).margin(1e-9));
        }
    }
}

TEST_CASE("closed-form moments at the origin", "[truncnorm]") {
    CHECK(truncnorm_m2(0.0, 0.0) == 1.0);
    CHECK(truncnorm_m4(0.0, 0.0) == 3.0);
    CHECK(truncnorm_m2(0.0, kInf) == 1.0);
    CHECK(truncnorm_m4(0.0, kInf) == 3.0);
}

TEST_CASE("m2 and m4 agree with Monte Carlo on the grid", "[truncnorm]") {
    Rng rng(15);
    for (double mu : {-3.0, 0.0, 3.0}) {
        for (double b : {-3.0, 0.0, 3.0}) {
            const auto z = draws(mu, TruncInterval::below(b), 100000, rng);
            std::vector<double> z2(z.size());
            std::vector<double> z4(z.size());
            for (std::size_t i = 0; i < z.size(); ++i) {
                z2[i] = z[i] * z[i];
                z4[i] = z2[i] * z2[i];
            }
            const auto s2 = oracle::mean_se(z2);
            const auto s4 = oracle::mean_se(z4);
            INFO("mu=" << mu << " b=" << b);
            CHECK(std::abs(s2.mean - truncnorm_m2(mu, b)) <= 4.0 * s2.se);
            CHECK(std::abs(s4.mean - truncnorm_m4(mu, b)) <= 4.0 * s4.se);
        }
    }
}

TEST_CASE("lower truncation shrinks the variance", "[truncnorm]") {
    for (double mu = -6.0; mu <= 6.0; mu += 0.5) {
        for (double b = -6.0; b <= 6.0; b += 0.5) {
            const double m1 = truncnorm_mean(mu, TruncInterval::below(b));
            const double var = truncnorm_m2(mu, b) - m1 * m1;
            INFO("mu=" << mu << " b=" << b);
            CHECK(var > 0.0);
            CHECK(var <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("moments stay finite when the truncation mass underflows", "[truncnorm]") {
    for (double b : {-40.0, -200.0}) {
        const double m1 = truncnorm_mean(0.0, TruncInterval::below(b));
        CHECK(std::isfinite(m1));
        CHECK(m1 <= b);
        CHECK(std::isfinite(truncnorm_m2(0.0, b)));
        CHECK(std::isfinite(truncnorm_m4(0.0, b)));
        CHECK(std::isfinite(truncnorm_variance(0.0, TruncInterval::below(b))));
    }
    Rng rng(16);
    for (int i = 0; i < 1000; ++i) {
        const double z = sample_truncnorm(0.0, TruncInterval::below(-40.0), rng);
        REQUIRE(z <= -40.0);
        REQUIRE(z > -41.0);
    }
}
