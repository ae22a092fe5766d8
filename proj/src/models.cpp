#include "selfsel/models.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace selfsel {

namespace {

Vector draw_normal(Eigen::Index n, Rng& rng) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = rng.normal();
    }
    return v;
}

// Covariate and latent outcome vector y = W^T x + xi.
void draw_latent(const InstanceSpec& spec, Rng& rng, Vector& x, Vector& y) {
    x = draw_normal(spec.d(), rng);
    y = spec.w_star.transpose() * x;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        y(i) += rng.normal();
    }
}

// Argmax with ties resolved toward the lowest index.
Eigen::Index argmax(const Vector& y) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < y.size(); ++i) {
        if (y(i) > y(best)) {
            best = i;
        }
    }
    return best;
}

template <class Obs, class Make>
Traced<Obs> generate(const InstanceSpec& spec, std::size_t n, Rng& rng, bool keep_latents,
                     Make make) {
    Traced<Obs> out;
    out.observations.reserve(n);
    if (keep_latents) {
        out.latents.reserve(n);
    }
    Vector x;
    Vector y;
    for (std::size_t s = 0; s < n; ++s) {
        draw_latent(spec, rng, x, y);
        out.observations.push_back(make(x, y));
        if (keep_latents) {
            out.latents.push_back(y);
        }
    }
    return out;
}

MaxObservation make_max(const Vector& x, const Vector& y) { return {x, y.maxCoeff()}; }

SecondPriceObservation make_second_price(const Vector& x, const Vector& y) {
    const Eigen::Index winner = argmax(y);
    double second = -kInf;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        if (j != winner) {
            second = std::max(second, y(j));
        }
    }
    return {x, winner, second};
}

void require_second_price(const InstanceSpec& spec) {
    if (spec.k() < 2) {
        throw std::invalid_argument("second-price observations need k >= 2");
    }
}

Traced<CoarseObservation> generate_coarse(const Vector& mu_star, const Partition& partition,
                                          std::size_t n, Rng& rng, bool keep_latents) {
    Traced<CoarseObservation> out;
    out.observations.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        Vector z = mu_star + draw_normal(mu_star.size(), rng);
        out.observations.push_back({locate(partition, z)});
        if (keep_latents) {
            out.latents.push_back(std::move(z));
        }
    }
    return out;
}

}  // namespace

std::vector<AssumptionViolation> validate_assumptions(const InstanceSpec& spec) {
    using Kind = AssumptionViolation::Kind;
    std::vector<AssumptionViolation> out;
    if (spec.d() < 1 || spec.k() < 1) {
        out.push_back({Kind::Shape, -1, 0.0, "w_star must have d >= 1 rows and k >= 1 columns"});
        return out;
    }
    if (!spec.w_star.allFinite()) {
        out.push_back({Kind::NonFinite, -1, 0.0, "w_star has non-finite entries"});
        return out;
    }
    if (!(spec.c > 0.0 && spec.c <= 1.0) || !(spec.C >= 1.0)) {
        std::ostringstream msg;
        msg << "constants out of range: need 0 < c <= 1 and C >= 1 (c=" << spec.c
            << ", C=" << spec.C << ")";
        out.push_back({Kind::Constant, -1, 0.0, msg.str()});
    }
    const Matrix gram = spec.w_star.transpose() * spec.w_star;
    for (Eigen::Index i = 0; i < spec.k(); ++i) {
        double worst_overlap = 0.0;
        for (Eigen::Index j = 0; j < spec.k(); ++j) {
            if (j != i) {
                worst_overlap = std::max(worst_overlap, std::abs(gram(i, j)));
            }
        }
        const double sep_margin = gram(i, i) - spec.c - worst_overlap;
        if (sep_margin < 0.0) {
            std::ostringstream msg;
            msg << "separability fails for column " << i << ": ||w||^2=" << gram(i, i)
                << " < c + max overlap = " << spec.c + worst_overlap;
            out.push_back({Kind::Separability, i, sep_margin, msg.str()});
        }
        const double bound_margin = spec.C - std::sqrt(gram(i, i));
        if (bound_margin < 0.0) {
            std::ostringstream msg;
            msg << "boundedness fails for column " << i << ": ||w||=" << std::sqrt(gram(i, i))
                << " > C=" << spec.C;
            out.push_back({Kind::Boundedness, i, bound_margin, msg.str()});
        }
    }
    return out;
}

InstanceSpec random_instance(Eigen::Index d, Eigen::Index k, double c, double C,
                             double column_norm, Rng& rng) {
    if (d < 1 || k < 1) {
        throw std::invalid_argument("random_instance: need d >= 1 and k >= 1");
    }
    for (int attempt = 0; attempt < 10000; ++attempt) {
        InstanceSpec spec{Matrix(d, k), c, C};
        for (Eigen::Index i = 0; i < k; ++i) {
            Vector w = draw_normal(d, rng);
            spec.w_star.col(i) = column_norm * w / w.norm();
        }
        if (validate_assumptions(spec).empty()) {
            return spec;
        }
    }
    throw std::runtime_error("random_instance: no draw satisfied the assumptions");
}

std::vector<MaxObservation> gen_max_observations(const InstanceSpec& spec, std::size_t n,
                                                 Rng& rng) {
    return generate<MaxObservation>(spec, n, rng, false, make_max).observations;
}

Traced<MaxObservation> gen_max_observations_traced(const InstanceSpec& spec, std::size_t n,
                                                   Rng& rng) {
    return generate<MaxObservation>(spec, n, rng, true, make_max);
}

std::vector<SecondPriceObservation> gen_second_price_observations(const InstanceSpec& spec,
                                                                  std::size_t n, Rng& rng) {
    require_second_price(spec);
    return generate<SecondPriceObservation>(spec, n, rng, false, make_second_price).observations;
}

Traced<SecondPriceObservation> gen_second_price_observations_traced(const InstanceSpec& spec,
                                                                    std::size_t n, Rng& rng) {
    require_second_price(spec);
    return generate<SecondPriceObservation>(spec, n, rng, true, make_second_price);
}

std::vector<CoarseObservation> gen_coarse_observations(const Vector& mu_star,
                                                       const Partition& partition, std::size_t n,
                                                       Rng& rng) {
    return generate_coarse(mu_star, partition, n, rng, false).observations;
}

Traced<CoarseObservation> gen_coarse_observations_traced(const Vector& mu_star,
                                                         const Partition& partition,
                                                         std::size_t n, Rng& rng) {
    return generate_coarse(mu_star, partition, n, rng, true);
}

}  // namespace selfsel
