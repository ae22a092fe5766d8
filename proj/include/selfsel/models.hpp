#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "selfsel/coarse_set.hpp"
#include "selfsel/rng.hpp"
#include "selfsel/types.hpp"

namespace selfsel {

/// Ground truth for a self-selection instance. `c` is the separability
/// margin, `C` the per-column norm bound.
struct InstanceSpec {
    RegressorMatrix w_star;
    double c = 0.5;
    double C = 1.0;

    [[nodiscard]] Eigen::Index d() const { return w_star.rows(); }
    [[nodiscard]] Eigen::Index k() const { return w_star.cols(); }
};

struct AssumptionViolation {
    enum class Kind { Shape, NonFinite, Constant, Separability, Boundedness };
    Kind kind;
    /// Offending column (0-based), or -1 when the violation is global.
    Eigen::Index index = -1;
    /// Signed slack of the violated inequality (negative when violated).
    double margin = 0.0;
    std::string message;
};

/// Checks ||w_i||^2 >= c + max_{j != i} |<w_j, w_i>| and max_i ||w_i|| <= C.
/// Empty result iff the instance satisfies both assumptions.
[[nodiscard]] std::vector<AssumptionViolation> validate_assumptions(const InstanceSpec& spec);

/// Random instance: columns uniform on the sphere of radius `column_norm`,
/// redrawn until the assumptions hold. Throws std::runtime_error after 10000
/// rejected draws.
[[nodiscard]] InstanceSpec random_instance(Eigen::Index d, Eigen::Index k, double c, double C,
                                           double column_norm, Rng& rng);

struct MaxObservation {
    Vector x;
    double y_max = 0.0;
};

struct SecondPriceObservation {
    Vector x;
    /// Winner index, 0-based.
    Eigen::Index i_max = 0;
    double y_smax = 0.0;
};

struct CoarseObservation {
    CoarseSet set;
};

/// Observations together with the latent draw that produced each one. Only
/// the test-facing generators return these.
template <class Obs>
struct Traced {
    std::vector<Obs> observations;
    std::vector<Vector> latents;
};

[[nodiscard]] std::vector<MaxObservation> gen_max_observations(const InstanceSpec& spec,
                                                               std::size_t n, Rng& rng);
[[nodiscard]] Traced<MaxObservation> gen_max_observations_traced(const InstanceSpec& spec,
                                                                 std::size_t n, Rng& rng);

/// Requires k >= 2 (std::invalid_argument otherwise). Ties go to the lowest index.
[[nodiscard]] std::vector<SecondPriceObservation> gen_second_price_observations(
    const InstanceSpec& spec, std::size_t n, Rng& rng);
[[nodiscard]] Traced<SecondPriceObservation> gen_second_price_observations_traced(
    const InstanceSpec& spec, std::size_t n, Rng& rng);

[[nodiscard]] std::vector<CoarseObservation> gen_coarse_observations(const Vector& mu_star,
                                                                     const Partition& partition,
                                                                     std::size_t n, Rng& rng);
[[nodiscard]] Traced<CoarseObservation> gen_coarse_observations_traced(const Vector& mu_star,
                                                                       const Partition& partition,
                                                                       std::size_t n, Rng& rng);

}  // namespace selfsel
