#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "selfsel/rng.hpp"
#include "selfsel/types.hpp"

namespace selfsel {

/// Constants of the multi-stage projected SGD schedule.
///
/// The stage count, step size and iteration count follow
///   tau     = ceil(log2(eps0 / eps))
///   D0      = 2 eps0 / (eta sqrt(eps))
///   gamma0  = eps0 / (gamma_divisor G^2 tau)
///   T       = min(t_multiplier G^2 tau^2 / (eta^2 eps), t_cap)
/// with stage l using gamma0 2^-l and trust radius D0 2^-l.
struct PsgdConfig {
    double eps0 = 1.0;
    double eps = 0.01;
    double eta = 1.0;
    double G = 1.0;
    double t_multiplier = 40000.0;
    double gamma_divisor = 100.0;
    std::size_t t_cap = std::numeric_limits<std::size_t>::max();
    std::uint64_t seed = 0;
    /// Record a trace row every this many steps; 0 disables step tracing.
    std::size_t trace_stride = 0;

    /// Worst-case constants (t_multiplier 40000, gamma_divisor 100, no cap).
    static PsgdConfig paper();
    /// Desk-scale constants: t_multiplier 40, gamma_divisor 10, t_cap 2e5.
    static PsgdConfig desk();

    /// Throws std::invalid_argument when eps0 < eps, eps <= 0, or a
    /// multiplier is not positive.
    void validate() const;
};

struct Schedule {
    int tau = 0;
    double d0 = 0.0;
    double gamma0 = 0.0;
    std::size_t iterations = 0;
};

[[nodiscard]] Schedule schedule(const PsgdConfig& config);

struct Ball {
    Matrix center;
    double radius = 0.0;
};

/// {W : ||W - center||_F <= radius, ||w_i||_2 <= column_cap for all i}
/// intersected with every ball in `extra`. An infinite column cap drops the
/// column constraint.
struct ProjectionSet {
    Matrix center;
    double radius = 1.0;
    double column_cap = std::numeric_limits<double>::infinity();
    std::vector<Ball> extra;

    /// Largest constraint violation of W (0 when feasible).
    [[nodiscard]] double violation(const Matrix& w) const;
};

struct ProjectionResult {
    Matrix point;
    int sweeps = 0;
    /// Dykstra hit its sweep cap before converging.
    bool warning = false;
};

/// Euclidean projection onto the intersection via Dykstra's alternating
/// projections. Stops once a sweep moves the iterate by less than 1e-10 or
/// after 500 sweeps; the result is then clamped to feasibility within 1e-8.
[[nodiscard]] ProjectionResult project(const Matrix& w, const ProjectionSet& set);

struct StageRecord {
    int stage = 0;
    double gamma = 0.0;
    double radius = 0.0;
    std::size_t iterations = 0;
    /// ||w^(l) - w^(l-1)||_F between consecutive stage outputs.
    double moved = 0.0;
    /// The stage output w^(l).
    Matrix output;
};

/// One sampled step inside a stage (only when tracing is enabled).
struct StepRecord {
    int stage = 0;
    std::size_t step = 0;
    double gamma = 0.0;
    /// Smallest constraint slack of the iterate (negative means infeasible).
    double slack = 0.0;
    double gradient_norm = 0.0;
};

struct StageTrace {
    Schedule plan;
    std::vector<StageRecord> stages;
    std::vector<StepRecord> steps;
    std::size_t projection_warnings = 0;
};

struct PsgdResult {
    Matrix estimate;
    StageTrace trace;
};

/// Writes a stochastic gradient at W into `out`.
using GradientOracle = std::function<void(const Matrix& w, Rng& rng, Matrix& out)>;

/// Multi-stage projected SGD. Stage l restarts from the previous stage's
/// averaged iterate, takes T projected steps of size gamma0 2^-l inside
/// K intersected with a ball of radius D0 2^-l around that restart point, and
/// returns the uniform average of its iterates.
///
/// Throws std::invalid_argument if w0 is infeasible and std::runtime_error
/// if the oracle produces a non-finite gradient.
[[nodiscard]] PsgdResult iterative_psgd(const PsgdConfig& config, const ProjectionSet& feasible,
                                        const Matrix& w0, const GradientOracle& oracle);

struct Matching {
    double distance = 0.0;
    /// Column j of A is matched with column permutation[j] of B.
    std::vector<Eigen::Index> permutation;
};

/// min over column permutations pi of sqrt(sum_j ||a_j - b_pi(j)||^2).
/// Enumerates permutations for k <= 8 and runs the Hungarian method beyond.
[[nodiscard]] Matching permutation_distance(const Matrix& a, const Matrix& b);

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian method,
/// O(n^3)). Entry j of the result is the column assigned to row j.
[[nodiscard]] std::vector<Eigen::Index> hungarian_assignment(const Matrix& cost);

struct BoostChoice {
    std::size_t index = 0;
    /// Number of candidates (including itself) within the radius.
    std::size_t support = 0;
};

/// First candidate within `radius` (permutation distance) of more than half
/// of the m candidates, itself included. Empty when no candidate qualifies.
[[nodiscard]] std::optional<BoostChoice> cluster_boost(std::span<const Matrix> candidates,
                                                       double radius);

}  // namespace selfsel
