#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "selfsel/rng.hpp"
#include "selfsel/types.hpp"

namespace selfsel {

/// Axis-aligned box; bounds may be infinite. As a partition cell it is
/// half-open, [lower, upper), as a sampling region it is closed.
struct Box {
    Vector lower;
    Vector upper;

    [[nodiscard]] Eigen::Index dim() const { return lower.size(); }
    [[nodiscard]] bool contains(const Vector& x) const;
    [[nodiscard]] bool contains_half_open(const Vector& x) const;
    [[nodiscard]] bool bounded() const;
};

/// {x : A x <= b}, with a feasible point certifying nonemptiness.
struct Polytope {
    Matrix a;
    Vector b;
    Vector interior;

    Polytope() = default;
    /// Throws std::invalid_argument if `interior` violates A x <= b.
    Polytope(Matrix a, Vector b, Vector interior);

    [[nodiscard]] Eigen::Index dim() const { return a.cols(); }
    [[nodiscard]] bool contains(const Vector& x, double tol = 1e-9) const;
    [[nodiscard]] double max_violation(const Vector& x) const;
};

struct Singleton {
    Vector point;
};

using CoarseSet = std::variant<Box, Polytope, Singleton>;

[[nodiscard]] Eigen::Index dim(const CoarseSet& set);
[[nodiscard]] bool contains(const CoarseSet& set, const Vector& x, double tol = 1e-9);
/// The whole space R^d as a box.
[[nodiscard]] Box whole_space(Eigen::Index d);

struct GridPartition {
    double width = 1.0;
    Vector offset;
};

struct BoxListPartition {
    std::vector<Box> cells;
};

struct PolytopeListPartition {
    std::vector<Polytope> cells;
    /// Optional cell lookup; when empty, the first cell containing x wins.
    std::function<std::optional<std::size_t>(const Vector&)> locator;
};

using Partition = std::variant<GridPartition, BoxListPartition, PolytopeListPartition>;

/// Cell of `partition` that contains x. Grid cells are
/// [offset + i w, offset + (i+1) w) per coordinate.
/// Throws std::logic_error when no cell contains x.
[[nodiscard]] CoarseSet locate(const Partition& partition, const Vector& x);

/// P intersected with B_inf(0, R) when that is nonempty, otherwise a singleton
/// at a deterministic point of P (the box midpoint, or the clamp of the origin
/// for unbounded coordinates; the stored interior point for polytopes).
[[nodiscard]] CoarseSet localize(const CoarseSet& set, double radius);

/// Burn-in for polytope sampling when the caller does not choose one.
[[nodiscard]] std::size_t default_burn_in(Eigen::Index d);

/// Draw from N(mu, I) restricted to `set`. Boxes are sampled exactly
/// coordinate by coordinate, polytopes with hit-and-run started at the stored
/// interior point.
[[nodiscard]] Vector sample_truncated_gaussian_on_set(const Vector& mu, const CoarseSet& set,
                                                      Rng& rng, std::size_t burn_in = 0);

/// Hit-and-run for N(mu, I) restricted to a polytope. Each step draws a
/// uniform direction, intersects the line with every halfspace, and samples
/// the one-dimensional truncated normal along the chord.
/// Throws std::invalid_argument if `start` is infeasible.
[[nodiscard]] Vector hit_and_run(const Vector& mu, const Polytope& polytope, const Vector& start,
                                 std::size_t steps, Rng& rng,
                                 const std::function<void(const Vector&)>& visit = {});

}  // namespace selfsel
