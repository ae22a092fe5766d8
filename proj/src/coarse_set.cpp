#include "selfsel/coarse_set.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "selfsel/truncnorm.hpp"

namespace selfsel {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double box_representative(double lo, double hi) {
    if (std::isfinite(lo) && std::isfinite(hi)) {
        return 0.5 * (lo + hi);
    }
    return std::clamp(0.0, lo, hi);
}

// Cyclic projections onto the halfspaces of `poly` and the cube [-r, r]^d.
// Returns a point of the intersection, or nothing if the sweeps stall.
std::optional<Vector> find_point_in_cube(const Polytope& poly, double r) {
    constexpr int kMaxSweeps = 20000;
    constexpr double kTol = 1e-12;
    Vector x = poly.interior.cwiseMax(-r).cwiseMin(r);
    const Vector row_norm2 = poly.a.rowwise().squaredNorm();
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        for (Eigen::Index i = 0; i < poly.a.rows(); ++i) {
            const double excess = poly.a.row(i).dot(x) - poly.b(i);
            if (excess > 0.0 && row_norm2(i) > 0.0) {
                x -= (excess / row_norm2(i)) * poly.a.row(i).transpose();
            }
        }
        x = x.cwiseMax(-r).cwiseMin(r);
        if (poly.max_violation(x) <= kTol) {
            return x;
        }
    }
    return std::nullopt;
}

}  // namespace

bool Box::contains(const Vector& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

bool Box::contains_half_open(const Vector& x) const {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!(x(i) >= lower(i) && (x(i) < upper(i) || upper(i) == kInf))) {
            return false;
        }
    }
    return true;
}

bool Box::bounded() const { return lower.allFinite() && upper.allFinite(); }

Polytope::Polytope(Matrix a_in, Vector b_in, Vector interior_in)
    : a(std::move(a_in)), b(std::move(b_in)), interior(std::move(interior_in)) {
    if (a.rows() != b.size() || a.cols() != interior.size()) {
        throw std::invalid_argument("Polytope: inconsistent dimensions");
    }
    if (!contains(interior)) {
        throw std::invalid_argument("Polytope: interior point violates A x <= b");
    }
}

bool Polytope::contains(const Vector& x, double tol) const { return max_violation(x) <= tol; }

double Polytope::max_violation(const Vector& x) const {
    if (a.rows() == 0) {
        return 0.0;
    }
    return std::max(0.0, (a * x - b).maxCoeff());
}

Eigen::Index dim(const CoarseSet& set) {
    return std::visit(Overloaded{[](const Box& s) { return s.dim(); },
                                 [](const Polytope& s) { return s.dim(); },
                                 [](const Singleton& s) { return s.point.size(); }},
                      set);
}

bool contains(const CoarseSet& set, const Vector& x, double tol) {
    return std::visit(
        Overloaded{[&](const Box& s) {
                       return (x.array() >= s.lower.array() - tol).all() &&
                              (x.array() <= s.upper.array() + tol).all();
                   },
                   [&](const Polytope& s) { return s.contains(x, tol); },
                   [&](const Singleton& s) { return (x - s.point).cwiseAbs().maxCoeff() <= tol; }},
        set);
}

Box whole_space(Eigen::Index d) {
    return Box{Vector::Constant(d, -kInf), Vector::Constant(d, kInf)};
}

CoarseSet locate(const Partition& partition, const Vector& x) {
    return std::visit(
        Overloaded{
            [&](const GridPartition& grid) -> CoarseSet {
                if (!(grid.width > 0.0)) {
                    throw std::logic_error("locate: grid width must be positive");
                }
                const Vector offset =
                    grid.offset.size() == 0 ? Vector::Zero(x.size()) : grid.offset;
                Box cell{Vector(x.size()), Vector(x.size())};
                for (Eigen::Index i = 0; i < x.size(); ++i) {
                    const double cell_index = std::floor((x(i) - offset(i)) / grid.width);
                    cell.lower(i) = offset(i) + cell_index * grid.width;
                    cell.upper(i) = offset(i) + (cell_index + 1.0) * grid.width;
                    // Guard the half-open convention against rounding in the division.
                    if (x(i) < cell.lower(i)) {
                        cell.upper(i) = cell.lower(i);
                        cell.lower(i) -= grid.width;
                    } else if (x(i) >= cell.upper(i)) {
                        cell.lower(i) = cell.upper(i);
                        cell.upper(i) += grid.width;
                    }
                }
                return cell;
            },
            [&](const BoxListPartition& list) -> CoarseSet {
                for (const Box& cell : list.cells) {
                    if (cell.contains_half_open(x)) {
                        return cell;
                    }
                }
                throw std::logic_error("locate: no box cell contains the point");
            },
            [&](const PolytopeListPartition& list) -> CoarseSet {
                if (list.locator) {
                    if (auto idx = list.locator(x); idx && *idx < list.cells.size()) {
                        return list.cells[*idx];
                    }
                    throw std::logic_error("locate: polytope locator returned no cell");
                }
                for (const Polytope& cell : list.cells) {
                    if (cell.contains(x, 0.0)) {
                        return cell;
                    }
                }
                throw std::logic_error("locate: no polytope cell contains the point");
            }},
        partition);
}

CoarseSet localize(const CoarseSet& set, double radius) {
    return std::visit(
        Overloaded{
            [&](const Box& box) -> CoarseSet {
                Box clipped{box.lower.cwiseMax(-radius), box.upper.cwiseMin(radius)};
                if ((clipped.lower.array() < clipped.upper.array()).all()) {
                    return clipped;
                }
                Vector rep(box.dim());
                for (Eigen::Index i = 0; i < box.dim(); ++i) {
                    rep(i) = box_representative(box.lower(i), box.upper(i));
                }
                return Singleton{rep};
            },
            [&](const Polytope& poly) -> CoarseSet {
                const Eigen::Index d = poly.dim();
                std::optional<Vector> start;
                if (poly.interior.cwiseAbs().maxCoeff() <= radius) {
                    start = poly.interior;
                } else {
                    start = find_point_in_cube(poly, radius);
                }
                if (!start) {
                    return Singleton{poly.interior};
                }
                Matrix a(poly.a.rows() + 2 * d, d);
                Vector b(poly.b.size() + 2 * d);
                a << poly.a, Matrix::Identity(d, d), -Matrix::Identity(d, d);
                b << poly.b, Vector::Constant(2 * d, radius);
                return Polytope(std::move(a), std::move(b), *start);
            },
            [&](const Singleton& s) -> CoarseSet { return s; }},
        set);
}

std::size_t default_burn_in(Eigen::Index d) { return static_cast<std::size_t>(64 * d); }

Vector sample_truncated_gaussian_on_set(const Vector& mu, const CoarseSet& set, Rng& rng,
                                        std::size_t burn_in) {
    if (dim(set) != mu.size()) {
        throw std::invalid_argument("sample_truncated_gaussian_on_set: dimension mismatch");
    }
    return std::visit(
        Overloaded{[&](const Box& box) {
                       Vector y(mu.size());
                       for (Eigen::Index i = 0; i < mu.size(); ++i) {
                           if (box.lower(i) >= box.upper(i)) {
                               y(i) = box.lower(i);
                           } else {
                               y(i) = sample_truncnorm(
                                   mu(i), TruncInterval{box.lower(i), box.upper(i)}, rng);
                           }
                       }
                       return y;
                   },
                   [&](const Polytope& poly) {
                       const std::size_t steps =
                           burn_in == 0 ? default_burn_in(poly.dim()) : burn_in;
                       return hit_and_run(mu, poly, poly.interior, steps, rng);
                   },
                   [&](const Singleton& s) { return s.point; }},
        set);
}

Vector hit_and_run(const Vector& mu, const Polytope& polytope, const Vector& start,
                   std::size_t steps, Rng& rng, const std::function<void(const Vector&)>& visit) {
    if (!polytope.contains(start)) {
        throw std::invalid_argument("hit_and_run: start point is infeasible");
    }
    const Eigen::Index d = polytope.dim();
    Vector x = start;
    Vector u(d);
    for (std::size_t step = 0; step < steps; ++step) {
        for (Eigen::Index i = 0; i < d; ++i) {
            u(i) = rng.normal();
        }
        u.normalize();
        double t_lo = -kInf;
        double t_hi = kInf;
        for (Eigen::Index r = 0; r < polytope.a.rows(); ++r) {
            const double rate = polytope.a.row(r).dot(u);
            const double slack = std::max(0.0, polytope.b(r) - polytope.a.row(r).dot(x));
            if (rate > 1e-14) {
                t_hi = std::min(t_hi, slack / rate);
            } else if (rate < -1e-14) {
                t_lo = std::max(t_lo, slack / rate);
            }
        }
        if (t_lo < t_hi) {
            const double center = (mu - x).dot(u);
            const double t = sample_truncnorm(center, TruncInterval{t_lo, t_hi}, rng);
            x += t * u;
        }
        if (visit) {
            visit(x);
        }
    }
    return x;
}

}  // namespace selfsel
