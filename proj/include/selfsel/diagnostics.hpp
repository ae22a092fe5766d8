#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfsel/models.hpp"
#include "selfsel/rng.hpp"
#include "selfsel/types.hpp"

namespace selfsel {

enum class SelectionModel { Max, SecondPrice };

[[nodiscard]] std::string to_string(SelectionModel model);

/// Outcome of one numerical check. `pass` is exactly statistic <= threshold.
struct DiagnosticReport {
    std::string name;
    double statistic = 0.0;
    double threshold = 0.0;
    double standard_error = 0.0;
    bool pass = false;
    std::map<std::string, std::size_t> sample_sizes;
    std::uint64_t seed = 0;
};

[[nodiscard]] DiagnosticReport make_report(std::string name, double statistic, double threshold,
                                           double standard_error,
                                           std::map<std::string, std::size_t> sample_sizes,
                                           std::uint64_t seed);

using LossFn = std::function<double(const Matrix&)>;
using GradFn = std::function<Matrix(const Matrix&)>;

/// Central differences with step h on every entry of `point`, compared to
/// grad(point). The statistic is max |fd - g| / max(1, |g|).
[[nodiscard]] DiagnosticReport fd_gradient_check(const LossFn& loss, const GradFn& grad,
                                                 const Matrix& point, double h,
                                                 double threshold = 1e-4);

/// Smallest eigenvalue of the Monte-Carlo average of
/// (I - Cov[z | obs]) (x) x x^T over n_obs observations drawn from `truth`,
/// evaluated at W (vec(W) stacks columns). Cov is exact per observation for
/// k <= 8 and estimated from n_inner conditional draws otherwise.
/// Throws std::invalid_argument when d k > 64.
[[nodiscard]] double hessian_min_eig_estimate(SelectionModel model, const InstanceSpec& truth,
                                              const Matrix& w, std::size_t n_obs,
                                              std::size_t n_inner, Rng& rng);

/// Mean exact per-sample gradient at W* over n fresh observations. The
/// statistic is max_entry |mean| / SE, the threshold 4.
[[nodiscard]] DiagnosticReport stationarity_test(SelectionModel model, const InstanceSpec& truth,
                                                 std::size_t n, Rng& rng);

struct GrowthPoint {
    std::size_t direction = 0;
    double radius = 0.0;
    double gap = 0.0;
    double standard_error = 0.0;
};

/// NLL gap L(W* + r V) - L(W*) for `directions` random unit-Frobenius V,
/// every radius evaluated on one common sample of n observations.
[[nodiscard]] std::vector<GrowthPoint> growth_probe(SelectionModel model,
                                                    const InstanceSpec& truth,
                                                    std::span<const double> radii, std::size_t n,
                                                    Rng& rng, std::size_t directions = 1);

/// Reduces a growth table to two reports: the most negative gap in SE units
/// (threshold 4) and the largest drop between consecutive radii in SE units
/// (threshold 4).
[[nodiscard]] std::vector<DiagnosticReport> growth_reports(std::span<const GrowthPoint> table,
                                                           std::size_t n, std::uint64_t seed);

/// sup_x |F_n(x) - cdf(x)|.
[[nodiscard]] double ks_statistic(std::vector<double> samples,
                                  const std::function<double(double)>& cdf);

/// sup_x |F_a(x) - F_b(x)|.
[[nodiscard]] double ks_two_sample(std::vector<double> a, std::vector<double> b);

struct ChiSquare {
    double statistic = 0.0;
    std::size_t dof = 0;
    double p_value = 1.0;
};

/// Pearson goodness of fit of `counts` against cell probabilities `probs`.
[[nodiscard]] ChiSquare chi_square_test(std::span<const std::size_t> counts,
                                        std::span<const double> probs);

/// Sum by recursive halving, independent of thread count.
[[nodiscard]] double pairwise_sum(std::span<const double> values);

[[nodiscard]] nlohmann::json to_json(const DiagnosticReport& report);
[[nodiscard]] std::string format_table(std::span<const DiagnosticReport> reports);

}  // namespace selfsel
