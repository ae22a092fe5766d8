#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "selfsel/coarse.hpp"
#include "selfsel/coarse_set.hpp"
#include "selfsel/models.hpp"
#include "selfsel/optimizer.hpp"

namespace selfsel::cli {

/// Anything wrong with the configuration or its referenced files (exit 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ModelTag { Max, SecondPrice, Coarse };

[[nodiscard]] std::string to_string(ModelTag tag);

struct InstanceConfig {
    Eigen::Index d = 0;
    Eigen::Index k = 0;
    double c = 0.5;
    double C = 1.0;
    double column_norm = 1.0;
    /// Explicit W* (columns); drawn at random from (d, k, column_norm) when empty.
    std::optional<Matrix> w_star;
};

struct CoarseRunConfig {
    Eigen::Index d = 0;
    std::optional<Vector> mu_star;
    /// ||mu*|| when mu* is drawn at random.
    double norm = 1.0;
    Partition partition = GridPartition{};
    CoarseConfig estimator;
};

struct DiagnoseConfig {
    std::vector<std::string> suites{"gradient", "stationarity", "hessian", "growth"};
    std::size_t fd_pairs = 100;
    double fd_step = 1e-5;
    std::size_t stationarity_n = 100000;
    std::size_t hessian_n = 20000;
    double hessian_radius = 0.1;
    std::size_t growth_n = 100000;
    std::vector<double> growth_radii{0.0, 0.05, 0.1, 0.2, 0.3};
};

struct RunConfig {
    ModelTag model = ModelTag::Max;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    InstanceConfig instance;
    CoarseRunConfig coarse;
    double warm_radius = 0.2;
    std::optional<std::filesystem::path> warm_file;
    double radius_factor = 2.0;
    std::string preset = "desk";
    PsgdConfig psgd = PsgdConfig::desk();
    std::size_t pilot = 2000;
    std::size_t boost_reps = 24;
    double boost_radius = 0.1;
    std::optional<std::filesystem::path> data_file;
    std::optional<double> max_error;
    DiagnoseConfig diagnose;
    std::filesystem::path out_dir = "out";
    /// FNV-1a of the config text and command-line overrides.
    std::string hash;
};

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> preset;
    std::optional<std::filesystem::path> out_dir;
    bool trace = false;
};

/// Parses a TOML run configuration. Relative paths are resolved against the
/// directory of the file. Throws ConfigError.
[[nodiscard]] RunConfig load_run_config(const std::filesystem::path& path,
                                        const Overrides& overrides);

[[nodiscard]] std::string fnv1a_hex(const std::string& text);

}  // namespace selfsel::cli
