#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfsel/coarse_set.hpp"
#include "selfsel/models.hpp"

namespace selfsel {

/// First line of an NDJSON dataset.
struct DatasetHeader {
    std::string model;  // "max", "second-price" or "coarse"
    Eigen::Index d = 0;
    Eigen::Index k = 0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string version;
};

using ObservationList = std::variant<std::vector<MaxObservation>,
                                     std::vector<SecondPriceObservation>,
                                     std::vector<CoarseObservation>>;

struct Dataset {
    DatasetHeader header;
    ObservationList observations;
};

/// Infinite bounds are written as null.
[[nodiscard]] nlohmann::json coarse_set_to_json(const CoarseSet& set);
[[nodiscard]] CoarseSet coarse_set_from_json(const nlohmann::json& j);

/// {"type":"grid","width":w,"offset":[...]}, {"type":"boxes","cells":[...]}
/// or {"type":"polytopes","cells":[...]}.
[[nodiscard]] nlohmann::json partition_to_json(const Partition& partition);
[[nodiscard]] Partition partition_from_json(const nlohmann::json& j, Eigen::Index d);

[[nodiscard]] nlohmann::json vector_to_json(const Vector& v);
[[nodiscard]] Vector vector_from_json(const nlohmann::json& j);
/// Matrices are written as a list of columns.
[[nodiscard]] nlohmann::json matrix_to_json(const Matrix& m);
[[nodiscard]] Matrix matrix_from_json(const nlohmann::json& j);

/// Header line followed by one record per observation. Doubles are written
/// with round-trip precision.
void write_dataset(std::ostream& out, const Dataset& dataset);

/// Throws std::runtime_error on malformed input or when the record count or
/// dimensions disagree with the header.
[[nodiscard]] Dataset read_dataset(std::istream& in);

}  // namespace selfsel
