#include "selfsel/dataset.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace selfsel {

namespace {

using nlohmann::json;

json bound_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double bound_from_json(const json& j, double if_null) {
    return j.is_null() ? if_null : j.get<double>();
}

[[noreturn]] void malformed(const std::string& what) {
    throw std::runtime_error("dataset: " + what);
}

void check_dim(const Vector& v, Eigen::Index d, const char* what) {
    if (v.size() != d) {
        malformed(std::string(what) + " has the wrong dimension");
    }
}

}  // namespace

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

Vector vector_from_json(const json& j) {
    if (!j.is_array()) {
        malformed("expected an array of numbers");
    }
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

json matrix_to_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        out.push_back(vector_to_json(m.col(c)));
    }
    return out;
}

Matrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) {
        malformed("expected a non-empty list of columns");
    }
    const Vector first = vector_from_json(j[0]);
    Matrix m(first.size(), static_cast<Eigen::Index>(j.size()));
    for (std::size_t c = 0; c < j.size(); ++c) {
        const Vector col = vector_from_json(j[c]);
        check_dim(col, first.size(), "matrix column");
        m.col(static_cast<Eigen::Index>(c)) = col;
    }
    return m;
}

json coarse_set_to_json(const CoarseSet& set) {
    return std::visit(
        [](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Box>) {
                json lower = json::array();
                json upper = json::array();
                for (Eigen::Index i = 0; i < s.dim(); ++i) {
                    lower.push_back(bound_to_json(s.lower(i)));
                    upper.push_back(bound_to_json(s.upper(i)));
                }
                return {{"type", "box"}, {"lower", lower}, {"upper", upper}};
            } else if constexpr (std::is_same_v<T, Polytope>) {
                json rows = json::array();
                for (Eigen::Index r = 0; r < s.a.rows(); ++r) {
                    rows.push_back(vector_to_json(s.a.row(r).transpose()));
                }
                return {{"type", "polytope"},
                        {"a", rows},
                        {"b", vector_to_json(s.b)},
                        {"interior", vector_to_json(s.interior)}};
            } else {
                return {{"type", "singleton"}, {"point", vector_to_json(s.point)}};
            }
        },
        set);
}

CoarseSet coarse_set_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "box") {
        const json& lo = j.at("lower");
        const json& hi = j.at("upper");
        if (!lo.is_array() || !hi.is_array() || lo.size() != hi.size()) {
            malformed("box bounds must be arrays of equal length");
        }
        Box box{Vector(static_cast<Eigen::Index>(lo.size())),
                Vector(static_cast<Eigen::Index>(hi.size()))};
        for (std::size_t i = 0; i < lo.size(); ++i) {
            box.lower(static_cast<Eigen::Index>(i)) = bound_from_json(lo[i], -kInf);
            box.upper(static_cast<Eigen::Index>(i)) = bound_from_json(hi[i], kInf);
        }
        return box;
    }
    if (type == "polytope") {
        const json& rows = j.at("a");
        const Vector b = vector_from_json(j.at("b"));
        const Vector interior = vector_from_json(j.at("interior"));
        if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != b.size()) {
            malformed("polytope needs one row of a per entry of b");
        }
        Matrix a(b.size(), interior.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const Vector row = vector_from_json(rows[r]);
            check_dim(row, interior.size(), "polytope row");
            a.row(static_cast<Eigen::Index>(r)) = row.transpose();
        }
        return Polytope(std::move(a), b, interior);
    }
    if (type == "singleton") {
        return Singleton{vector_from_json(j.at("point"))};
    }
    malformed("unknown set type '" + type + "'");
}

json partition_to_json(const Partition& partition) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, GridPartition>) {
                return {{"type", "grid"}, {"width", p.width}, {"offset", vector_to_json(p.offset)}};
            } else {
                json cells = json::array();
                for (const auto& cell : p.cells) {
                    cells.push_back(coarse_set_to_json(cell));
                }
                const char* tag = std::is_same_v<T, BoxListPartition> ? "boxes" : "polytopes";
                return {{"type", tag}, {"cells", cells}};
            }
        },
        partition);
}

Partition partition_from_json(const json& j, Eigen::Index d) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "grid") {
        GridPartition grid{j.at("width").get<double>(), Vector::Zero(d)};
        if (!(grid.width > 0.0)) {
            malformed("grid width must be positive");
        }
        if (j.contains("offset")) {
            grid.offset = vector_from_json(j.at("offset"));
            check_dim(grid.offset, d, "grid offset");
        }
        return grid;
    }
    if (type == "boxes" || type == "polytopes") {
        const json& cells = j.at("cells");
        if (!cells.is_array() || cells.empty()) {
            malformed("partition needs a non-empty cell list");
        }
        BoxListPartition boxes;
        PolytopeListPartition polys;
        for (const json& c : cells) {
            CoarseSet set = coarse_set_from_json(c);
            if (dim(set) != d) {
                malformed("partition cell has the wrong dimension");
            }
            if (type == "boxes") {
                if (!std::holds_alternative<Box>(set)) {
                    malformed("box partition holds a non-box cell");
                }
                boxes.cells.push_back(std::get<Box>(std::move(set)));
            } else {
                if (!std::holds_alternative<Polytope>(set)) {
                    malformed("polytope partition holds a non-polytope cell");
                }
                polys.cells.push_back(std::get<Polytope>(std::move(set)));
            }
        }
        if (type == "boxes") {
            return boxes;
        }
        return polys;
    }
    malformed("unknown partition type '" + type + "'");
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
    const DatasetHeader& h = dataset.header;
    json header{{"record", "header"}, {"model", h.model},   {"d", h.d},
                {"k", h.k},           {"n", h.n},           {"seed", h.seed},
                {"config_hash", h.config_hash},             {"version", h.version}};
    out << header.dump() << '\n';
    std::visit(
        [&](const auto& list) {
            using T = typename std::decay_t<decltype(list)>::value_type;
            for (const T& obs : list) {
                json rec;
                if constexpr (std::is_same_v<T, MaxObservation>) {
                    rec = {{"x", vector_to_json(obs.x)}, {"y_max", obs.y_max}};
                } else if constexpr (std::is_same_v<T, SecondPriceObservation>) {
                    rec = {{"x", vector_to_json(obs.x)},
                           {"i_max", obs.i_max},
                           {"y_smax", obs.y_smax}};
                } else {
                    rec = {{"set", coarse_set_to_json(obs.set)}};
                }
                out << rec.dump() << '\n';
            }
        },
        dataset.observations);
    if (!out) {
        throw std::runtime_error("dataset: write failed");
    }
}

Dataset read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        malformed("empty input");
    }
    Dataset out;
    json header;
    try {
        header = json::parse(line);
        out.header.model = header.at("model").get<std::string>();
        out.header.d = header.at("d").get<Eigen::Index>();
        out.header.k = header.at("k").get<Eigen::Index>();
        out.header.n = header.at("n").get<std::size_t>();
        out.header.seed = header.at("seed").get<std::uint64_t>();
        out.header.config_hash = header.value("config_hash", "");
        out.header.version = header.value("version", "");
    } catch (const json::exception& e) {
        malformed(std::string("bad header: ") + e.what());
    }
    const Eigen::Index d = out.header.d;
    const Eigen::Index k = out.header.k;

    std::vector<MaxObservation> max_obs;
    std::vector<SecondPriceObservation> sp_obs;
    std::vector<CoarseObservation> coarse_obs;
    const std::string& model = out.header.model;
    if (model != "max" && model != "second-price" && model != "coarse") {
        malformed("unknown model '" + model + "'");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            const json rec = json::parse(line);
            if (model == "max") {
                MaxObservation obs{vector_from_json(rec.at("x")), rec.at("y_max").get<double>()};
                check_dim(obs.x, d, "x");
                max_obs.push_back(std::move(obs));
            } else if (model == "second-price") {
                SecondPriceObservation obs{vector_from_json(rec.at("x")),
                                           rec.at("i_max").get<Eigen::Index>(),
                                           rec.at("y_smax").get<double>()};
                check_dim(obs.x, d, "x");
                if (obs.i_max < 0 || obs.i_max >= k) {
                    malformed("i_max out of range");
                }
                sp_obs.push_back(std::move(obs));
            } else {
                CoarseObservation obs{coarse_set_from_json(rec.at("set"))};
                if (dim(obs.set) != d) {
                    malformed("set has the wrong dimension");
                }
                coarse_obs.push_back(std::move(obs));
            }
        } catch (const json::exception& e) {
            malformed("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            malformed("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    const std::size_t count = max_obs.size() + sp_obs.size() + coarse_obs.size();
    if (count != out.header.n) {
        malformed("header announces " + std::to_string(out.header.n) + " records, found " +
                  std::to_string(count));
    }
    if (model == "max") {
        out.observations = std::move(max_obs);
    } else if (model == "second-price") {
        out.observations = std::move(sp_obs);
    } else {
        out.observations = std::move(coarse_obs);
    }
    return out;
}

}  // namespace selfsel
