#include "run_config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace selfsel::cli {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& what) { throw ConfigError(what); }

void allow_keys(const toml::table& table, const std::string& where,
                std::initializer_list<const char*> keys) {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, node] : table) {
        if (!allowed.count(std::string(key.str()))) {
            fail("unknown key '" + std::string(key.str()) + "' in " + where);
        }
    }
}

const toml::table* subtable(const toml::table& table, const char* key) {
    const toml::node* node = table.get(key);
    if (!node) {
        return nullptr;
    }
    if (!node->is_table()) {
        fail(std::string("'") + key + "' must be a table");
    }
    return node->as_table();
}

double get_real(const toml::table& t, const char* key, double fallback) {
    const toml::node* node = t.get(key);
    if (!node) {
        return fallback;
    }
    if (auto v = node->value<double>()) {
        return *v;
    }
    fail(std::string("'") + key + "' must be a number");
}

std::int64_t get_int(const toml::table& t, const char* key, std::int64_t fallback) {
    const toml::node* node = t.get(key);
    if (!node) {
        return fallback;
    }
    if (!node->is_integer()) {
        fail(std::string("'") + key + "' must be an integer");
    }
    return node->as_integer()->get();
}

std::size_t get_count(const toml::table& t, const char* key, std::size_t fallback) {
    const std::int64_t v = get_int(t, key, static_cast<std::int64_t>(fallback));
    if (v < 0) {
        fail(std::string("'") + key + "' must be non-negative");
    }
    return static_cast<std::size_t>(v);
}

std::optional<std::string> get_string(const toml::table& t, const char* key) {
    const toml::node* node = t.get(key);
    if (!node) {
        return std::nullopt;
    }
    if (!node->is_string()) {
        fail(std::string("'") + key + "' must be a string");
    }
    return node->as_string()->get();
}

std::vector<double> real_list(const toml::node& node, const std::string& what) {
    const toml::array* arr = node.as_array();
    if (!arr) {
        fail("'" + what + "' must be an array of numbers");
    }
    std::vector<double> out;
    for (const toml::node& item : *arr) {
        auto v = item.value<double>();
        if (!v) {
            fail("'" + what + "' must be an array of numbers");
        }
        out.push_back(*v);
    }
    return out;
}

Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vector get_vector(const toml::table& t, const char* key) {
    return to_vector(real_list(*t.get(key), key));
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

fs::path existing_file(const fs::path& base, const std::string& p) {
    fs::path path = resolve(base, p);
    if (!fs::is_regular_file(path)) {
        fail("referenced file does not exist: " + path.string());
    }
    return path;
}

void parse_instance(const toml::table& t, InstanceConfig& inst) {
    allow_keys(t, "[instance]", {"d", "k", "c", "C", "column_norm", "w_star"});
    inst.c = get_real(t, "c", inst.c);
    inst.C = get_real(t, "C", inst.C);
    inst.column_norm = get_real(t, "column_norm", inst.column_norm);
    if (const toml::node* w = t.get("w_star")) {
        const toml::array* cols = w->as_array();
        if (!cols || cols->empty()) {
            fail("'w_star' must be a non-empty array of columns");
        }
        std::vector<Vector> columns;
        for (const toml::node& col : *cols) {
            columns.push_back(to_vector(real_list(col, "w_star")));
        }
        Matrix m(columns.front().size(), static_cast<Eigen::Index>(columns.size()));
        for (std::size_t j = 0; j < columns.size(); ++j) {
            if (columns[j].size() != m.rows()) {
                fail("'w_star' columns must all have the same length");
            }
            m.col(static_cast<Eigen::Index>(j)) = columns[j];
        }
        inst.w_star = m;
        inst.d = m.rows();
        inst.k = m.cols();
    } else {
        inst.d = get_int(t, "d", 0);
        inst.k = get_int(t, "k", 0);
    }
    if (inst.d <= 0 || inst.k <= 0) {
        fail("[instance] needs positive d and k (or an explicit w_star)");
    }
    if (!(inst.c > 0.0) || !(inst.C > 0.0) || !(inst.column_norm > 0.0)) {
        fail("[instance] c, C and column_norm must be positive");
    }
}

Partition parse_partition(const toml::table& t, Eigen::Index d) {
    const std::string type = get_string(t, "type").value_or("grid");
    if (type == "grid") {
        allow_keys(t, "[coarse.partition]", {"type", "width", "offset"});
        GridPartition grid{get_real(t, "width", 1.0), Vector::Zero(d)};
        if (!(grid.width > 0.0)) {
            fail("grid width must be positive");
        }
        if (t.get("offset")) {
            grid.offset = get_vector(t, "offset");
            if (grid.offset.size() != d) {
                fail("grid offset must have d entries");
            }
        }
        return grid;
    }
    if (type == "halflines") {
        // Two cells split at `split` along the first axis; d must be 1.
        allow_keys(t, "[coarse.partition]", {"type", "split"});
        if (d != 1) {
            fail("halflines partition requires d = 1");
        }
        const double split = get_real(t, "split", 0.0);
        BoxListPartition list;
        list.cells.push_back(Box{Vector::Constant(1, -kInf), Vector::Constant(1, split)});
        list.cells.push_back(Box{Vector::Constant(1, split), Vector::Constant(1, kInf)});
        return list;
    }
    if (type == "whole") {
        allow_keys(t, "[coarse.partition]", {"type"});
        return BoxListPartition{{whole_space(d)}};
    }
    fail("unknown partition type '" + type + "' (grid, halflines, whole)");
}

void parse_coarse(const toml::table& t, CoarseRunConfig& cc) {
    allow_keys(t, "[coarse]",
               {"d", "mu_star", "norm", "D", "R", "delta", "alpha_hint", "pilot", "burn_in",
                "partition"});
    if (t.get("mu_star")) {
        cc.mu_star = get_vector(t, "mu_star");
        cc.d = cc.mu_star->size();
    } else {
        cc.d = get_int(t, "d", 0);
    }
    if (cc.d <= 0) {
        fail("[coarse] needs a positive d (or mu_star)");
    }
    cc.norm = get_real(t, "norm", cc.norm);
    CoarseConfig& e = cc.estimator;
    e.D = get_real(t, "D", e.D);
    e.R = get_real(t, "R", e.R);
    e.delta = get_real(t, "delta", e.delta);
    e.alpha_hint = get_real(t, "alpha_hint", e.alpha_hint);
    e.pilot = get_count(t, "pilot", e.pilot);
    e.burn_in = get_count(t, "burn_in", e.burn_in);
    if (!(e.D > 0.0) || !(e.delta > 0.0 && e.delta < 1.0) || !(e.alpha_hint > 0.0)) {
        fail("[coarse] needs D > 0, 0 < delta < 1 and alpha_hint > 0");
    }
    const double truth_norm = cc.mu_star ? cc.mu_star->norm() : cc.norm;
    if (truth_norm > e.D) {
        fail("[coarse] ||mu*|| exceeds D");
    }
    if (const toml::table* p = subtable(t, "partition")) {
        cc.partition = parse_partition(*p, cc.d);
    } else {
        cc.partition = GridPartition{1.0, Vector::Zero(cc.d)};
    }
}

void parse_psgd(const toml::table& t, RunConfig& cfg) {
    allow_keys(t, "[psgd]",
               {"preset", "eps", "eps0", "eta", "G", "t_multiplier", "gamma_divisor", "t_cap",
                "trace_stride", "pilot"});
    PsgdConfig& p = cfg.psgd;
    p.eps = get_real(t, "eps", p.eps);
    p.eps0 = get_real(t, "eps0", p.eps0);
    p.eta = get_real(t, "eta", p.eta);
    p.G = get_real(t, "G", p.G);
    p.t_multiplier = get_real(t, "t_multiplier", p.t_multiplier);
    p.gamma_divisor = get_real(t, "gamma_divisor", p.gamma_divisor);
    p.t_cap = get_count(t, "t_cap", p.t_cap);
    p.trace_stride = get_count(t, "trace_stride", p.trace_stride);
    cfg.pilot = get_count(t, "pilot", cfg.pilot);
    if (!(p.eps > 0.0) || !(p.eta > 0.0) || !(p.t_multiplier > 0.0) ||
        !(p.gamma_divisor > 0.0) || p.t_cap == 0 || cfg.pilot == 0) {
        fail("[psgd] eps, eta, t_multiplier, gamma_divisor, t_cap and pilot must be positive");
    }
}

void parse_diagnose(const toml::table& t, DiagnoseConfig& dc) {
    allow_keys(t, "[diagnose]",
               {"suites", "fd_pairs", "fd_step", "stationarity_n", "hessian_n", "hessian_radius",
                "growth_n", "growth_radii"});
    if (const toml::node* s = t.get("suites")) {
        const toml::array* arr = s->as_array();
        if (!arr) {
            fail("'suites' must be an array of strings");
        }
        dc.suites.clear();
        for (const toml::node& item : *arr) {
            auto v = item.value<std::string>();
            if (!v || (*v != "gradient" && *v != "stationarity" && *v != "hessian" &&
                       *v != "growth")) {
                fail("suites may contain gradient, stationarity, hessian, growth");
            }
            dc.suites.push_back(*v);
        }
    }
    dc.fd_pairs = get_count(t, "fd_pairs", dc.fd_pairs);
    dc.fd_step = get_real(t, "fd_step", dc.fd_step);
    dc.stationarity_n = get_count(t, "stationarity_n", dc.stationarity_n);
    dc.hessian_n = get_count(t, "hessian_n", dc.hessian_n);
    dc.hessian_radius = get_real(t, "hessian_radius", dc.hessian_radius);
    dc.growth_n = get_count(t, "growth_n", dc.growth_n);
    if (t.get("growth_radii")) {
        dc.growth_radii = real_list(*t.get("growth_radii"), "growth_radii");
    }
    if (dc.stationarity_n < 2 || dc.growth_n < 2 || dc.hessian_n == 0 || !(dc.fd_step > 0.0)) {
        fail("[diagnose] sample sizes must be >= 2 and fd_step positive");
    }
}

}  // namespace

std::string to_string(ModelTag tag) {
    switch (tag) {
        case ModelTag::Max:
            return "max";
        case ModelTag::SecondPrice:
            return "second-price";
        case ModelTag::Coarse:
            return "coarse";
    }
    return "unknown";
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig load_run_config(const fs::path& path, const Overrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail("cannot open config file " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();

    toml::table root;
    try {
        root = toml::parse(text.str(), path.string());
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "TOML parse error in " << path.string() << ": " << e.description() << " (line "
            << e.source().begin.line << ")";
        fail(msg.str());
    }
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

    allow_keys(root, "the top level",
               {"model", "seed", "n", "instance", "coarse", "warm_start", "psgd", "boost", "data",
                "acceptance", "diagnose", "output"});
    RunConfig cfg;
    const std::string model = get_string(root, "model").value_or("");
    if (model == "max") {
        cfg.model = ModelTag::Max;
    } else if (model == "second-price") {
        cfg.model = ModelTag::SecondPrice;
    } else if (model == "coarse") {
        cfg.model = ModelTag::Coarse;
    } else {
        fail("'model' must be one of max, second-price, coarse");
    }

    if (overrides.seed) {
        cfg.seed = *overrides.seed;
    } else if (const toml::node* s = root.get("seed"); s && s->is_integer() &&
                                                      s->as_integer()->get() >= 0) {
        cfg.seed = static_cast<std::uint64_t>(s->as_integer()->get());
    } else {
        fail("a non-negative integer 'seed' is required (or pass --seed)");
    }
    cfg.n = get_count(root, "n", 0);

    if (cfg.model == ModelTag::Coarse) {
        const toml::table* c = subtable(root, "coarse");
        if (!c) {
            fail("model 'coarse' needs a [coarse] table");
        }
        parse_coarse(*c, cfg.coarse);
    } else {
        const toml::table* inst = subtable(root, "instance");
        if (!inst) {
            fail("model '" + model + "' needs an [instance] table");
        }
        parse_instance(*inst, cfg.instance);
        if (cfg.model == ModelTag::SecondPrice && cfg.instance.k < 2) {
            fail("second-price model needs k >= 2");
        }
    }

    if (const toml::table* w = subtable(root, "warm_start")) {
        allow_keys(*w, "[warm_start]", {"radius", "file", "radius_factor"});
        cfg.warm_radius = get_real(*w, "radius", cfg.warm_radius);
        cfg.radius_factor = get_real(*w, "radius_factor", cfg.radius_factor);
        if (auto f = get_string(*w, "file")) {
            cfg.warm_file = existing_file(base, *f);
        }
        if (!(cfg.warm_radius > 0.0) || !(cfg.radius_factor > 0.0)) {
            fail("[warm_start] radius and radius_factor must be positive");
        }
    }

    const toml::table* psgd = subtable(root, "psgd");
    cfg.preset = overrides.preset.value_or(
        psgd ? get_string(*psgd, "preset").value_or("desk") : std::string("desk"));
    if (cfg.preset == "desk") {
        cfg.psgd = PsgdConfig::desk();
    } else if (cfg.preset == "paper") {
        cfg.psgd = PsgdConfig::paper();
    } else {
        fail("preset must be desk or paper");
    }
    cfg.psgd.eps0 = 0.0;
    cfg.psgd.G = 0.0;
    if (psgd) {
        parse_psgd(*psgd, cfg);
    }
    if (overrides.trace && cfg.psgd.trace_stride == 0) {
        cfg.psgd.trace_stride = 1000;
    }
    if (!overrides.trace) {
        cfg.psgd.trace_stride = 0;
    }
    cfg.coarse.estimator.psgd = cfg.psgd;
    cfg.coarse.estimator.pilot = cfg.pilot;

    if (const toml::table* b = subtable(root, "boost")) {
        allow_keys(*b, "[boost]", {"reps", "radius"});
        cfg.boost_reps = get_count(*b, "reps", cfg.boost_reps);
        cfg.boost_radius = get_real(*b, "radius", cfg.boost_radius);
        if (cfg.boost_reps == 0 || !(cfg.boost_radius > 0.0)) {
            fail("[boost] reps and radius must be positive");
        }
    }
    if (const toml::table* d = subtable(root, "data")) {
        allow_keys(*d, "[data]", {"file"});
        if (auto f = get_string(*d, "file")) {
            cfg.data_file = existing_file(base, *f);
        }
    }
    if (!cfg.data_file && cfg.n == 0) {
        fail("'n' must be positive unless [data] file is given");
    }
    if (const toml::table* a = subtable(root, "acceptance")) {
        allow_keys(*a, "[acceptance]", {"max_error"});
        if (a->get("max_error")) {
            cfg.max_error = get_real(*a, "max_error", 0.0);
        }
    }
    if (const toml::table* d = subtable(root, "diagnose")) {
        parse_diagnose(*d, cfg.diagnose);
    }
    if (const toml::table* o = subtable(root, "output")) {
        allow_keys(*o, "[output]", {"dir"});
        if (auto dir = get_string(*o, "dir")) {
            cfg.out_dir = resolve(base, *dir);
        }
    } else {
        cfg.out_dir = base / "out";
    }
    if (overrides.out_dir) {
        cfg.out_dir = *overrides.out_dir;
    }

    std::ostringstream keyed;
    keyed << text.str() << "\n#seed=" << cfg.seed << "\n#preset=" << cfg.preset
          << "\n#trace=" << overrides.trace;
    cfg.hash = fnv1a_hex(keyed.str());
    return cfg;
}

}  // namespace selfsel::cli
