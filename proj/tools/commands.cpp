#include "commands.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "selfsel/coarse.hpp"
#include "selfsel/dataset.hpp"
#include "selfsel/diagnostics.hpp"
#include "selfsel/likelihood.hpp"
#include "selfsel/recovery.hpp"

namespace selfsel::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum Stream : std::uint64_t { kTruth = 1, kData = 2, kWarm = 3, kEstimate = 4, kDiagnose = 5 };

struct Truth {
    InstanceSpec spec;
    Vector mu_star;
};

std::string describe(const AssumptionViolation& v) {
    std::ostringstream out;
    out << v.message;
    if (v.index >= 0) {
        out << " (column " << v.index << ", margin " << v.margin << ")";
    }
    return out.str();
}

Truth make_truth(const RunConfig& cfg) {
    Rng rng = Rng(cfg.seed).split(kTruth);
    Truth t;
    if (cfg.model == ModelTag::Coarse) {
        if (cfg.coarse.mu_star) {
            t.mu_star = *cfg.coarse.mu_star;
        } else {
            Vector v(cfg.coarse.d);
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                v(i) = rng.normal();
            }
            t.mu_star = cfg.coarse.norm * v / v.norm();
        }
        return t;
    }
    const InstanceConfig& ic = cfg.instance;
    if (ic.w_star) {
        t.spec = InstanceSpec{*ic.w_star, ic.c, ic.C};
    } else {
        try {
            t.spec = random_instance(ic.d, ic.k, ic.c, ic.C, ic.column_norm, rng);
        } catch (const std::runtime_error& e) {
            throw ConfigError(std::string("cannot draw a valid instance: ") + e.what());
        }
    }
    const auto violations = validate_assumptions(t.spec);
    if (!violations.empty()) {
        std::ostringstream msg;
        msg << "instance violates the model assumptions:";
        for (const AssumptionViolation& v : violations) {
            msg << "\n  - " << describe(v);
        }
        throw ConfigError(msg.str());
    }
    return t;
}

json provenance(const RunConfig& cfg) {
    return {{"version", SELFSEL_VERSION},
            {"config_hash", cfg.hash},
            {"seed", cfg.seed},
            {"model", to_string(cfg.model)},
            {"preset", cfg.preset}};
}

ObservationList generate(const RunConfig& cfg, const Truth& truth) {
    Rng rng = Rng(cfg.seed).split(kData);
    switch (cfg.model) {
        case ModelTag::Max:
            return gen_max_observations(truth.spec, cfg.n, rng);
        case ModelTag::SecondPrice:
            return gen_second_price_observations(truth.spec, cfg.n, rng);
        case ModelTag::Coarse:
            return gen_coarse_observations(truth.mu_star, cfg.coarse.partition, cfg.n, rng);
    }
    throw std::logic_error("unreachable");
}

ObservationList load_or_generate(const RunConfig& cfg, const Truth& truth) {
    if (!cfg.data_file) {
        return generate(cfg, truth);
    }
    std::ifstream in(*cfg.data_file);
    Dataset ds;
    try {
        ds = read_dataset(in);
    } catch (const std::runtime_error& e) {
        throw ConfigError(cfg.data_file->string() + ": " + e.what());
    }
    if (ds.header.model != to_string(cfg.model)) {
        throw ConfigError("dataset model '" + ds.header.model + "' does not match config");
    }
    const Eigen::Index d = cfg.model == ModelTag::Coarse ? truth.mu_star.size() : truth.spec.d();
    if (ds.header.d != d ||
        (cfg.model != ModelTag::Coarse && ds.header.k != truth.spec.k())) {
        throw ConfigError("dataset dimensions do not match config");
    }
    return std::move(ds.observations);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

json schedule_json(const Schedule& s) {
    return {{"tau", s.tau}, {"d0", s.d0}, {"gamma0", s.gamma0}, {"iterations", s.iterations}};
}

json psgd_json(const PsgdConfig& p) {
    return {{"eps0", p.eps0},
            {"eps", p.eps},
            {"eta", p.eta},
            {"G", p.G},
            {"t_multiplier", p.t_multiplier},
            {"gamma_divisor", p.gamma_divisor},
            {"t_cap", p.t_cap}};
}

json stages_json(const StageTrace& trace) {
    json rows = json::array();
    for (const StageRecord& r : trace.stages) {
        rows.push_back({{"stage", r.stage},
                        {"gamma", r.gamma},
                        {"radius", r.radius},
                        {"iterations", r.iterations},
                        {"moved", r.moved}});
    }
    return rows;
}

void write_trace_rows(std::ostream& out, const std::string& run, const StageTrace& trace) {
    for (const StepRecord& s : trace.steps) {
        out << run << ',' << s.stage << ',' << s.step << ',' << s.gamma << ',' << s.slack << ','
            << s.gradient_norm << '\n';
    }
}

Matrix load_warm_file(const fs::path& path, const InstanceSpec& spec) {
    std::ifstream in(path);
    json j;
    try {
        j = json::parse(in);
        const Matrix w0 = matrix_from_json(j.is_object() ? j.at("w0") : j);
        if (w0.rows() != spec.d() || w0.cols() != spec.k()) {
            throw ConfigError("warm-start file has the wrong shape");
        }
        return w0;
    } catch (const json::exception& e) {
        throw ConfigError("bad warm-start file " + path.string() + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw ConfigError("bad warm-start file " + path.string() + ": " + e.what());
    }
}

RecoveryConfig recovery_config(const RunConfig& cfg, const InstanceSpec& spec) {
    RecoveryConfig rc;
    rc.psgd = cfg.psgd;
    rc.warm_radius = cfg.warm_radius;
    rc.radius_factor = cfg.radius_factor;
    rc.column_cap = spec.C;
    rc.reps = cfg.boost_reps;
    rc.boost_radius = cfg.boost_radius;
    rc.pilot = cfg.pilot;
    return rc;
}

int estimate_regressors(const RunConfig& cfg, const Truth& truth, const ObservationList& data) {
    const InstanceSpec& spec = truth.spec;
    Rng warm_rng = Rng(cfg.seed).split(kWarm);
    const Matrix w0 = cfg.warm_file ? load_warm_file(*cfg.warm_file, spec)
                                    : oracle_warm_start(spec.w_star, cfg.warm_radius, warm_rng);
    const RecoveryConfig rc = recovery_config(cfg, spec);
    Rng rng = Rng(cfg.seed).split(kEstimate);
    RecoveryResult result;
    try {
        if (cfg.model == ModelTag::Max) {
            result = recover_regressors(std::get<std::vector<MaxObservation>>(data), w0, rc, rng);
        } else {
            result = recover_regressors(std::get<std::vector<SecondPriceObservation>>(data), w0,
                                        rc, rng);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    const Matching match = permutation_distance(result.estimate, spec.w_star);
    json candidates = json::array();
    for (const Matrix& c : result.candidates) {
        candidates.push_back(permutation_distance(c, spec.w_star).distance);
    }
    const std::size_t chosen = result.choice ? result.choice->index : 0;
    json out = provenance(cfg);
    out["d"] = spec.d();
    out["k"] = spec.k();
    out["n"] = std::visit([](const auto& v) { return v.size(); }, data);
    out["estimate"] = matrix_to_json(result.estimate);
    out["w_star"] = matrix_to_json(spec.w_star);
    out["warm_start"] = matrix_to_json(w0);
    out["error"] = match.distance;
    out["warm_error"] = permutation_distance(w0, spec.w_star).distance;
    out["permutation"] = match.permutation;
    out["psgd"] = psgd_json(result.resolved);
    out["schedule"] = schedule_json(result.traces.front().plan);
    out["boost"] = {{"reps", rc.reps},
                    {"radius", rc.boost_radius},
                    {"succeeded", result.choice.has_value()},
                    {"index", chosen},
                    {"support", result.choice ? result.choice->support : 0},
                    {"candidate_errors", candidates}};
    out["stages"] = stages_json(result.traces[chosen]);
    std::size_t warnings = 0;
    for (const StageTrace& t : result.traces) {
        warnings += t.projection_warnings;
    }
    out["projection_warnings"] = warnings;

    ensure_dir(cfg.out_dir);
    bool accepted = result.choice.has_value();
    if (cfg.max_error) {
        out["max_error"] = *cfg.max_error;
        accepted = accepted && match.distance <= *cfg.max_error;
    }
    out["accepted"] = accepted;
    write_json(cfg.out_dir / "result.json", out);
    if (cfg.psgd.trace_stride > 0) {
        std::ofstream trace(cfg.out_dir / "trace.csv");
        trace << "# version=" << SELFSEL_VERSION << " config_hash=" << cfg.hash
              << " seed=" << cfg.seed << '\n';
        trace << "run,stage,step,gamma,slack,gradient_norm\n";
        trace << std::setprecision(17);
        for (std::size_t r = 0; r < result.traces.size(); ++r) {
            write_trace_rows(trace, std::to_string(r), result.traces[r]);
        }
    }
    std::cout << "permutation-matched error " << match.distance << " (warm start "
              << out["warm_error"].get<double>() << "), boost "
              << (result.choice ? "ok" : "FAILED") << '\n';
    return accepted ? kExitOk : kExitAcceptance;
}

int estimate_coarse(const RunConfig& cfg, const Truth& truth, const ObservationList& data) {
    const auto& obs = std::get<std::vector<CoarseObservation>>(data);
    Rng rng = Rng(cfg.seed).split(kEstimate);
    CoarseEstimate est;
    try {
        est = estimate_coarse_mean(obs, truth.mu_star.size(), cfg.coarse.estimator, rng);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const double error = (est.mu_hat - truth.mu_star).norm();
    json out = provenance(cfg);
    out["d"] = truth.mu_star.size();
    out["n"] = obs.size();
    out["mu_hat"] = vector_to_json(est.mu_hat);
    out["mu_star"] = vector_to_json(truth.mu_star);
    out["warm_point"] = vector_to_json(est.warm_point);
    out["error"] = error;
    out["partition"] = partition_to_json(cfg.coarse.partition);
    out["localization_radius"] = est.radius;
    out["singleton_fraction"] = est.singleton_fraction;
    out["identifiable"] = !est.non_identifiable;
    out["curvature"] = vector_to_json(est.probe.curvature);
    out["curvature_se"] = vector_to_json(est.probe.standard_error);
    out["stage_a"] = {{"psgd", psgd_json(est.config_a)},
                      {"schedule", schedule_json(est.stage_a.plan)},
                      {"stages", stages_json(est.stage_a)}};
    out["stage_b"] = {{"psgd", psgd_json(est.config_b)},
                      {"schedule", schedule_json(est.stage_b.plan)},
                      {"stages", stages_json(est.stage_b)}};
    bool accepted = !est.non_identifiable;
    if (cfg.max_error) {
        out["max_error"] = *cfg.max_error;
        accepted = accepted && error <= *cfg.max_error;
    }
    out["accepted"] = accepted;
    ensure_dir(cfg.out_dir);
    write_json(cfg.out_dir / "result.json", out);
    if (cfg.psgd.trace_stride > 0) {
        std::ofstream trace(cfg.out_dir / "trace.csv");
        trace << "# version=" << SELFSEL_VERSION << " config_hash=" << cfg.hash
              << " seed=" << cfg.seed << '\n';
        trace << "run,stage,step,gamma,slack,gradient_norm\n";
        trace << std::setprecision(17);
        write_trace_rows(trace, "A", est.stage_a);
        write_trace_rows(trace, "B", est.stage_b);
    }
    std::cout << "mean error " << error
              << (est.non_identifiable ? " (partition flagged non-identifiable)" : "") << '\n';
    return accepted ? kExitOk : kExitAcceptance;
}

DiagnosticReport gradient_suite(const RunConfig& cfg, const Truth& truth, Rng& rng) {
    const InstanceSpec& spec = truth.spec;
    const DiagnoseConfig& dc = cfg.diagnose;
    double worst = 0.0;
    for (std::size_t i = 0; i < dc.fd_pairs; ++i) {
        Matrix w = spec.w_star;
        for (Eigen::Index j = 0; j < w.size(); ++j) {
            w(j) += 0.3 * rng.normal();
        }
        DiagnosticReport r;
        if (cfg.model == ModelTag::Max) {
            const MaxObservation obs = gen_max_observations(spec, 1, rng).front();
            r = fd_gradient_check([&](const Matrix& m) { return max_nll(m, obs); },
                                  [&](const Matrix& m) { return exact_gradient_max(m, obs); }, w,
                                  dc.fd_step);
        } else {
            const SecondPriceObservation obs = gen_second_price_observations(spec, 1, rng).front();
            r = fd_gradient_check(
                [&](const Matrix& m) { return second_price_nll(m, obs); },
                [&](const Matrix& m) { return exact_gradient_second_price(m, obs); }, w,
                dc.fd_step);
        }
        worst = std::max(worst, r.statistic);
    }
    return make_report("fd_gradient_" + to_string(cfg.model), worst, 1e-4, 0.0,
                       {{"pairs", dc.fd_pairs}}, cfg.seed);
}

std::vector<DiagnosticReport> regressor_diagnostics(const RunConfig& cfg, const Truth& truth) {
    const DiagnoseConfig& dc = cfg.diagnose;
    const SelectionModel model =
        cfg.model == ModelTag::Max ? SelectionModel::Max : SelectionModel::SecondPrice;
    std::vector<DiagnosticReport> reports;
    Rng root = Rng(cfg.seed).split(kDiagnose);
    std::uint64_t stream = 0;
    for (const std::string& suite : dc.suites) {
        Rng rng = root.split(++stream);
        if (suite == "gradient") {
            reports.push_back(gradient_suite(cfg, truth, rng));
        } else if (suite == "stationarity") {
            DiagnosticReport r = stationarity_test(model, truth.spec, dc.stationarity_n, rng);
            r.seed = cfg.seed;
            reports.push_back(r);
        } else if (suite == "hessian") {
            if (truth.spec.d() * truth.spec.k() > 64) {
                throw ConfigError("hessian suite needs d*k <= 64");
            }
            const double at_truth =
                hessian_min_eig_estimate(model, truth.spec, truth.spec.w_star, dc.hessian_n, 0,
                                         rng);
            Matrix v(truth.spec.d(), truth.spec.k());
            for (Eigen::Index j = 0; j < v.size(); ++j) {
                v(j) = rng.normal();
            }
            const Matrix near = truth.spec.w_star + dc.hessian_radius * v / v.norm();
            const double at_near =
                hessian_min_eig_estimate(model, truth.spec, near, dc.hessian_n, 0, rng);
            reports.push_back(make_report("hessian_min_eig_at_truth", -at_truth, 0.02, 0.0,
                                          {{"observations", dc.hessian_n}}, cfg.seed));
            reports.push_back(make_report("hessian_min_eig_near_truth", -at_near, 0.02, 0.0,
                                          {{"observations", dc.hessian_n}}, cfg.seed));
        } else if (suite == "growth") {
            const auto table = growth_probe(model, truth.spec, dc.growth_radii, dc.growth_n, rng);
            for (DiagnosticReport& r : growth_reports(table, dc.growth_n, cfg.seed)) {
                reports.push_back(std::move(r));
            }
        }
    }
    return reports;
}

std::vector<DiagnosticReport> coarse_diagnostics(const RunConfig& cfg, const Truth& truth) {
    const Vector& mu = truth.mu_star;
    Rng rng = Rng(cfg.seed).split(kDiagnose);
    const std::size_t n = cfg.diagnose.stationarity_n;
    const auto obs = gen_coarse_observations(mu, cfg.coarse.partition, n, rng);
    const double radius = localization_radius(cfg.coarse.estimator, n, mu.size());
    Vector mean = Vector::Zero(mu.size());
    Vector m2 = Vector::Zero(mu.size());
    for (std::size_t i = 0; i < n; ++i) {
        const Vector g = coarse_gradient(mu, obs[i], radius, rng, cfg.coarse.estimator.burn_in);
        const Vector delta = g - mean;
        mean += delta / static_cast<double>(i + 1);
        m2.array() += delta.array() * (g - mean).array();
    }
    const Vector se = (m2.array() / static_cast<double>(n - 1) / static_cast<double>(n)).sqrt();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        worst = std::max(worst, se(i) > 0.0 ? std::abs(mean(i)) / se(i) : 0.0);
    }
    const IdentifiabilityProbe probe = identifiability_probe(
        obs, mu, radius, cfg.coarse.estimator.pilot, rng, cfg.coarse.estimator.burn_in);
    double weakest = kInf;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        weakest = std::min(weakest, probe.standard_error(i) > 0.0
                                        ? probe.curvature(i) / probe.standard_error(i)
                                        : 0.0);
    }
    return {make_report("coarse_stationarity", worst, 4.0, se.maxCoeff(), {{"observations", n}},
                        cfg.seed),
            make_report("coarse_curvature", -weakest, -4.0, probe.standard_error.maxCoeff(),
                        {{"draws", cfg.coarse.estimator.pilot}}, cfg.seed)};
}

}  // namespace

int cmd_simulate(const RunConfig& cfg) {
    const Truth truth = make_truth(cfg);
    if (cfg.data_file) {
        throw ConfigError("simulate generates data; remove [data] file");
    }
    Dataset ds;
    ds.header.model = to_string(cfg.model);
    ds.header.d = cfg.model == ModelTag::Coarse ? truth.mu_star.size() : truth.spec.d();
    ds.header.k = cfg.model == ModelTag::Coarse ? 0 : truth.spec.k();
    ds.header.n = cfg.n;
    ds.header.seed = cfg.seed;
    ds.header.config_hash = cfg.hash;
    ds.header.version = SELFSEL_VERSION;
    ds.observations = generate(cfg, truth);

    ensure_dir(cfg.out_dir);
    std::ofstream out(cfg.out_dir / "dataset.ndjson");
    write_dataset(out, ds);
    json t = provenance(cfg);
    if (cfg.model == ModelTag::Coarse) {
        t["mu_star"] = vector_to_json(truth.mu_star);
        t["partition"] = partition_to_json(cfg.coarse.partition);
    } else {
        t["w_star"] = matrix_to_json(truth.spec.w_star);
        t["c"] = truth.spec.c;
        t["C"] = truth.spec.C;
    }
    write_json(cfg.out_dir / "truth.json", t);
    std::cout << "wrote " << cfg.n << " records to " << (cfg.out_dir / "dataset.ndjson").string()
              << '\n';
    return kExitOk;
}

int cmd_estimate(const RunConfig& cfg) {
    const Truth truth = make_truth(cfg);
    const ObservationList data = load_or_generate(cfg, truth);
    if (cfg.model == ModelTag::Coarse) {
        return estimate_coarse(cfg, truth, data);
    }
    return estimate_regressors(cfg, truth, data);
}

int cmd_diagnose(const RunConfig& cfg) {
    const Truth truth = make_truth(cfg);
    const std::vector<DiagnosticReport> reports = cfg.model == ModelTag::Coarse
                                                      ? coarse_diagnostics(cfg, truth)
                                                      : regressor_diagnostics(cfg, truth);
    json out = provenance(cfg);
    out["reports"] = json::array();
    bool all_pass = true;
    for (const DiagnosticReport& r : reports) {
        out["reports"].push_back(to_json(r));
        all_pass = all_pass && r.pass;
    }
    out["pass"] = all_pass;
    ensure_dir(cfg.out_dir);
    write_json(cfg.out_dir / "report.json", out);
    std::cout << format_table(reports);
    return all_pass ? kExitOk : kExitAcceptance;
}

int cmd_bench(const RunConfig& cfg) {
    using clock = std::chrono::steady_clock;
    const Truth truth = make_truth(cfg);
    const ObservationList data = load_or_generate(cfg, truth);
    Rng rng = Rng(cfg.seed).split(kEstimate);
    constexpr std::size_t kCalls = 100000;
    json out = provenance(cfg);
    const auto start = clock::now();
    double sink = 0.0;
    if (cfg.model == ModelTag::Coarse) {
        const auto& obs = std::get<std::vector<CoarseObservation>>(data);
        const double radius = localization_radius(cfg.coarse.estimator, obs.size(),
                                                  truth.mu_star.size());
        for (std::size_t i = 0; i < kCalls; ++i) {
            sink += coarse_gradient(truth.mu_star, obs[i % obs.size()], radius, rng)(0);
        }
    } else {
        GradientWorkspace ws(truth.spec.k());
        Matrix g;
        for (std::size_t i = 0; i < kCalls; ++i) {
            if (cfg.model == ModelTag::Max) {
                const auto& obs = std::get<std::vector<MaxObservation>>(data);
                stochastic_gradient_max_into(truth.spec.w_star, obs[i % obs.size()], rng, ws, g);
            } else {
                const auto& obs = std::get<std::vector<SecondPriceObservation>>(data);
                stochastic_gradient_second_price_into(truth.spec.w_star, obs[i % obs.size()], rng,
                                                      ws, g);
            }
            sink += g(0, 0);
        }
    }
    const double seconds = std::chrono::duration<double>(clock::now() - start).count();
    out["gradient_calls"] = kCalls;
    out["seconds"] = seconds;
    out["calls_per_second"] = static_cast<double>(kCalls) / seconds;
    out["checksum"] = sink;
    ensure_dir(cfg.out_dir);
    write_json(cfg.out_dir / "bench.json", out);
    std::cout << static_cast<double>(kCalls) / seconds << " gradient evaluations per second\n";
    return kExitOk;
}

}  // namespace selfsel::cli
