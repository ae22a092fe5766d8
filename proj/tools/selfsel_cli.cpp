#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
    using namespace selfsel::cli;
    CLI::App app{"Estimation under self-selection bias: simulate, estimate, diagnose, bench"};
    app.set_version_flag("--version", SELFSEL_VERSION);
    app.require_subcommand(1);

    std::string config_path;
    Overrides overrides;
    std::uint64_t seed = 0;
    std::string preset;
    std::string out_dir;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "TOML run configuration")->required();
        sub->add_option("--seed", seed, "Seed (overrides the config)");
        sub->add_option("--out", out_dir, "Output directory (overrides the config)");
        sub->add_flag("--trace", overrides.trace, "Write per-step optimizer traces");
        sub->add_option("--preset", preset, "Schedule constants: desk or paper")
            ->check(CLI::IsMember({"desk", "paper"}));
    };
    CLI::App* simulate = app.add_subcommand("simulate", "Generate an NDJSON dataset");
    CLI::App* estimate = app.add_subcommand("estimate", "Run the estimator and write results");
    CLI::App* diagnose = app.add_subcommand("diagnose", "Run numerical diagnostics");
    CLI::App* bench = app.add_subcommand("bench", "Time the gradient oracle");
    for (CLI::App* sub : {simulate, estimate, diagnose, bench}) {
        add_common(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        if (sub->count("--seed") > 0) {
            overrides.seed = seed;
        }
        if (!preset.empty()) {
            overrides.preset = preset;
        }
        if (!out_dir.empty()) {
            overrides.out_dir = out_dir;
        }
        const RunConfig config = load_run_config(config_path, overrides);
        if (sub == simulate) {
            return cmd_simulate(config);
        }
        if (sub == estimate) {
            return cmd_estimate(config);
        }
        if (sub == diagnose) {
            return cmd_diagnose(config);
        }
        return cmd_bench(config);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
