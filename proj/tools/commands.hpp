#pragma once

#include "run_config.hpp"

namespace selfsel::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAcceptance = 3;

/// Writes dataset.ndjson and truth.json into the output directory.
int cmd_simulate(const RunConfig& config);

/// Writes result.json, plus trace.csv when step tracing is on.
int cmd_estimate(const RunConfig& config);

/// Writes report.json and prints a table; exit 3 if any report fails.
int cmd_diagnose(const RunConfig& config);

/// Times the gradient oracle and one optimizer stage; writes bench.json.
int cmd_bench(const RunConfig& config);

}  // namespace selfsel::cli
