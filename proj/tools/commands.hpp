#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "leadlag/evalkit.hpp"
#include "leadlag/panel.hpp"
#include "leadlag/phase1.hpp"
#include "leadlag/phase2.hpp"
#include "leadlag/synth.hpp"

namespace leadlag::cli {

/// Fully resolved run configuration: the config file with every default
/// filled in. The resolved form is echoed into the output bundle so each run
/// records the hyperparameters it actually used.
struct RunConfig {
    std::uint64_t seed = 42;
    int jobs = 1;
    std::string output = "out";

    struct Input {
        std::string panel_csv;
        std::string main_view;
        ValueTransform transform = ValueTransform::Raw;
        FillPolicy fill = FillPolicy::Reject;
        bool standardize = true;
        std::string window_begin; // empty = first timestamp
        std::string window_end;   // empty = last timestamp
    } input;

    Phase1Config phase1;
    Phase2Config phase2;

    struct Shaker {
        int r = 3;
        int top = 10;
        std::string source = "wtilde"; // or "what"
    } shaker;

    struct Eval {
        std::string truth_entity;
        BacktestConfig backtest;
    } eval;

    GeneratorParams synth;
};

struct Overrides {
    std::optional<std::string> output;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
};

/// Parses and validates a config file. Unknown keys, wrong types and
/// out-of-range values raise ConfigError naming the offending field.
RunConfig load_config(const std::string& path, const Overrides& overrides = {});

/// Serializes the resolved config (used for the config_resolved.json echo).
std::string dump_config(const RunConfig& cfg);

// Subcommand bodies; errors propagate as the library exception types.
void run_synth(const RunConfig& cfg);
void run_fit(const RunConfig& cfg);
void run_shakers(const RunConfig& cfg, const std::string& bundle_dir);
void run_eval(const RunConfig& cfg, const std::string& bundle_dir);
void run_backtest(const RunConfig& cfg, const std::string& bundle_dir);

/// Maps an in-flight exception to the documented process exit code:
/// 2 config error, 3 data error, 4 solver failure, 1 anything else.
int exit_code_for_current_exception();

} // namespace leadlag::cli
