#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string output;
    std::string bundle;
    std::uint64_t seed = 0;
    int jobs = 0;
    bool seed_set = false;
    bool jobs_set = false;
    bool output_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_bundle) {
    cmd->add_option("--config", flags.config_path, "JSON run configuration")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--output", flags.output, "Output directory (overrides config)")
        ->each([&](const std::string&) { flags.output_set = true; });
    cmd->add_option("--seed", flags.seed, "Top-level RNG seed (overrides config)")
        ->each([&](const std::string&) { flags.seed_set = true; });
    cmd->add_option("--jobs", flags.jobs, "Worker cap for per-view solves (overrides config)")
        ->each([&](const std::string&) { flags.jobs_set = true; });
    if (needs_bundle) {
        cmd->add_option("--bundle", flags.bundle,
                        "Fitted bundle directory (defaults to the config output)");
    }
}

leadlag::cli::RunConfig load(const CommonFlags& flags) {
    leadlag::cli::Overrides overrides;
    if (flags.output_set) {
        overrides.output = flags.output;
    }
    if (flags.seed_set) {
        overrides.seed = flags.seed;
    }
    if (flags.jobs_set) {
        overrides.jobs = flags.jobs;
    }
    return leadlag::cli::load_config(flags.config_path, overrides);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lead-lag influence network estimation, shaker ranking and evaluation"};
    app.require_subcommand(1);

    CommonFlags synth_flags, fit_flags, shakers_flags, eval_flags, backtest_flags;

    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic panel with planted truth");
    add_common(synth, synth_flags, false);

    CLI::App* fit = app.add_subcommand("fit", "Run both solver stages and write the bundle");
    add_common(fit, fit_flags, false);

    CLI::App* shakers = app.add_subcommand("shakers", "Rank shakers from a fitted bundle");
    add_common(shakers, shakers_flags, true);

    CLI::App* eval = app.add_subcommand("eval", "Trend monitor, sMAPE and backtest reports");
    add_common(eval, eval_flags, true);

    CLI::App* backtest = app.add_subcommand("backtest", "Screening/timing backtest only");
    add_common(backtest, backtest_flags, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            leadlag::cli::run_synth(load(synth_flags));
        } else if (fit->parsed()) {
            leadlag::cli::run_fit(load(fit_flags));
        } else if (shakers->parsed()) {
            leadlag::cli::run_shakers(load(shakers_flags), shakers_flags.bundle);
        } else if (eval->parsed()) {
            leadlag::cli::run_eval(load(eval_flags), eval_flags.bundle);
        } else if (backtest->parsed()) {
            leadlag::cli::run_backtest(load(backtest_flags), backtest_flags.bundle);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return leadlag::cli::exit_code_for_current_exception();
    }
    return 0;
}
