// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: run, sweep, ablate, profile, sensitivity, mask.

#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "stepvar/config.hpp"
#include "stepvar/experiment.hpp"

namespace {

constexpr const char* kOutputDirEnv = "STEPVAR_OUTPUT_DIR";

void print_summary(const stepvar::ReportBundle& bundle) {
    if (bundle.command == "run" && !bundle.runs.empty()) {
        const auto& r = bundle.runs.front();
        std::cout << "analytic speedup " << stepvar::format_number(r.analytic_speedup()) << "x, wall speedup ";
        if (r.totals.wall_ns > 0) {
            std::cout << stepvar::format_number(r.wall_speedup()) << "x";
        } else {
            std::cout << "n/a (timing disabled)";
        }
        if (r.fidelity) {
            std::cout << ", PSNR " << stepvar::format_number(r.fidelity->psnr_db) << " dB, SSIM "
                      << stepvar::format_number(r.fidelity->ssim);
        }
        std::cout << '\n';
    }
    std::cout << bundle.table.to_csv();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structure-texture guided token pruning: desk-scale next-scale pipeline harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;

    using Command = std::function<stepvar::ReportBundle(const stepvar::ExperimentConfig&)>;
    const std::map<std::string, std::pair<std::string, Command>> commands = {
        {"run", {"Dense reference plus the configured pruned run", stepvar::command_run}},
        {"sweep", {"Pruning ratio / stage grid sweep", stepvar::command_sweep}},
        {"ablate", {"Scoring strategy x recovery strategy matrix", stepvar::command_ablate}},
        {"profile", {"Dense per-scale cost breakdown", stepvar::command_profile}},
        {"sensitivity", {"Final-output fidelity under per-scale noise", stepvar::command_sensitivity}},
        {"mask", {"Export kept-token masks of every pruned scale", stepvar::command_mask}},
    };
    for (const auto& [name, entry] : commands) {
        auto* sub = app.add_subcommand(name, entry.first);
        sub->add_option("-c,--config", config_path, "JSON configuration file (defaults are used when omitted)");
        sub->add_option("-o,--output-dir", output_dir, "Output directory (overrides $STEPVAR_OUTPUT_DIR and config)");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        stepvar::ExperimentConfig config = config_path.empty() ? stepvar::parse_config(stepvar::default_config_json())
                                                               : stepvar::load_config(config_path);
        if (const char* env = std::getenv(kOutputDirEnv); env && *env) config.output_dir = env;
        if (!output_dir.empty()) config.output_dir = output_dir;

        const stepvar::ReportBundle bundle = commands.at(command).second(config);
        stepvar::write_bundle(bundle, config.output_dir);
        print_summary(bundle);
        for (const auto& run : bundle.runs) {
            if (run.error) {
                std::cerr << "error: " << *run.error << '\n';
                return 2;
            }
        }
    } catch (const stepvar::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
