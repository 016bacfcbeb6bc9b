// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "stepvar/model.hpp"
#include "stepvar/pipeline.hpp"

namespace stepvar {

/// A configuration problem; `path()` names the offending field, e.g. "prune.ratios[2]".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error("config error at " + (path.empty() ? std::string("<root>") : path) + ": " + message),
          m_path(std::move(path)) {}

    const std::string& path() const noexcept { return m_path; }

private:
    std::string m_path;
};

struct PruneConfig {
    std::vector<std::size_t> stages;  ///< 1-based scale indices
    std::vector<double> ratios;       ///< one per stage
    PruneStrategy strategy = PruneStrategy::stepvar;
    RecoveryStrategy recovery;
    PruneParams params;
};

struct TimingConfig {
    bool enabled = true;
    int warmup = 2;
    int repeats = 5;
};

struct SweepConfig {
    std::vector<double> ratios{0.0, 0.3, 0.5, 0.7, 0.9};
    std::vector<std::vector<std::size_t>> stage_sets;  ///< empty: use prune.stages
};

struct AblateConfig {
    std::vector<PruneStrategy> strategies{PruneStrategy::stepvar, PruneStrategy::hf_only, PruneStrategy::l2norm,
                                          PruneStrategy::random};
    std::vector<RecoveryKind> recoveries{RecoveryKind::nearest_neighbor, RecoveryKind::cache_upsample,
                                         RecoveryKind::anchor_copy};
    double ratio = 0.7;
    std::size_t seeds = 20;
};

struct SensitivityConfig {
    double sigma = 0.1;
    std::size_t seeds = 10;
    std::vector<std::size_t> scales;  ///< empty: every scale
};

struct ExperimentConfig {
    ToyModelConfig model;
    std::vector<ScaleShape> scales;
    std::size_t batch = 1;
    PruneConfig prune;
    CacheMode cache_mode = CacheMode::kept_only;
    std::size_t cond_len = 0;
    std::vector<std::uint64_t> input_seeds{0};
    std::uint64_t noise_seed = 0;
    TimingConfig timing;
    std::string output_dir = "stepvar_out";
    bool export_masks = false;
    SweepConfig sweep;
    AblateConfig ablate;
    SensitivityConfig sensitivity;
    nlohmann::json raw = nlohmann::json::object();

    /// Dense schedule with `prune` applied at its stages.
    ScaleSchedule schedule() const;
    /// Dense schedule with `ratio` applied at `stages` using the configured strategy.
    ScaleSchedule schedule_with(const std::vector<std::size_t>& stages, const std::vector<double>& ratios,
                                PruneStrategy strategy, RecoveryStrategy recovery) const;
};

/// Parses and validates a configuration document; unknown keys are errors.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Default desk configuration: 8 scales, last-4 pruning {0.4, 0.5, 1.0, 1.0}.
nlohmann::json default_config_json();

}  // namespace stepvar
