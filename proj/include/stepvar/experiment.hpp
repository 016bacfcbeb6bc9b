// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "stepvar/config.hpp"
#include "stepvar/pipeline.hpp"
#include "stepvar/report.hpp"

namespace stepvar {

/**
 * Runs `schedule` warmup + repeats times and stores, per scale, the median
 * wall time across the timed repetitions. With timing disabled the schedule
 * runs once and every wall time is zero, which keeps emitted files
 * byte-reproducible.
 */
PipelineResult timed_run(const ToyModel& model, const ScaleSchedule& schedule, const PipelineOptions& options,
                         const TimingConfig& timing);

/// Dense reference plus the configured pruned run; fidelity is averaged over the input seeds.
RunReport run_experiment(const ExperimentConfig& config);

ReportBundle command_run(const ExperimentConfig& config);
/// Uniform ratio per stage set: one row per (stage set, ratio).
ReportBundle command_sweep(const ExperimentConfig& config);
/// Strategy × recovery matrix at the ablation ratio, mean fidelity over seeds.
ReportBundle command_ablate(const ExperimentConfig& config);
/// Dense per-scale cost breakdown.
ReportBundle command_profile(const ExperimentConfig& config);
/// Final-output fidelity when noise is injected at each scale in turn.
ReportBundle command_sensitivity(const ExperimentConfig& config);
/// Writes kept-token masks of every pruned scale under `config.output_dir`/masks.
ReportBundle command_mask(const ExperimentConfig& config);

/// Writes report.json and report.csv into `dir`, creating it if needed.
void write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir);

/// Mean final-output PSNR / SSIM of `schedule` against the dense run over input seeds 0..seeds-1.
/// The prune rng seed follows the input seed.
Fidelity mean_fidelity(const ToyModel& model, const ScaleSchedule& schedule, std::size_t seeds,
                       CacheMode cache_mode = CacheMode::kept_only);

}  // namespace stepvar
