// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stepvar/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "stepvar/error.hpp"
#include "stepvar/mask_io.hpp"
#include "stepvar/metrics.hpp"

namespace stepvar {

namespace {

std::int64_t median(std::vector<std::int64_t> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

ScaleSchedule with_rng_seed(ScaleSchedule s, std::uint64_t seed) {
    for (auto& p : s.prune) p.params.rng_seed = seed;
    return s;
}

PipelineOptions options_for(const ExperimentConfig& cfg, std::uint64_t input_seed) {
    PipelineOptions o;
    o.batch = cfg.batch;
    o.input_seed = input_seed;
    o.cache_mode = cfg.cache_mode;
    o.cond_len = cfg.cond_len;
    return o;
}

std::string join(const std::vector<std::size_t>& v) {
    std::ostringstream out;
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "-" : "") << v[i];
    return out.str();
}

/// Dense final outputs, computed once per input seed.
class DenseCache {
public:
    DenseCache(const ToyModel& model, ScaleSchedule dense, std::size_t batch)
        : m_model(model), m_schedule(std::move(dense)), m_batch(batch) {}

    const FeatureGrid& final_output(std::uint64_t seed) {
        auto it = std::find_if(m_entries.begin(), m_entries.end(), [&](const auto& e) { return e.first == seed; });
        if (it != m_entries.end()) return it->second;
        m_entries.emplace_back(seed, run_dense(m_model, m_schedule, seed, m_batch).back());
        return m_entries.back().second;
    }

private:
    const ToyModel& m_model;
    ScaleSchedule m_schedule;
    std::size_t m_batch;
    std::vector<std::pair<std::uint64_t, FeatureGrid>> m_entries;
};

Fidelity fidelity_over(DenseCache& dense, const ToyModel& model, const ScaleSchedule& schedule,
                       const std::vector<std::uint64_t>& seeds, std::size_t batch, CacheMode cache_mode) {
    Fidelity f;
    for (const std::uint64_t seed : seeds) {
        PipelineOptions o;
        o.batch = batch;
        o.input_seed = seed;
        o.cache_mode = cache_mode;
        const PipelineResult pruned = run_pruned(model, with_rng_seed(schedule, seed), o);
        const FeatureGrid& ref = dense.final_output(seed);
        f.psnr_db += psnr(ref, pruned.final_output());
        f.ssim += ssim(ref, pruned.final_output());
    }
    f.psnr_db /= static_cast<double>(seeds.size());
    f.ssim /= static_cast<double>(seeds.size());
    return f;
}

std::vector<std::uint64_t> seed_range(std::size_t n) {
    std::vector<std::uint64_t> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = i;
    return s;
}

RunReport measure(const ExperimentConfig& cfg, const ToyModel& model, const ScaleSchedule& schedule,
                  DenseCache& dense, std::string label) {
    RunReport report;
    report.label = std::move(label);
    report.config = cfg.raw;
    report.seeds = {cfg.model.weight_seed, cfg.input_seeds, cfg.prune.params.rng_seed};

    const ScaleSchedule dense_schedule = schedule.dense();
    const PipelineOptions opts = options_for(cfg, cfg.input_seeds.front());
    const PipelineResult dense_run = timed_run(model, dense_schedule, opts, cfg.timing);
    for (const auto& rec : dense_run.records) {
        report.dense_flops += rec.flops;
        report.dense_wall_ns += rec.wall_ns;
    }

    try {
        const PipelineResult pruned = timed_run(model, schedule, opts, cfg.timing);
        for (const auto& rec : pruned.records) {
            report.scales.push_back({rec.scale, rec.shape.height, rec.shape.width, rec.kept, rec.skipped,
                                     rec.wall_ns, rec.flops});
        }
        report.finalize_totals();
        Fidelity f;
        for (const std::uint64_t seed : cfg.input_seeds) {
            const FeatureGrid& ref = dense.final_output(seed);
            const PipelineResult run =
                seed == cfg.input_seeds.front() ? pruned : run_pruned(model, schedule, options_for(cfg, seed));
            f.psnr_db += psnr(ref, run.final_output());
            f.ssim += ssim(ref, run.final_output());
        }
        f.psnr_db /= static_cast<double>(cfg.input_seeds.size());
        f.ssim /= static_cast<double>(cfg.input_seeds.size());
        report.fidelity = f;
    } catch (const std::exception& e) {
        report.finalize_totals();
        report.error = e.what();
    }
    return report;
}

}  // namespace

PipelineResult timed_run(const ToyModel& model, const ScaleSchedule& schedule, const PipelineOptions& options,
                         const TimingConfig& timing) {
    if (!timing.enabled) {
        PipelineResult r = run_pruned(model, schedule, options);
        for (auto& rec : r.records) rec.wall_ns = 0;
        return r;
    }
    for (int i = 0; i < timing.warmup; ++i) run_pruned(model, schedule, options);
    PipelineResult last;
    std::vector<std::vector<std::int64_t>> samples(schedule.size());
    for (int i = 0; i < timing.repeats; ++i) {
        last = run_pruned(model, schedule, options);
        for (std::size_t s = 0; s < last.records.size(); ++s) samples[s].push_back(last.records[s].wall_ns);
    }
    for (std::size_t s = 0; s < last.records.size(); ++s) last.records[s].wall_ns = median(samples[s]);
    return last;
}

RunReport run_experiment(const ExperimentConfig& config) {
    const ToyModel model(config.model);
    DenseCache dense(model, config.schedule().dense(), config.batch);
    return measure(config, model, config.schedule(), dense, "run");
}

ReportBundle command_run(const ExperimentConfig& config) {
    ReportBundle bundle;
    bundle.command = "run";
    bundle.runs.push_back(run_experiment(config));
    const RunReport& r = bundle.runs.front();
    const FlopReport dense_flops = flop_count(config.schedule().dense(), config.model, config.cache_mode, config.cond_len);

    bundle.table.columns = {"scale", "height", "width", "tokens", "kept", "skipped", "flops", "dense_flops", "wall_ns"};
    for (std::size_t i = 0; i < r.scales.size(); ++i) {
        const ScaleEntry& s = r.scales[i];
        bundle.table.add_row({static_cast<std::int64_t>(s.scale), static_cast<std::int64_t>(s.height),
                              static_cast<std::int64_t>(s.width), static_cast<std::int64_t>(s.height * s.width),
                              static_cast<std::int64_t>(s.kept), std::int64_t{s.skipped}, s.flops,
                              dense_flops.per_scale[i], s.wall_ns});
    }
    if (config.export_masks && !r.error) {
        bundle.extra["masks"] = command_mask(config).table.to_json();
    }
    return bundle;
}

ReportBundle command_sweep(const ExperimentConfig& config) {
    const ToyModel model(config.model);
    DenseCache dense(model, config.schedule().dense(), config.batch);
    ReportBundle bundle;
    bundle.command = "sweep";
    bundle.table.columns = {"stages", "ratio", "kept_total", "flops", "dense_flops", "analytic_speedup",
                            "wall_ns", "dense_wall_ns", "wall_speedup", "psnr_db", "ssim"};

    std::vector<std::vector<std::size_t>> sets = config.sweep.stage_sets;
    if (sets.empty()) sets.push_back(config.prune.stages);
    for (const auto& stages : sets) {
        for (const double ratio : config.sweep.ratios) {
            const std::vector<double> ratios(stages.size(), ratio);
            const ScaleSchedule schedule =
                config.schedule_with(stages, ratios, config.prune.strategy, config.prune.recovery);
            std::ostringstream label;
            label << "sweep stages=" << join(stages) << " r=" << format_number(ratio);
            RunReport r = measure(config, model, schedule, dense, label.str());
            const Fidelity f = r.fidelity.value_or(Fidelity{});
            bundle.table.add_row({join(stages), ratio, static_cast<std::int64_t>(r.totals.kept), r.totals.flops,
                                  r.dense_flops, r.analytic_speedup(), r.totals.wall_ns, r.dense_wall_ns,
                                  r.wall_speedup(), f.psnr_db, f.ssim});
            bundle.runs.push_back(std::move(r));
        }
    }
    return bundle;
}

Fidelity mean_fidelity(const ToyModel& model, const ScaleSchedule& schedule, std::size_t seeds, CacheMode cache_mode) {
    DenseCache dense(model, schedule.dense(), 1);
    return fidelity_over(dense, model, schedule, seed_range(seeds), 1, cache_mode);
}

ReportBundle command_ablate(const ExperimentConfig& config) {
    const ToyModel model(config.model);
    DenseCache dense(model, config.schedule().dense(), config.batch);
    const auto seeds = seed_range(config.ablate.seeds);
    const std::vector<double> ratios(config.prune.stages.size(), config.ablate.ratio);

    ReportBundle bundle;
    bundle.command = "ablate";
    bundle.table.columns = {"strategy", "recovery", "ratio", "seeds", "psnr_db", "ssim"};
    for (const PruneStrategy strategy : config.ablate.strategies) {
        for (const RecoveryKind kind : config.ablate.recoveries) {
            RecoveryStrategy recovery = config.prune.recovery;
            recovery.kind = kind;
            const ScaleSchedule schedule = config.schedule_with(config.prune.stages, ratios, strategy, recovery);
            const Fidelity f = fidelity_over(dense, model, schedule, seeds, config.batch, config.cache_mode);
            bundle.table.add_row({std::string(to_string(strategy)), std::string(to_string(kind)), config.ablate.ratio,
                                  static_cast<std::int64_t>(seeds.size()), f.psnr_db, f.ssim});
        }
    }
    bundle.extra["stages"] = config.prune.stages;
    return bundle;
}

ReportBundle command_profile(const ExperimentConfig& config) {
    const ToyModel model(config.model);
    const ScaleSchedule dense = config.schedule().dense();
    const PipelineResult run = timed_run(model, dense, options_for(config, config.input_seeds.front()), config.timing);

    double total_flops = 0.0;
    std::int64_t total_ns = 0;
    for (const auto& rec : run.records) {
        total_flops += rec.flops;
        total_ns += rec.wall_ns;
    }
    ReportBundle bundle;
    bundle.command = "profile";
    bundle.table.columns = {"scale", "height", "width", "tokens", "cache_tokens", "flops", "flops_pct", "wall_ns",
                            "wall_pct"};
    RunReport report;
    report.label = "profile";
    report.config = config.raw;
    report.seeds = {config.model.weight_seed, config.input_seeds, config.prune.params.rng_seed};
    for (const auto& rec : run.records) {
        bundle.table.add_row({static_cast<std::int64_t>(rec.scale), static_cast<std::int64_t>(rec.shape.height),
                              static_cast<std::int64_t>(rec.shape.width), static_cast<std::int64_t>(rec.shape.tokens()),
                              static_cast<std::int64_t>(rec.cache_tokens), rec.flops, 100.0 * rec.flops / total_flops,
                              rec.wall_ns,
                              total_ns > 0 ? 100.0 * static_cast<double>(rec.wall_ns) / static_cast<double>(total_ns)
                                           : 0.0});
        report.scales.push_back(
            {rec.scale, rec.shape.height, rec.shape.width, rec.kept, rec.skipped, rec.wall_ns, rec.flops});
    }
    report.finalize_totals();
    report.dense_flops = report.totals.flops;
    report.dense_wall_ns = report.totals.wall_ns;
    bundle.runs.push_back(std::move(report));
    return bundle;
}

ReportBundle command_sensitivity(const ExperimentConfig& config) {
    const ToyModel model(config.model);
    const ScaleSchedule dense = config.schedule().dense();
    std::vector<std::size_t> scales = config.sensitivity.scales;
    if (scales.empty()) {
        for (std::size_t s = 1; s <= dense.size(); ++s) scales.push_back(s);
    }
    DenseCache clean(model, dense, config.batch);

    ReportBundle bundle;
    bundle.command = "sensitivity";
    bundle.table.columns = {"scale", "tokens", "sigma", "seeds", "psnr_db", "ssim"};
    for (const std::size_t s : scales) {
        Fidelity f;
        for (std::size_t i = 0; i < config.sensitivity.seeds; ++i) {
            const std::uint64_t seed = i;
            const FeatureGrid noisy =
                inject_noise(model, dense, seed, s, config.sensitivity.sigma, config.noise_seed + seed, config.batch);
            const FeatureGrid& ref = clean.final_output(seed);
            f.psnr_db += psnr(ref, noisy);
            f.ssim += ssim(ref, noisy);
        }
        const auto n = static_cast<double>(config.sensitivity.seeds);
        bundle.table.add_row({static_cast<std::int64_t>(s), static_cast<std::int64_t>(dense.scales[s - 1].tokens()),
                              config.sensitivity.sigma, static_cast<std::int64_t>(config.sensitivity.seeds),
                              f.psnr_db / n, f.ssim / n});
    }
    return bundle;
}

ReportBundle command_mask(const ExperimentConfig& config) {
    const ToyModel model(config.model);
    const PipelineResult run =
        run_pruned(model, config.schedule(), options_for(config, config.input_seeds.front()));
    const std::filesystem::path dir = std::filesystem::path(config.output_dir) / "masks";
    std::filesystem::create_directories(dir);

    ReportBundle bundle;
    bundle.command = "mask";
    bundle.table.columns = {"scale", "batch", "height", "width", "kept", "file"};
    for (const auto& rec : run.records) {
        if (rec.skipped || rec.kept_indices.empty()) continue;
        for (std::size_t b = 0; b < rec.kept_indices.size(); ++b) {
            const std::string name = "scale" + std::to_string(rec.scale) + "_b" + std::to_string(b) + ".pgm";
            export_mask(rec.kept_indices[b], rec.shape.height, rec.shape.width, dir / name);
            bundle.table.add_row({static_cast<std::int64_t>(rec.scale), static_cast<std::int64_t>(b),
                                  static_cast<std::int64_t>(rec.shape.height),
                                  static_cast<std::int64_t>(rec.shape.width), static_cast<std::int64_t>(rec.kept),
                                  "masks/" + name});
        }
    }
    return bundle;
}

void write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream json_out(dir / "report.json");
    if (!json_out) throw std::runtime_error("cannot write '" + (dir / "report.json").string() + "'");
    json_out << bundle.to_json().dump(2) << '\n';
    std::ofstream csv_out(dir / "report.csv");
    if (!csv_out) throw std::runtime_error("cannot write '" + (dir / "report.csv").string() + "'");
    csv_out << bundle.table.to_csv();
}

}  // namespace stepvar
