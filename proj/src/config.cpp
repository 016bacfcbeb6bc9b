// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stepvar/config.hpp"

#include <fstream>
#include <set>

#include "stepvar/error.hpp"

namespace stepvar {

using nlohmann::json;

namespace {

/// Walks one JSON object, tracking the dotted path for diagnostics.
class Section {
public:
    Section(const json& node, std::string path) : m_node(node), m_path(std::move(path)) {
        if (!m_node.is_object()) throw ConfigError(m_path, "expected an object");
    }

    std::string child(const std::string& key) const { return m_path.empty() ? key : m_path + "." + key; }

    bool has(const std::string& key) {
        m_seen.insert(key);
        return m_node.contains(key);
    }

    const json& raw(const std::string& key) {
        m_seen.insert(key);
        return m_node.at(key);
    }

    Section section(const std::string& key) { return Section(raw(key), child(key)); }

    template <typename T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        return convert<T>(m_node.at(key), child(key));
    }

    template <typename T>
    std::vector<T> list(const std::string& key, std::vector<T> fallback) {
        if (!has(key)) return fallback;
        const json& arr = m_node.at(key);
        if (!arr.is_array()) throw ConfigError(child(key), "expected an array");
        std::vector<T> out;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            out.push_back(convert<T>(arr[i], child(key) + "[" + std::to_string(i) + "]"));
        }
        return out;
    }

    /// Rejects keys that were never looked up.
    void finish() const {
        for (auto it = m_node.begin(); it != m_node.end(); ++it) {
            if (!m_seen.count(it.key())) throw ConfigError(child(it.key()), "unknown key");
        }
    }

    template <typename T>
    static T convert(const json& v, const std::string& path) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(path, "expected a string");
            return v.get<std::string>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(path, "expected a number");
            return v.get<T>();
        } else if constexpr (std::is_unsigned_v<T>) {
            if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
                throw ConfigError(path, "expected a nonnegative integer");
            }
            return static_cast<T>(v.get<std::uint64_t>());
        } else {
            if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
            return v.get<T>();
        }
    }

private:
    const json& m_node;
    std::string m_path;
    std::set<std::string> m_seen;
};

template <typename Fn>
auto with_path(const std::string& path, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
}

}  // namespace

ScaleSchedule ExperimentConfig::schedule_with(const std::vector<std::size_t>& stages, const std::vector<double>& ratios,
                                              PruneStrategy strategy, RecoveryStrategy recovery) const {
    ScaleSchedule s;
    s.scales = scales;
    s.prune.assign(scales.size(), PruneSpec{});
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (stages[i] < 1 || stages[i] > scales.size()) {
            throw InvalidInput("stage " + std::to_string(stages[i]) + " is outside 1.." + std::to_string(scales.size()));
        }
        PruneSpec& p = s.prune[stages[i] - 1];
        p.ratio = ratios.at(i);
        p.strategy = p.ratio == 0.0 ? PruneStrategy::none : strategy;
        p.recovery = recovery;
        p.params = prune.params;
        p.params.ratio = p.ratio;
    }
    s.validate();
    return s;
}

ScaleSchedule ExperimentConfig::schedule() const {
    return schedule_with(prune.stages, prune.ratios, prune.strategy, prune.recovery);
}

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig cfg;
    cfg.raw = doc;
    Section root(doc, "");

    if (root.has("model")) {
        Section m = root.section("model");
        cfg.model.depth = m.get<std::size_t>("depth", cfg.model.depth);
        cfg.model.channels = m.get<std::size_t>("channels", cfg.model.channels);
        cfg.model.heads = m.get<std::size_t>("heads", cfg.model.heads);
        cfg.model.ffn_mult = m.get<std::size_t>("ffn_mult", cfg.model.ffn_mult);
        cfg.model.weight_seed = m.get<std::uint64_t>("weight_seed", cfg.model.weight_seed);
        cfg.model.locality = m.get<double>("locality", cfg.model.locality);
        m.finish();
        with_path("model", [&] { cfg.model.validate(); return 0; });
    }

    cfg.scales = ScaleSchedule::default_schedule().scales;
    if (root.has("schedule")) {
        Section s = root.section("schedule");
        if (s.has("sides") && s.has("scales")) {
            throw ConfigError("schedule", "give either 'sides' or 'scales', not both");
        }
        if (s.has("sides")) {
            const auto sides = s.list<std::size_t>("sides", {});
            cfg.scales = ScaleSchedule::from_sides(sides).scales;
        } else if (s.has("scales")) {
            const json& arr = s.raw("scales");
            if (!arr.is_array()) throw ConfigError("schedule.scales", "expected an array of [height, width] pairs");
            cfg.scales.clear();
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string p = "schedule.scales[" + std::to_string(i) + "]";
                if (!arr[i].is_array() || arr[i].size() != 2) throw ConfigError(p, "expected [height, width]");
                cfg.scales.push_back({Section::convert<std::size_t>(arr[i][0], p + "[0]"),
                                      Section::convert<std::size_t>(arr[i][1], p + "[1]")});
            }
        }
        s.finish();
        if (cfg.scales.empty()) throw ConfigError("schedule", "at least one scale is required");
    }

    cfg.batch = root.get<std::size_t>("batch", cfg.batch);
    if (cfg.batch == 0) throw ConfigError("batch", "must be positive");

    const std::size_t K = cfg.scales.size();
    // Default: the last (up to) four scales at {0.4, 0.5, 1.0, 1.0}.
    const std::vector<double> default_ratios{0.4, 0.5, 1.0, 1.0};
    const std::size_t n_default = std::min<std::size_t>(K, default_ratios.size());
    cfg.prune.ratios.assign(default_ratios.end() - static_cast<std::ptrdiff_t>(n_default), default_ratios.end());
    for (std::size_t s = K - n_default + 1; s <= K; ++s) cfg.prune.stages.push_back(s);
    if (root.has("prune")) {
        Section p = root.section("prune");
        cfg.prune.ratios = p.list<double>("ratios", cfg.prune.ratios);
        if (p.has("stages") && p.has("last")) throw ConfigError("prune", "give either 'stages' or 'last', not both");
        if (p.has("last")) {
            const auto last = p.get<std::size_t>("last", 0);
            if (last > K) throw ConfigError("prune.last", "exceeds the number of scales");
            cfg.prune.stages.clear();
            for (std::size_t s = K - last + 1; s <= K; ++s) cfg.prune.stages.push_back(s);
        } else if (p.has("stages")) {
            cfg.prune.stages = p.list<std::size_t>("stages", {});
        } else {
            // Ratios alone target the last ratios.size() scales.
            if (cfg.prune.ratios.size() > K) throw ConfigError("prune.ratios", "more ratios than scales");
            cfg.prune.stages.clear();
            for (std::size_t s = K - cfg.prune.ratios.size() + 1; s <= K; ++s) cfg.prune.stages.push_back(s);
        }
        if (cfg.prune.ratios.size() != cfg.prune.stages.size()) {
            throw ConfigError("prune.ratios", "expected " + std::to_string(cfg.prune.stages.size()) +
                                                  " ratios (one per stage), got " +
                                                  std::to_string(cfg.prune.ratios.size()));
        }
        for (std::size_t i = 0; i < cfg.prune.stages.size(); ++i) {
            if (cfg.prune.stages[i] < 1 || cfg.prune.stages[i] > K) {
                throw ConfigError("prune.stages[" + std::to_string(i) + "]", "must lie in 1.." + std::to_string(K));
            }
        }
        const auto strategy = p.get<std::string>("strategy", "stepvar");
        cfg.prune.strategy = with_path("prune.strategy", [&] { return parse_prune_strategy(strategy); });
        const auto recovery = p.get<std::string>("recovery", "nearest_neighbor");
        cfg.prune.recovery.kind = with_path("prune.recovery", [&] { return parse_recovery_kind(recovery); });
        cfg.prune.recovery.anchor_stride = p.get<int>("anchor_stride", 3);
        cfg.prune.params.w_str = p.get<double>("w_str", 0.5);
        cfg.prune.params.power_iters = p.get<int>("power_iters", 3);
        cfg.prune.params.rng_seed = p.get<std::uint64_t>("rng_seed", 0);
        p.finish();
        with_path("prune.anchor_stride", [&] { cfg.prune.recovery.validate(); return 0; });
        with_path("prune", [&] { cfg.prune.params.validate(); return 0; });
    }
    for (std::size_t i = 0; i < cfg.prune.ratios.size(); ++i) {
        const double r = cfg.prune.ratios[i];
        if (!(r >= 0.0 && r <= 1.0)) {
            throw ConfigError("prune.ratios[" + std::to_string(i) + "]", "must lie in [0, 1]");
        }
    }

    const auto cache_mode = root.get<std::string>("cache_mode", "kept_only");
    cfg.cache_mode = with_path("cache_mode", [&] { return parse_cache_mode(cache_mode); });
    cfg.cond_len = root.get<std::size_t>("cond_len", 0);

    if (root.has("seeds")) {
        Section s = root.section("seeds");
        cfg.input_seeds = s.list<std::uint64_t>("input", cfg.input_seeds);
        cfg.noise_seed = s.get<std::uint64_t>("noise", cfg.noise_seed);
        s.finish();
        if (cfg.input_seeds.empty()) throw ConfigError("seeds.input", "at least one seed is required");
    }

    if (root.has("timing")) {
        Section t = root.section("timing");
        cfg.timing.enabled = t.get<bool>("enabled", cfg.timing.enabled);
        cfg.timing.warmup = t.get<int>("warmup", cfg.timing.warmup);
        cfg.timing.repeats = t.get<int>("repeats", cfg.timing.repeats);
        t.finish();
        if (cfg.timing.warmup < 0) throw ConfigError("timing.warmup", "must be >= 0");
        if (cfg.timing.repeats < 1) throw ConfigError("timing.repeats", "must be >= 1");
    }

    cfg.output_dir = root.get<std::string>("output_dir", cfg.output_dir);
    cfg.export_masks = root.get<bool>("masks", cfg.export_masks);

    if (root.has("sweep")) {
        Section s = root.section("sweep");
        cfg.sweep.ratios = s.list<double>("ratios", cfg.sweep.ratios);
        if (s.has("stage_sets")) {
            const json& arr = s.raw("stage_sets");
            if (!arr.is_array()) throw ConfigError("sweep.stage_sets", "expected an array of stage lists");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string p = "sweep.stage_sets[" + std::to_string(i) + "]";
                if (!arr[i].is_array()) throw ConfigError(p, "expected an array of stage indices");
                std::vector<std::size_t> set;
                for (std::size_t j = 0; j < arr[i].size(); ++j) {
                    const auto st = Section::convert<std::size_t>(arr[i][j], p + "[" + std::to_string(j) + "]");
                    if (st < 1 || st > K) throw ConfigError(p + "[" + std::to_string(j) + "]", "stage out of range");
                    set.push_back(st);
                }
                cfg.sweep.stage_sets.push_back(std::move(set));
            }
        }
        s.finish();
        for (std::size_t i = 0; i < cfg.sweep.ratios.size(); ++i) {
            const double r = cfg.sweep.ratios[i];
            if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("sweep.ratios[" + std::to_string(i) + "]", "must lie in [0, 1]");
        }
    }

    if (root.has("ablate")) {
        Section a = root.section("ablate");
        if (a.has("strategies")) {
            cfg.ablate.strategies.clear();
            const auto names = a.list<std::string>("strategies", {});
            for (std::size_t i = 0; i < names.size(); ++i) {
                cfg.ablate.strategies.push_back(with_path("ablate.strategies[" + std::to_string(i) + "]",
                                                          [&] { return parse_prune_strategy(names[i]); }));
            }
        }
        if (a.has("recoveries")) {
            cfg.ablate.recoveries.clear();
            const auto names = a.list<std::string>("recoveries", {});
            for (std::size_t i = 0; i < names.size(); ++i) {
                cfg.ablate.recoveries.push_back(with_path("ablate.recoveries[" + std::to_string(i) + "]",
                                                          [&] { return parse_recovery_kind(names[i]); }));
            }
        }
        cfg.ablate.ratio = a.get<double>("ratio", cfg.ablate.ratio);
        cfg.ablate.seeds = a.get<std::size_t>("seeds", cfg.ablate.seeds);
        a.finish();
        if (!(cfg.ablate.ratio >= 0.0 && cfg.ablate.ratio < 1.0)) {
            throw ConfigError("ablate.ratio", "must lie in [0, 1)");
        }
        if (cfg.ablate.seeds == 0) throw ConfigError("ablate.seeds", "must be positive");
    }

    if (root.has("sensitivity")) {
        Section s = root.section("sensitivity");
        cfg.sensitivity.sigma = s.get<double>("sigma", cfg.sensitivity.sigma);
        cfg.sensitivity.seeds = s.get<std::size_t>("seeds", cfg.sensitivity.seeds);
        cfg.sensitivity.scales = s.list<std::size_t>("scales", {});
        s.finish();
        if (!(cfg.sensitivity.sigma >= 0.0)) throw ConfigError("sensitivity.sigma", "must be >= 0");
        if (cfg.sensitivity.seeds == 0) throw ConfigError("sensitivity.seeds", "must be positive");
        for (std::size_t i = 0; i < cfg.sensitivity.scales.size(); ++i) {
            const auto s_i = cfg.sensitivity.scales[i];
            if (s_i < 1 || s_i > K) throw ConfigError("sensitivity.scales[" + std::to_string(i) + "]", "scale out of range");
        }
    }

    root.finish();
    with_path("prune", [&] { return cfg.schedule(); });
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file '" + path.string() + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(doc);
}

json default_config_json() {
    return {
        {"model", {{"depth", 4}, {"channels", 64}, {"heads", 4}, {"ffn_mult", 4}, {"weight_seed", 0}, {"locality", 1.0}}},
        {"schedule", {{"sides", {1, 2, 4, 8, 12, 16, 24, 32}}}},
        {"prune",
         {{"last", 4},
          {"ratios", {0.4, 0.5, 1.0, 1.0}},
          {"strategy", "stepvar"},
          {"recovery", "nearest_neighbor"},
          {"w_str", 0.5},
          {"power_iters", 3},
          {"rng_seed", 0}}},
        {"seeds", {{"input", {0}}, {"noise", 0}}},
        {"timing", {{"enabled", true}, {"warmup", 2}, {"repeats", 5}}},
        {"output_dir", "stepvar_out"},
    };
}

}  // namespace stepvar
