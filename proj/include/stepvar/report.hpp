// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace stepvar {

struct ScaleEntry {
    std::size_t scale = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t kept = 0;
    bool skipped = false;
    std::int64_t wall_ns = 0;
    double flops = 0.0;

    friend bool operator==(const ScaleEntry&, const ScaleEntry&) = default;
};

struct Fidelity {
    double psnr_db = 0.0;
    double ssim = 0.0;
    friend bool operator==(const Fidelity&, const Fidelity&) = default;
};

struct Seeds {
    std::uint64_t weight = 0;
    std::vector<std::uint64_t> input;
    std::uint64_t rng = 0;
    friend bool operator==(const Seeds&, const Seeds&) = default;
};

struct Totals {
    std::size_t kept = 0;
    std::int64_t wall_ns = 0;
    double flops = 0.0;
    friend bool operator==(const Totals&, const Totals&) = default;
};

/// Measurements of one pruned configuration against its dense reference.
struct RunReport {
    std::string label;
    nlohmann::json config;  ///< echo of the configuration that produced the run
    Seeds seeds;
    std::vector<ScaleEntry> scales;
    Totals totals;
    double dense_flops = 0.0;
    std::int64_t dense_wall_ns = 0;
    std::optional<Fidelity> fidelity;
    std::optional<std::string> error;

    /// Recomputes totals from the per-scale entries.
    void finalize_totals();
    double analytic_speedup() const;
    double wall_speedup() const;

    friend bool operator==(const RunReport&, const RunReport&) = default;
};

nlohmann::json to_json(const RunReport& report);
RunReport run_report_from_json(const nlohmann::json& j);

/// Rows of named columns; the CSV contract of every CLI command.
struct Table {
    using Cell = std::variant<std::int64_t, double, std::string>;

    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add_row(std::vector<Cell> row);
    std::string to_csv() const;
    nlohmann::json to_json() const;
    /// Index of a column; throws std::out_of_range when missing.
    std::size_t column(const std::string& name) const;
    double number(std::size_t row, const std::string& name) const;
};

/// Everything a CLI command emits.
struct ReportBundle {
    std::string command;
    std::vector<RunReport> runs;
    Table table;
    nlohmann::json extra = nlohmann::json::object();

    nlohmann::json to_json() const;
};

/// Fixed-precision number formatting shared by CSV writers.
std::string format_number(double v);

}  // namespace stepvar
