// Copyright 2026 The StepVAR-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stepvar/report.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace stepvar {

using nlohmann::json;

void RunReport::finalize_totals() {
    totals = Totals{};
    for (const auto& s : scales) {
        totals.kept += s.kept;
        totals.wall_ns += s.wall_ns;
        totals.flops += s.flops;
    }
}

double RunReport::analytic_speedup() const { return totals.flops > 0.0 ? dense_flops / totals.flops : 0.0; }

double RunReport::wall_speedup() const {
    return totals.wall_ns > 0 ? static_cast<double>(dense_wall_ns) / static_cast<double>(totals.wall_ns) : 0.0;
}

json to_json(const RunReport& r) {
    json scales = json::array();
    for (const auto& s : r.scales) {
        scales.push_back({{"scale", s.scale},
                          {"height", s.height},
                          {"width", s.width},
                          {"kept", s.kept},
                          {"skipped", s.skipped},
                          {"wall_ns", s.wall_ns},
                          {"flops", s.flops}});
    }
    json j = {
        {"label", r.label},
        {"config", r.config},
        {"seeds", {{"weight", r.seeds.weight}, {"input", r.seeds.input}, {"rng", r.seeds.rng}}},
        {"scales", scales},
        {"totals", {{"kept", r.totals.kept}, {"wall_ns", r.totals.wall_ns}, {"flops", r.totals.flops}}},
        {"dense_flops", r.dense_flops},
        {"dense_wall_ns", r.dense_wall_ns},
        {"analytic_speedup", r.analytic_speedup()},
        {"wall_speedup", r.wall_speedup()},
    };
    j["fidelity"] = r.fidelity ? json{{"psnr_db", r.fidelity->psnr_db}, {"ssim", r.fidelity->ssim}} : json(nullptr);
    j["error"] = r.error ? json(*r.error) : json(nullptr);
    return j;
}

RunReport run_report_from_json(const json& j) {
    RunReport r;
    r.label = j.at("label").get<std::string>();
    r.config = j.at("config");
    const json& seeds = j.at("seeds");
    r.seeds.weight = seeds.at("weight").get<std::uint64_t>();
    r.seeds.input = seeds.at("input").get<std::vector<std::uint64_t>>();
    r.seeds.rng = seeds.at("rng").get<std::uint64_t>();
    for (const json& s : j.at("scales")) {
        r.scales.push_back({s.at("scale").get<std::size_t>(), s.at("height").get<std::size_t>(),
                            s.at("width").get<std::size_t>(), s.at("kept").get<std::size_t>(),
                            s.at("skipped").get<bool>(), s.at("wall_ns").get<std::int64_t>(),
                            s.at("flops").get<double>()});
    }
    const json& t = j.at("totals");
    r.totals = {t.at("kept").get<std::size_t>(), t.at("wall_ns").get<std::int64_t>(), t.at("flops").get<double>()};
    r.dense_flops = j.at("dense_flops").get<double>();
    r.dense_wall_ns = j.at("dense_wall_ns").get<std::int64_t>();
    if (!j.at("fidelity").is_null()) {
        r.fidelity = Fidelity{j["fidelity"].at("psnr_db").get<double>(), j["fidelity"].at("ssim").get<double>()};
    }
    if (!j.at("error").is_null()) r.error = j["error"].get<std::string>();
    return r;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void Table::add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) {
        throw std::invalid_argument("Table::add_row: expected " + std::to_string(columns.size()) + " cells, got " +
                                    std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
}

std::string Table::to_csv() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, double>) {
                        out << format_number(v);
                    } else {
                        out << v;
                    }
                },
                row[i]);
        }
        out << '\n';
    }
    return out.str();
}

json Table::to_json() const {
    json rows_json = json::array();
    for (const auto& row : rows) {
        json obj = json::object();
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::visit([&](const auto& v) { obj[columns[i]] = v; }, row[i]);
        }
        rows_json.push_back(std::move(obj));
    }
    return rows_json;
}

std::size_t Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) return i;
    }
    throw std::out_of_range("no column named '" + name + "'");
}

double Table::number(std::size_t row, const std::string& name) const {
    const Cell& cell = rows.at(row).at(column(name));
    if (const auto* d = std::get_if<double>(&cell)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&cell)) return static_cast<double>(*i);
    throw std::invalid_argument("column '" + name + "' is not numeric");
}

json ReportBundle::to_json() const {
    json runs_json = json::array();
    for (const auto& r : runs) runs_json.push_back(stepvar::to_json(r));
    return {{"command", command}, {"runs", runs_json}, {"rows", table.to_json()}, {"extra", extra}};
}

}  // namespace stepvar
