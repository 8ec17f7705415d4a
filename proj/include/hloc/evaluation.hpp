#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hloc/dataset.hpp"
#include "hloc/detail/csv.hpp"

namespace hloc {

// One parsed row of a results CSV.
struct ResultRow {
    std::string query_id;
    std::string mode;
    std::string pred_room;
    std::string true_room;
    std::string match_id;
    double x_est = 0.0, y_est = 0.0;
    double x_true = 0.0, y_true = 0.0;
    double distance = 0.0;
    double elapsed_ms = 0.0;
};

inline std::vector<ResultRow> load_results_csv(const fs::path& path) {
    auto lines = detail::read_lines(path.string());
    const std::string header =
        "query_id,mode,pred_room,true_room,match_id,x_est,y_est,x_true,y_true,distance,elapsed_ms";
    if (lines.empty() || lines[0] != header)
        throw std::runtime_error("bad results header in " + path.string());
    std::vector<ResultRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto f = detail::csv_split(lines[i]);
        if (f.size() != 11)
            throw std::runtime_error("malformed results row in " + path.string() + ": " + lines[i]);
        ResultRow r;
        r.query_id = f[0];
        r.mode = f[1];
        r.pred_room = f[2];
        r.true_room = f[3];
        r.match_id = f[4];
        r.x_est = detail::parse_double(f[5], path.string());
        r.y_est = detail::parse_double(f[6], path.string());
        r.x_true = detail::parse_double(f[7], path.string());
        r.y_true = detail::parse_double(f[8], path.string());
        r.distance = detail::parse_double(f[9], path.string());
        r.elapsed_ms = detail::parse_double(f[10], path.string());
        rows.push_back(std::move(r));
    }
    return rows;
}

// Per-condition summary: room-retrieval accuracy, MAE of the metric error,
// box-plot statistics, and mean per-query time.
struct ConditionStats {
    double room_accuracy = 0.0;  // percent
    double mae = 0.0;            // meters
    double q1 = 0.0, median = 0.0, q3 = 0.0;
    double whisker_low = 0.0, whisker_high = 0.0;  // 1.5*IQR rule
    std::size_t outliers = 0;
    double mean_elapsed_ms = 0.0;
    std::size_t n = 0;

    bool operator==(const ConditionStats&) const = default;
};

struct EvalReport {
    // Keys: conditions present in the data, plus "global" pooling them all.
    std::map<std::string, ConditionStats> sections;

    bool operator==(const EvalReport&) const = default;
};

// Quartiles by linear interpolation between closest ranks (the same rule
// over p in {0.25, 0.5, 0.75}): value at fractional position p*(n-1) of the
// sorted data.
inline double quantile_linear(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
    double pos = p * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

namespace detail_evaluation {

struct Sample {
    bool room_correct;
    double error;       // meters
    double elapsed_ms;
};

inline ConditionStats stats_for(std::vector<Sample> samples) {
    ConditionStats s;
    s.n = samples.size();
    if (samples.empty()) return s;

    std::size_t correct = 0;
    double err_sum = 0.0, time_sum = 0.0;
    std::vector<double> errors;
    errors.reserve(samples.size());
    for (const auto& smp : samples) {
        correct += smp.room_correct ? 1 : 0;
        err_sum += smp.error;
        time_sum += smp.elapsed_ms;
        errors.push_back(smp.error);
    }
    s.room_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(s.n);
    s.mae = err_sum / static_cast<double>(s.n);
    s.mean_elapsed_ms = time_sum / static_cast<double>(s.n);

    std::sort(errors.begin(), errors.end());
    s.q1 = quantile_linear(errors, 0.25);
    s.median = quantile_linear(errors, 0.50);
    s.q3 = quantile_linear(errors, 0.75);
    double iqr = s.q3 - s.q1;
    double lo_fence = s.q1 - 1.5 * iqr;
    double hi_fence = s.q3 + 1.5 * iqr;
    // Whiskers reach the last datum inside the fences.
    s.whisker_low = errors.back();
    s.whisker_high = errors.front();
    for (double e : errors) {
        if (e >= lo_fence && e < s.whisker_low) s.whisker_low = e;
        if (e <= hi_fence && e > s.whisker_high) s.whisker_high = e;
    }
    for (double e : errors)
        if (e < s.whisker_low || e > s.whisker_high) ++s.outliers;
    return s;
}

}  // namespace detail_evaluation

// Joins results with the truth manifest (condition per query id) and
// aggregates per condition plus a pooled "global" section.
inline EvalReport evaluate(const std::vector<ResultRow>& results, const Manifest& truth) {
    if (results.empty()) throw std::runtime_error("cannot evaluate empty results");
    std::unordered_map<std::string, const ImageRecord*> by_id;
    for (const auto& rec : truth.records) by_id[rec.id] = &rec;

    std::map<std::string, std::vector<detail_evaluation::Sample>> groups;
    std::vector<detail_evaluation::Sample> pooled;
    for (const auto& row : results) {
        auto it = by_id.find(row.query_id);
        if (it == by_id.end())
            throw std::runtime_error("result id not in truth manifest: " + row.query_id);
        const ImageRecord& rec = *it->second;
        detail_evaluation::Sample s;
        s.room_correct = (row.pred_room == rec.room);
        // The 2-D position error folded to a scalar: Euclidean norm in meters.
        s.error = std::hypot(row.x_est - rec.x, row.y_est - rec.y);
        s.elapsed_ms = row.elapsed_ms;
        groups[to_string(rec.condition)].push_back(s);
        pooled.push_back(s);
    }

    EvalReport report;
    for (auto& [cond, samples] : groups)
        report.sections[cond] = detail_evaluation::stats_for(std::move(samples));
    report.sections["global"] = detail_evaluation::stats_for(std::move(pooled));
    return report;
}

inline double room_accuracy_percent(const std::vector<ResultRow>& results, const Manifest& truth) {
    return evaluate(results, truth).sections.at("global").room_accuracy;
}

inline double mean_absolute_error(const std::vector<ResultRow>& results, const Manifest& truth) {
    return evaluate(results, truth).sections.at("global").mae;
}

inline nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json j;
    for (const auto& [name, s] : report.sections) {
        j[name] = {{"room_accuracy", s.room_accuracy},
                   {"mae", s.mae},
                   {"q1", s.q1},
                   {"median", s.median},
                   {"q3", s.q3},
                   {"whisker_low", s.whisker_low},
                   {"whisker_high", s.whisker_high},
                   {"outliers", s.outliers},
                   {"mean_elapsed_ms", s.mean_elapsed_ms},
                   {"n", s.n}};
    }
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport report;
    for (auto it = j.begin(); it != j.end(); ++it) {
        ConditionStats s;
        s.room_accuracy = it.value().at("room_accuracy").get<double>();
        s.mae = it.value().at("mae").get<double>();
        s.q1 = it.value().at("q1").get<double>();
        s.median = it.value().at("median").get<double>();
        s.q3 = it.value().at("q3").get<double>();
        s.whisker_low = it.value().at("whisker_low").get<double>();
        s.whisker_high = it.value().at("whisker_high").get<double>();
        s.outliers = it.value().at("outliers").get<std::size_t>();
        s.mean_elapsed_ms = it.value().at("mean_elapsed_ms").get<double>();
        s.n = it.value().at("n").get<std::size_t>();
        report.sections[it.key()] = s;
    }
    return report;
}

namespace detail_evaluation {

inline std::vector<std::string> section_order(const EvalReport& report) {
    std::vector<std::string> order;
    for (const char* name : {"cloudy", "night", "sunny"})
        if (report.sections.count(name)) order.push_back(name);
    for (const auto& [name, s] : report.sections)
        if (name != "global" && std::find(order.begin(), order.end(), name) == order.end())
            order.push_back(name);
    order.push_back("global");
    return order;
}

}  // namespace detail_evaluation

// Plain-text tables in the shape of the paper's reporting: accuracy per
// condition, localization error per condition, and the mean per-query time.
inline std::string render_report_text(const EvalReport& report) {
    std::string out;
    char line[256];
    auto add = [&](const char* fmt, auto&&... args) {
        std::snprintf(line, sizeof(line), fmt, args...);
        out += line;
    };

    auto order = detail_evaluation::section_order(report);
    out += "Room Retrieval Accuracy (%)\n";
    add("%-10s %10s %8s\n", "Condition", "Accuracy", "n");
    for (const auto& name : order) {
        const auto& s = report.sections.at(name);
        add("%-10s %10.2f %8zu\n", name.c_str(), s.room_accuracy, s.n);
    }
    out += "\nLocalization Error (m)\n";
    add("%-10s %8s %8s %8s %8s %9s %9s %9s\n", "Condition", "MAE", "Q1", "Median", "Q3",
        "WhiskLo", "WhiskHi", "Outliers");
    for (const auto& name : order) {
        const auto& s = report.sections.at(name);
        add("%-10s %8.2f %8.3f %8.3f %8.3f %9.3f %9.3f %9zu\n", name.c_str(), s.mae, s.q1,
            s.median, s.q3, s.whisker_low, s.whisker_high, s.outliers);
    }
    add("\nMean localization time per query: %.2f ms (n=%zu)\n",
        report.sections.at("global").mean_elapsed_ms, report.sections.at("global").n);
    return out;
}

// Emits report.json and the companion plain-text table.
inline EvalReport write_report(const std::vector<ResultRow>& results, const Manifest& truth,
                               const fs::path& json_path, const fs::path& text_path) {
    EvalReport report = evaluate(results, truth);
    std::ofstream js(json_path, std::ios::binary | std::ios::trunc);
    if (!js) throw std::runtime_error("cannot write " + json_path.string());
    js << to_json(report).dump(2) << '\n';
    std::ofstream txt(text_path, std::ios::binary | std::ios::trunc);
    if (!txt) throw std::runtime_error("cannot write " + text_path.string());
    txt << render_report_text(report);
    return report;
}

}  // namespace hloc
