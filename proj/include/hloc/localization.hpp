#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hloc/classifier.hpp"
#include "hloc/dataset.hpp"
#include "hloc/descriptor.hpp"
#include "hloc/detail/csv.hpp"
#include "hloc/detail/parallel.hpp"

namespace hloc {

// The visual map: per-room (descriptor, pose) pairs retrieval runs against.
struct MapEntry {
    std::string id;
    std::vector<float> descriptor;
    double x = 0.0;
    double y = 0.0;
};

struct VisualMap {
    std::vector<std::string> rooms;                 // sorted
    std::vector<std::vector<MapEntry>> entries;     // parallel to rooms
    std::size_t dim = 0;

    int room_index(const std::string& room) const {
        auto it = std::lower_bound(rooms.begin(), rooms.end(), room);
        if (it == rooms.end() || *it != room) return -1;
        return static_cast<int>(it - rooms.begin());
    }

    std::size_t total_entries() const {
        std::size_t n = 0;
        for (const auto& room : entries) n += room.size();
        return n;
    }

    // Joins a manifest with its descriptor set. Entries are sorted by id
    // within each room so argmin tie-breaks do not depend on input order.
    static VisualMap build(const Manifest& m, const DescriptorSet& ds) {
        align_with_manifest(ds, m);
        std::unordered_map<std::string, const ImageRecord*> by_id;
        for (const auto& rec : m.records) by_id[rec.id] = &rec;

        VisualMap map;
        map.rooms = m.rooms;
        map.dim = ds.dim;
        map.entries.resize(m.rooms.size());
        for (const auto& row : ds.rows) {
            const ImageRecord* rec = by_id.at(row.source_id);
            int ri = map.room_index(rec->room);
            map.entries[static_cast<std::size_t>(ri)].push_back(
                {row.source_id, row.values, rec->x, rec->y});
        }
        for (auto& room : map.entries) {
            std::sort(room.begin(), room.end(),
                      [](const MapEntry& a, const MapEntry& b) { return a.id < b.id; });
            if (room.empty())
                throw std::runtime_error("visual map has a room with no entries");
        }
        return map;
    }
};

struct LocalizationResult {
    std::string predicted_room;
    std::vector<double> distances;   // one per entry of the predicted room
    std::size_t k = 0;               // argmin index into distances
    std::string match_id;
    double x_est = 0.0;
    double y_est = 0.0;
    double distance = 0.0;           // distances[k]
    double elapsed_ms = 0.0;
};

// Euclidean distance with 64-bit accumulation over float32 components.
inline double euclidean(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw std::runtime_error("descriptor dim mismatch: " + std::to_string(a.size()) +
                                 " vs " + std::to_string(b.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

namespace detail_localization {

// Exhaustive linear scan; ties break to the lowest index.
inline LocalizationResult nearest_in_entries(const std::vector<MapEntry>& entries,
                                             std::span<const float> query) {
    LocalizationResult res;
    res.distances.reserve(entries.size());
    for (const auto& e : entries) res.distances.push_back(euclidean(query, e.descriptor));
    res.k = 0;
    for (std::size_t j = 1; j < res.distances.size(); ++j)
        if (res.distances[j] < res.distances[res.k]) res.k = j;
    const MapEntry& match = entries[res.k];
    res.match_id = match.id;
    res.x_est = match.x;
    res.y_est = match.y;
    res.distance = res.distances[res.k];
    return res;
}

}  // namespace detail_localization

// Fine localization stage in isolation: nearest neighbour within one room.
inline LocalizationResult nearest_in_room(const VisualMap& map, const std::string& room,
                                          std::span<const float> query) {
    int ri = map.room_index(room);
    if (ri < 0)
        throw std::runtime_error("predicted room not in visual map: " + room);
    auto res = detail_localization::nearest_in_entries(map.entries[static_cast<std::size_t>(ri)], query);
    res.predicted_room = room;
    return res;
}

// Coarse-to-fine: softmax room prediction, then within-room retrieval. The
// estimate is the capture pose of the retrieved map image.
inline LocalizationResult localize_hierarchical(const SoftmaxModel& model, const VisualMap& map,
                                                std::span<const float> query) {
    auto t0 = std::chrono::steady_clock::now();
    Prediction pred = predict_room(model, query);
    LocalizationResult res = nearest_in_room(map, pred.room, query);
    res.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

// Flat baseline: nearest neighbour over the union of all rooms.
inline LocalizationResult localize_global(const VisualMap& map, std::span<const float> query) {
    auto t0 = std::chrono::steady_clock::now();
    if (map.rooms.empty()) throw std::runtime_error("visual map is empty");

    LocalizationResult best;
    bool first = true;
    for (std::size_t ri = 0; ri < map.rooms.size(); ++ri) {
        auto res = detail_localization::nearest_in_entries(map.entries[ri], query);
        if (first || res.distance < best.distance) {
            res.predicted_room = map.rooms[ri];
            best = std::move(res);
            first = false;
        }
    }
    best.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return best;
}

enum class LocalizeMode { hierarchical, global };

inline const char* to_string(LocalizeMode m) {
    return m == LocalizeMode::hierarchical ? "hierarchical" : "global";
}

inline LocalizeMode parse_mode(const std::string& s) {
    if (s == "hierarchical") return LocalizeMode::hierarchical;
    if (s == "global") return LocalizeMode::global;
    throw std::runtime_error("unknown localization mode: " + s);
}

struct BatchEntry {
    std::string query_id;
    std::optional<LocalizationResult> result;
    std::string error;  // nonempty when the query failed
};

// Per-query results in query order; failures are recorded per entry rather
// than aborting the batch. Elapsed time is measured per query.
inline std::vector<BatchEntry> batch_localize(const SoftmaxModel* model, const VisualMap& map,
                                              const DescriptorSet& queries, LocalizeMode mode) {
    if (mode == LocalizeMode::hierarchical && model == nullptr)
        throw std::invalid_argument("hierarchical mode requires a model");
    std::vector<BatchEntry> out(queries.rows.size());
    detail::parallel_for(queries.rows.size(), [&](std::size_t i) {
        out[i].query_id = queries.rows[i].source_id;
        try {
            out[i].result = (mode == LocalizeMode::hierarchical)
                                ? localize_hierarchical(*model, map, queries.rows[i].values)
                                : localize_global(map, queries.rows[i].values);
        } catch (const std::exception& e) {
            out[i].error = e.what();
        }
    });
    return out;
}

// Results CSV: query_id,mode,pred_room,true_room,match_id,x_est,y_est,
// x_true,y_true,distance,elapsed_ms. Truth comes from the query manifest.
inline void save_results_csv(const fs::path& path, const std::vector<BatchEntry>& batch,
                             LocalizeMode mode, const Manifest& truth) {
    std::unordered_map<std::string, const ImageRecord*> by_id;
    for (const auto& rec : truth.records) by_id[rec.id] = &rec;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write results " + path.string());
    out << "query_id,mode,pred_room,true_room,match_id,x_est,y_est,x_true,y_true,distance,elapsed_ms\n";
    for (const auto& entry : batch) {
        if (!entry.result) continue;  // failed queries carry no row
        auto it = by_id.find(entry.query_id);
        if (it == by_id.end())
            throw std::runtime_error("query id not in truth manifest: " + entry.query_id);
        const ImageRecord& rec = *it->second;
        const LocalizationResult& r = *entry.result;
        out << detail::csv_escape(entry.query_id) << ',' << to_string(mode) << ','
            << detail::csv_escape(r.predicted_room) << ',' << detail::csv_escape(rec.room) << ','
            << detail::csv_escape(r.match_id) << ',' << detail::format_double(r.x_est) << ','
            << detail::format_double(r.y_est) << ',' << detail::format_double(rec.x) << ','
            << detail::format_double(rec.y) << ',' << detail::format_double(r.distance) << ','
            << detail::format_double(r.elapsed_ms) << '\n';
    }
    if (!out) throw std::runtime_error("write failed for results " + path.string());
}

}  // namespace hloc
