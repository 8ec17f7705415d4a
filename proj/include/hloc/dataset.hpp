#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hloc/detail/csv.hpp"
#include "hloc/image_io.hpp"

namespace hloc {

namespace fs = std::filesystem;

enum class Condition { cloudy, night, sunny };

inline const char* to_string(Condition c) {
    switch (c) {
        case Condition::cloudy: return "cloudy";
        case Condition::night: return "night";
        default: return "sunny";
    }
}

inline Condition parse_condition(const std::string& s) {
    if (s == "cloudy") return Condition::cloudy;
    if (s == "night") return Condition::night;
    if (s == "sunny") return Condition::sunny;
    throw std::runtime_error("unknown lighting condition: " + s);
}

enum class SplitTag { baseline, validation, test, augmented };

struct ImageRecord {
    std::string id;    // unique within a manifest
    std::string path;
    std::string room;
    double x = 0.0;    // meters
    double y = 0.0;    // meters
    Condition condition = Condition::cloudy;
    std::optional<double> timestamp;  // trajectory ordering only, not persisted
};

struct Manifest {
    std::vector<std::string> rooms;  // sorted; position = class index
    std::vector<ImageRecord> records;
    SplitTag split_tag = SplitTag::baseline;

    int room_index(const std::string& room) const {
        auto it = std::lower_bound(rooms.begin(), rooms.end(), room);
        if (it == rooms.end() || *it != room) return -1;
        return static_cast<int>(it - rooms.begin());
    }

    void validate() const {
        if (std::set<std::string>(rooms.begin(), rooms.end()).size() != rooms.size())
            throw std::runtime_error("manifest room list has duplicates");
        std::set<std::string> ids;
        for (const auto& r : records) {
            if (!ids.insert(r.id).second)
                throw std::runtime_error("duplicate record id: " + r.id);
            if (room_index(r.room) < 0)
                throw std::runtime_error("record " + r.id + " references unknown room " + r.room);
            if (!std::isfinite(r.x) || !std::isfinite(r.y))
                throw std::runtime_error("record " + r.id + " has non-finite pose");
        }
    }
};

// On-disk corpus layout: one directory per room under the root, each with a
// poses.csv sidecar (filename,x,y) next to its images. The capture condition
// comes from the layout: a fixed override, else a cloudy/night/sunny token
// in the filename, else the fallback.
struct IngestLayout {
    std::optional<Condition> condition;
    Condition fallback = Condition::cloudy;
    std::string pose_sidecar = "poses.csv";
};

namespace detail_dataset {

inline bool has_image_extension(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e == ".png" || e == ".jpg" || e == ".jpeg";
}

// COLD-style stems start with t<epoch-seconds>; used only to order a room's
// trajectory when present for every file in the room.
inline std::optional<double> parse_stem_timestamp(const std::string& stem) {
    if (stem.size() < 2 || stem[0] != 't' || !std::isdigit(static_cast<unsigned char>(stem[1])))
        return std::nullopt;
    std::size_t end = 1;
    bool dot = false;
    while (end < stem.size() &&
           (std::isdigit(static_cast<unsigned char>(stem[end])) || (!dot && stem[end] == '.'))) {
        if (stem[end] == '.') dot = true;
        ++end;
    }
    try {
        return std::stod(stem.substr(1, end - 1));
    } catch (...) {
        return std::nullopt;
    }
}

inline Condition condition_for(const std::string& stem, const IngestLayout& layout) {
    if (layout.condition) return *layout.condition;
    if (stem.find("cloudy") != std::string::npos) return Condition::cloudy;
    if (stem.find("night") != std::string::npos) return Condition::night;
    if (stem.find("sunny") != std::string::npos) return Condition::sunny;
    return layout.fallback;
}

inline std::map<std::string, std::pair<double, double>> load_pose_sidecar(const fs::path& file) {
    std::map<std::string, std::pair<double, double>> poses;
    auto lines = hloc::detail::read_lines(file.string());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto f = hloc::detail::csv_split(lines[i]);
        if (i == 0 && !f.empty() && f[0] == "filename") continue;  // optional header
        if (f.size() != 3)
            throw std::runtime_error("malformed pose row in " + file.string() + ": " + lines[i]);
        double x = hloc::detail::parse_double(f[1], file.string());
        double y = hloc::detail::parse_double(f[2], file.string());
        if (!std::isfinite(x) || !std::isfinite(y))
            throw std::runtime_error("non-finite pose for " + f[0] + " in " + file.string());
        poses[f[0]] = {x, y};
    }
    return poses;
}

}  // namespace detail_dataset

// Scans root (one subdirectory per room), pairs every image with its sidecar
// pose, and returns records grouped by room in sorted-room order, trajectory
// order within each room. Pure function of the directory contents.
inline Manifest ingest(const fs::path& root, const IngestLayout& layout = {}) {
    if (!fs::exists(root) || !fs::is_directory(root))
        throw std::runtime_error("corpus root does not exist: " + root.string());

    std::vector<std::string> room_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && entry.path().filename().string()[0] != '.')
            room_dirs.push_back(entry.path().filename().string());
    }
    std::sort(room_dirs.begin(), room_dirs.end());

    Manifest m;
    m.split_tag = SplitTag::baseline;
    for (const auto& room : room_dirs) {
        fs::path dir = root / room;
        std::vector<fs::path> images;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file() && detail_dataset::has_image_extension(entry.path()))
                images.push_back(entry.path());
        }
        if (images.empty()) continue;

        fs::path sidecar = dir / layout.pose_sidecar;
        if (!fs::exists(sidecar))
            throw std::runtime_error("missing pose sidecar " + sidecar.string() +
                                     " for room " + room);
        auto poses = detail_dataset::load_pose_sidecar(sidecar);

        struct Item {
            ImageRecord rec;
            std::string filename;
        };
        std::vector<Item> items;
        bool all_timestamped = true;
        for (const auto& img : images) {
            std::string filename = img.filename().string();
            auto it = poses.find(filename);
            if (it == poses.end())
                throw std::runtime_error("no pose for image " + img.string() + " in " +
                                         sidecar.string());
            if (sniff_image(img.string()) == ImageFormat::unknown)
                throw std::runtime_error("unreadable image (not PNG/JPEG): " + img.string());
            std::string stem = img.stem().string();
            ImageRecord rec;
            rec.id = room + "/" + stem;
            rec.path = img.string();
            rec.room = room;
            rec.x = it->second.first;
            rec.y = it->second.second;
            rec.condition = detail_dataset::condition_for(stem, layout);
            rec.timestamp = detail_dataset::parse_stem_timestamp(stem);
            all_timestamped = all_timestamped && rec.timestamp.has_value();
            items.push_back({std::move(rec), filename});
        }
        // Trajectory order: timestamps when the whole room has them, else
        // lexicographic filename (COLD filenames encode capture time).
        std::sort(items.begin(), items.end(), [&](const Item& a, const Item& b) {
            if (all_timestamped && *a.rec.timestamp != *b.rec.timestamp)
                return *a.rec.timestamp < *b.rec.timestamp;
            return a.filename < b.filename;
        });
        m.rooms.push_back(room);
        for (auto& item : items) m.records.push_back(std::move(item.rec));
    }
    if (m.records.empty()) throw std::runtime_error("no records found under " + root.string());
    m.validate();
    return m;
}

namespace detail_dataset {

inline double pose_distance(const ImageRecord& a, const ImageRecord& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

// Greedy keep-first pass per room: keep a record iff it lies >= spacing
// from the last kept one.
inline std::vector<const ImageRecord*> greedy_keep(const std::vector<const ImageRecord*>& room,
                                                   double spacing) {
    std::vector<const ImageRecord*> kept;
    for (const ImageRecord* r : room) {
        if (kept.empty() || pose_distance(*kept.back(), *r) >= spacing)
            kept.push_back(r);
    }
    return kept;
}

inline std::vector<std::vector<const ImageRecord*>> group_by_room(const Manifest& m) {
    std::vector<std::vector<const ImageRecord*>> groups(m.rooms.size());
    for (const auto& r : m.records) groups[static_cast<std::size_t>(m.room_index(r.room))].push_back(&r);
    return groups;
}

}  // namespace detail_dataset

inline Manifest downsample_by_distance(const Manifest& m, double spacing) {
    if (!(spacing > 0.0)) throw std::invalid_argument("spacing must be > 0");
    Manifest out;
    out.rooms = m.rooms;
    out.split_tag = m.split_tag;
    for (const auto& room : detail_dataset::group_by_room(m))
        for (const ImageRecord* r : detail_dataset::greedy_keep(room, spacing))
            out.records.push_back(*r);
    return out;
}

// Splits at half spacing and deals kept records alternately, first to train,
// so both splits cover the trajectory uniformly and per-room counts differ
// by at most one. Union of the two outputs equals the half-spacing
// downsample; intersection is empty.
inline std::pair<Manifest, Manifest> interleave_validation(const Manifest& m, double spacing) {
    if (!(spacing > 0.0)) throw std::invalid_argument("spacing must be > 0");
    Manifest train, val;
    train.rooms = val.rooms = m.rooms;
    train.split_tag = SplitTag::baseline;
    val.split_tag = SplitTag::validation;
    for (const auto& room : detail_dataset::group_by_room(m)) {
        auto kept = detail_dataset::greedy_keep(room, spacing / 2.0);
        for (std::size_t i = 0; i < kept.size(); ++i)
            ((i % 2 == 0) ? train : val).records.push_back(*kept[i]);
    }
    return {std::move(train), std::move(val)};
}

inline std::map<std::string, std::size_t> room_histogram(const Manifest& m) {
    std::map<std::string, std::size_t> hist;
    for (const auto& room : m.rooms) hist[room] = 0;
    for (const auto& r : m.records) ++hist[r.room];
    return hist;
}

// Manifest file: UTF-8 CSV, header id,path,room,x,y,condition. Poses are
// written with shortest round-trip formatting, so no precision is lost.
inline void save_manifest(const Manifest& m, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest " + path.string());
    out << "id,path,room,x,y,condition\n";
    for (const auto& r : m.records) {
        out << detail::csv_escape(r.id) << ',' << detail::csv_escape(r.path) << ','
            << detail::csv_escape(r.room) << ',' << detail::format_double(r.x) << ','
            << detail::format_double(r.y) << ',' << to_string(r.condition) << '\n';
    }
    if (!out) throw std::runtime_error("write failed for manifest " + path.string());
}

inline Manifest load_manifest(const fs::path& path, SplitTag tag = SplitTag::baseline) {
    auto lines = detail::read_lines(path.string());
    if (lines.empty() || lines[0] != "id,path,room,x,y,condition")
        throw std::runtime_error("bad manifest header in " + path.string());
    Manifest m;
    m.split_tag = tag;
    std::set<std::string> rooms;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto f = detail::csv_split(lines[i]);
        if (f.size() != 6)
            throw std::runtime_error("malformed manifest row in " + path.string() + ": " + lines[i]);
        ImageRecord r;
        r.id = f[0];
        r.path = f[1];
        r.room = f[2];
        r.x = detail::parse_double(f[3], path.string());
        r.y = detail::parse_double(f[4], path.string());
        r.condition = parse_condition(f[5]);
        rooms.insert(r.room);
        m.records.push_back(std::move(r));
    }
    m.rooms.assign(rooms.begin(), rooms.end());
    m.validate();
    return m;
}

}  // namespace hloc
