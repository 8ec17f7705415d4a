#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "hloc/dataset.hpp"
#include "hloc/detail/binio.hpp"
#include "hloc/detail/parallel.hpp"
#include "hloc/image.hpp"
#include "hloc/image_io.hpp"

namespace hloc {

enum class DescriptorMethod { hog, blockmean, imported };

inline const char* to_string(DescriptorMethod m) {
    switch (m) {
        case DescriptorMethod::hog: return "hog";
        case DescriptorMethod::blockmean: return "blockmean";
        default: return "imported";
    }
}

// Holistic descriptor for one image; a stand-in for the flattened pooled
// activation of a CNN at desk scale.
struct Descriptor {
    std::string source_id;
    std::vector<float> values;
};

struct DescriptorSet {
    DescriptorMethod method = DescriptorMethod::imported;
    std::string method_name = "imported";  // verbatim label, survives round-trips
    std::string manifest_ref;
    std::size_t dim = 0;
    std::vector<Descriptor> rows;

    void append(Descriptor d) {
        if (!d.values.size()) throw std::runtime_error("empty descriptor for " + d.source_id);
        if (rows.empty() && dim == 0) dim = d.values.size();
        if (d.values.size() != dim)
            throw std::runtime_error("descriptor dim mismatch for " + d.source_id + ": " +
                                     std::to_string(d.values.size()) + " vs " +
                                     std::to_string(dim));
        for (float v : d.values)
            if (!std::isfinite(v))
                throw std::runtime_error("non-finite descriptor component in " + d.source_id);
        rows.push_back(std::move(d));
    }
};

namespace detail_descriptor {

inline double gray_at(const Panorama& p, int x, int y) {
    std::size_t o = p.offset(x, y);
    return (p.pixels[o] + p.pixels[o + 1] + p.pixels[o + 2]) / 3.0;
}

}  // namespace detail_descriptor

// Histogram of oriented gradients over the whole panorama. Gradients wrap
// across the seam horizontally and clamp vertically. Orientation is the
// unsigned *edge* direction in [0,180): a vertical step edge lands in the
// 90-degree bin. Cells are normalized in non-overlapping 2x2-cell tiles,
// so m = (W/cell)*(H/cell)*bins.
inline Descriptor describe_hog(const Panorama& p, const std::string& id, int cell = 16,
                               int bins = 8) {
    if (cell < 1 || bins < 1) throw std::invalid_argument("hog cell and bins must be >= 1");
    if (p.width % cell != 0 || p.height % cell != 0)
        throw std::invalid_argument("image dims must be divisible by the hog cell size");

    const int cx_count = p.width / cell;
    const int cy_count = p.height / cell;
    const double bin_width = 180.0 / bins;

    std::vector<double> hist(static_cast<std::size_t>(cx_count) * cy_count * bins, 0.0);
    for (int y = 0; y < p.height; ++y) {
        int yu = (y + 1 < p.height) ? y + 1 : p.height - 1;
        int yd = (y > 0) ? y - 1 : 0;
        for (int x = 0; x < p.width; ++x) {
            int xr = (x + 1) % p.width;
            int xl = (x - 1 + p.width) % p.width;
            double gx = detail_descriptor::gray_at(p, xr, y) - detail_descriptor::gray_at(p, xl, y);
            double gy = detail_descriptor::gray_at(p, x, yu) - detail_descriptor::gray_at(p, x, yd);
            double mag = std::sqrt(gx * gx + gy * gy);
            if (mag == 0.0) continue;
            double theta = std::atan2(gy, gx) * 180.0 / M_PI + 90.0;  // edge orientation
            theta = std::fmod(theta, 180.0);
            if (theta < 0.0) theta += 180.0;
            int b = static_cast<int>(theta / bin_width);
            if (b >= bins) b = bins - 1;
            std::size_t idx =
                (static_cast<std::size_t>(y / cell) * cx_count + static_cast<std::size_t>(x / cell)) * bins +
                static_cast<std::size_t>(b);
            hist[idx] += mag;
        }
    }

    // L2 normalization per tile; an all-zero tile stays zero.
    Descriptor d;
    d.source_id = id;
    d.values.assign(hist.size(), 0.0f);
    for (int ty = 0; ty < cy_count; ty += 2) {
        for (int tx = 0; tx < cx_count; tx += 2) {
            double sq = 0.0;
            for (int cy = ty; cy < std::min(ty + 2, cy_count); ++cy)
                for (int cx = tx; cx < std::min(tx + 2, cx_count); ++cx)
                    for (int b = 0; b < bins; ++b) {
                        double v = hist[(static_cast<std::size_t>(cy) * cx_count + cx) * bins + b];
                        sq += v * v;
                    }
            double norm = std::sqrt(sq);
            if (norm == 0.0) continue;
            for (int cy = ty; cy < std::min(ty + 2, cy_count); ++cy)
                for (int cx = tx; cx < std::min(tx + 2, cx_count); ++cx)
                    for (int b = 0; b < bins; ++b) {
                        std::size_t idx = (static_cast<std::size_t>(cy) * cx_count + cx) * bins + b;
                        d.values[idx] = static_cast<float>(hist[idx] / norm);
                    }
        }
    }
    return d;
}

// Per-block per-channel means scaled to [0,1]; m = 3*gw*gh. Blocks are laid
// out row-major, channels innermost.
inline Descriptor describe_blockmean(const Panorama& p, const std::string& id, int gw, int gh) {
    if (gw < 1 || gh < 1) throw std::invalid_argument("block grid must be >= 1");
    if (gw > p.width || gh > p.height)
        throw std::invalid_argument("block grid exceeds image dims");

    Descriptor d;
    d.source_id = id;
    d.values.reserve(static_cast<std::size_t>(gw) * gh * 3);
    for (int by = 0; by < gh; ++by) {
        int y0 = by * p.height / gh;
        int y1 = (by + 1) * p.height / gh;
        for (int bx = 0; bx < gw; ++bx) {
            int x0 = bx * p.width / gw;
            int x1 = (bx + 1) * p.width / gw;
            double sum[3] = {0, 0, 0};
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x)
                    for (int c = 0; c < 3; ++c) sum[c] += p.at(x, y, c);
            double count = static_cast<double>(y1 - y0) * (x1 - x0);
            for (int c = 0; c < 3; ++c)
                d.values.push_back(static_cast<float>(sum[c] / count / 255.0));
        }
    }
    return d;
}

inline void l2_normalize(Descriptor& d) {
    double sq = 0.0;
    for (float v : d.values) sq += static_cast<double>(v) * v;
    double norm = std::sqrt(sq);
    if (norm == 0.0) return;
    for (float& v : d.values) v = static_cast<float>(v / norm);
}

// Descriptor interchange: binary values file (magic HLOC, version, count,
// dim, float32 row-major, little-endian) plus a JSON sidecar carrying the
// row ids. This is the boundary where externally computed CNN embeddings
// enter the pipeline.
inline constexpr char kDescriptorMagic[4] = {'H', 'L', 'O', 'C'};
inline constexpr std::uint32_t kDescriptorVersion = 1;

inline void save_descriptors(const DescriptorSet& ds, const fs::path& values_path,
                             const fs::path& sidecar_path) {
    detail::BinWriter w(values_path.string());
    w.bytes(kDescriptorMagic, 4);
    w.u32(kDescriptorVersion);
    w.u32(static_cast<std::uint32_t>(ds.rows.size()));
    w.u32(static_cast<std::uint32_t>(ds.dim));
    for (const auto& row : ds.rows) w.f32_array(row.values.data(), row.values.size());
    if (!w.out) throw std::runtime_error("write failed: " + values_path.string());

    nlohmann::json sidecar;
    sidecar["ids"] = nlohmann::json::array();
    for (const auto& row : ds.rows) sidecar["ids"].push_back(row.source_id);
    sidecar["method"] = ds.method_name;
    sidecar["manifest"] = ds.manifest_ref;
    std::ofstream out(sidecar_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + sidecar_path.string());
    out << sidecar.dump(2) << '\n';
}

inline DescriptorSet load_descriptors(const fs::path& values_path, const fs::path& sidecar_path) {
    detail::BinReader r(values_path.string());
    char magic[4];
    r.bytes(magic, 4);
    if (std::string(magic, 4) != std::string(kDescriptorMagic, 4))
        throw std::runtime_error("bad magic in descriptor file " + values_path.string());
    std::uint32_t version = r.u32();
    if (version != kDescriptorVersion)
        throw std::runtime_error("unsupported descriptor file version " + std::to_string(version));
    std::uint32_t count = r.u32();
    std::uint32_t dim = r.u32();
    if (dim == 0) throw std::runtime_error("descriptor dim is zero in " + values_path.string());

    std::ifstream sc(sidecar_path, std::ios::binary);
    if (!sc) throw std::runtime_error("cannot open sidecar " + sidecar_path.string());
    nlohmann::json sidecar;
    try {
        sc >> sidecar;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed sidecar " + sidecar_path.string() + ": " + e.what());
    }
    if (!sidecar.contains("ids") || !sidecar["ids"].is_array())
        throw std::runtime_error("sidecar missing ids array: " + sidecar_path.string());
    if (sidecar["ids"].size() != count)
        throw std::runtime_error("sidecar id count " + std::to_string(sidecar["ids"].size()) +
                                 " does not match descriptor count " + std::to_string(count));

    DescriptorSet ds;
    ds.method_name = sidecar.value("method", "imported");
    if (ds.method_name == "hog")
        ds.method = DescriptorMethod::hog;
    else if (ds.method_name == "blockmean")
        ds.method = DescriptorMethod::blockmean;
    else
        ds.method = DescriptorMethod::imported;
    ds.manifest_ref = sidecar.value("manifest", "");
    ds.dim = dim;
    ds.rows.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        ds.rows[i].source_id = sidecar["ids"][i].get<std::string>();
        ds.rows[i].values.resize(dim);
        r.f32_array(ds.rows[i].values.data(), dim);
    }
    if (!r.at_eof())
        throw std::runtime_error("trailing bytes in descriptor file " + values_path.string());
    return ds;
}

// One-to-one id alignment against a manifest; throws naming the first
// mismatched id.
inline void align_with_manifest(const DescriptorSet& ds, const Manifest& m) {
    if (ds.rows.size() != m.records.size())
        throw std::runtime_error("descriptor set has " + std::to_string(ds.rows.size()) +
                                 " rows but manifest has " + std::to_string(m.records.size()));
    std::unordered_map<std::string, const ImageRecord*> by_id;
    for (const auto& rec : m.records) by_id[rec.id] = &rec;
    for (const auto& row : ds.rows)
        if (!by_id.count(row.source_id))
            throw std::runtime_error("descriptor id not in manifest: " + row.source_id);
}

struct DescribeOptions {
    DescriptorMethod method = DescriptorMethod::blockmean;
    int hog_cell = 16;
    int hog_bins = 8;
    int block_gw = 8;
    int block_gh = 4;
    int resize_width = 0;   // 0 = keep native dims
    int resize_height = 0;
    bool l2norm = false;    // raw Euclidean retrieval by default
};

// Extracts one descriptor per manifest record, in record order.
inline DescriptorSet describe_manifest(const Manifest& m, const DescribeOptions& opt,
                                       const std::string& manifest_ref = "") {
    if (m.records.empty()) throw std::runtime_error("cannot describe an empty manifest");
    std::vector<Descriptor> rows(m.records.size());
    detail::parallel_for(m.records.size(), [&](std::size_t i) {
        Panorama img = load_image(m.records[i].path);
        if (opt.resize_width > 0 && opt.resize_height > 0)
            img = resize(img, opt.resize_width, opt.resize_height);
        Descriptor d = (opt.method == DescriptorMethod::hog)
                           ? describe_hog(img, m.records[i].id, opt.hog_cell, opt.hog_bins)
                           : describe_blockmean(img, m.records[i].id, opt.block_gw, opt.block_gh);
        if (opt.l2norm) l2_normalize(d);
        rows[i] = std::move(d);
    });

    DescriptorSet ds;
    ds.method = opt.method;
    ds.method_name = to_string(opt.method);
    ds.manifest_ref = manifest_ref;
    for (auto& d : rows) ds.append(std::move(d));
    return ds;
}

}  // namespace hloc
