#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "hloc/dataset.hpp"
#include "hloc/detail/parallel.hpp"
#include "hloc/detail/rng.hpp"
#include "hloc/image.hpp"
#include "hloc/image_io.hpp"

namespace hloc {

enum class Effect { spotlight, shadow, brightness, darkness, contrast, saturation, rotation };

// Parameter grids for every effect. Spotlight/shadow magnitudes run from
// 160 (level 1) to 100 (level 5); bulbs span 15..40 px diameters. Contrast
// and saturation factors straddle 1 so both directions occur.
struct EffectGrid {
    static constexpr std::array<int, 5> spot_deltas{160, 145, 130, 115, 100};
    static constexpr int min_diameter = 15;
    static constexpr int max_diameter = 40;
    static constexpr std::array<double, 3> brightness_gammas{0.8, 0.6, 0.4};
    static constexpr std::array<double, 3> darkness_gammas{1.25, 1.67, 2.5};
    static constexpr std::array<double, 5> contrast_factors{0.4, 0.7, 1.3, 1.6, 2.0};
    static constexpr std::array<double, 5> saturation_factors{0.2, 0.6, 1.4, 1.8, 2.2};
    static constexpr int rotation_step_degrees = 10;
    static constexpr int rotation_levels = 35;
};

inline int level_count(Effect e) {
    switch (e) {
        case Effect::spotlight:
        case Effect::shadow:
        case Effect::contrast:
        case Effect::saturation: return 5;
        case Effect::brightness:
        case Effect::darkness: return 3;
        default: return EffectGrid::rotation_levels;
    }
}

namespace detail_augment {

inline void check_level(Effect e, int level) {
    if (level < 1 || level > level_count(e))
        throw std::invalid_argument("effect level out of range: " + std::to_string(level));
}

// One bulb per image: integer center (cyclic in x) and integer diameter,
// linear intensity falloff from the full delta at the center to zero at the
// rim. The per-pixel delta is rounded once, then applied with clamp_add, so
// spotlight and shadow are exact mirrors of each other.
inline Panorama apply_disk(const Panorama& p, int level, std::uint64_t seed, int sign) {
    detail::SplitMix64 rng(seed);
    const int cx = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(p.width)));
    const int cy = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(p.height)));
    const int diameter = static_cast<int>(
        rng.next_in(EffectGrid::min_diameter, EffectGrid::max_diameter));
    const double radius = diameter / 2.0;
    const int delta = sign * EffectGrid::spot_deltas[static_cast<std::size_t>(level - 1)];

    Panorama out = p;
    for (int y = 0; y < p.height; ++y) {
        double dy = y - cy;
        for (int x = 0; x < p.width; ++x) {
            int dx_abs = std::abs(x - cx);
            double dx = std::min(dx_abs, p.width - dx_abs);  // cyclic in x
            double r = std::sqrt(dx * dx + dy * dy);
            if (r > radius) continue;
            int d = static_cast<int>(round_half_even(delta * (1.0 - r / radius)));
            if (d == 0) continue;
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = clamp_add(p.at(x, y, c), d);
        }
    }
    return out;
}

}  // namespace detail_augment

inline Panorama apply_spotlight(const Panorama& p, int level, std::uint64_t seed) {
    detail_augment::check_level(Effect::spotlight, level);
    return detail_augment::apply_disk(p, level, seed, +1);
}

inline Panorama apply_shadow(const Panorama& p, int level, std::uint64_t seed) {
    detail_augment::check_level(Effect::shadow, level);
    return detail_augment::apply_disk(p, level, seed, -1);
}

// Endpoint-preserving gamma map; gamma < 1 lifts low intensities most
// (brightness), gamma > 1 drops high intensities most (darkness).
inline std::uint8_t gamma_curve(std::uint8_t v, double gamma) {
    return quantize_u8(255.0 * std::pow(v / 255.0, gamma));
}

namespace detail_augment {

inline Panorama apply_gamma(const Panorama& p, double gamma) {
    // 256-entry LUT: the map is per-channel-value only.
    std::array<std::uint8_t, 256> lut;
    for (int v = 0; v < 256; ++v) lut[static_cast<std::size_t>(v)] = gamma_curve(static_cast<std::uint8_t>(v), gamma);
    Panorama out = p;
    for (auto& px : out.pixels) px = lut[px];
    return out;
}

}  // namespace detail_augment

inline Panorama apply_brightness(const Panorama& p, int level) {
    detail_augment::check_level(Effect::brightness, level);
    return detail_augment::apply_gamma(p, EffectGrid::brightness_gammas[static_cast<std::size_t>(level - 1)]);
}

inline Panorama apply_darkness(const Panorama& p, int level) {
    detail_augment::check_level(Effect::darkness, level);
    return detail_augment::apply_gamma(p, EffectGrid::darkness_gammas[static_cast<std::size_t>(level - 1)]);
}

// I_s = 64 + c*(I - 64), clamped; 64 is the fixed point, c = 1 the identity.
inline std::uint8_t contrast_curve(std::uint8_t v, double c) {
    return quantize_u8(64.0 + c * (v - 64.0));
}

inline Panorama apply_contrast(const Panorama& p, int level) {
    detail_augment::check_level(Effect::contrast, level);
    double c = EffectGrid::contrast_factors[static_cast<std::size_t>(level - 1)];
    std::array<std::uint8_t, 256> lut;
    for (int v = 0; v < 256; ++v) lut[static_cast<std::size_t>(v)] = contrast_curve(static_cast<std::uint8_t>(v), c);
    Panorama out = p;
    for (auto& px : out.pixels) px = lut[px];
    return out;
}

// RGB -> HSV, S' = min(1, s*S), HSV -> RGB, per pixel.
inline Panorama apply_saturation_factor(const Panorama& p, double s) {
    Panorama out = p;
    for (std::size_t i = 0; i < p.pixels.size(); i += 3) {
        Hsv hsv = rgb_to_hsv(p.pixels[i], p.pixels[i + 1], p.pixels[i + 2]);
        hsv.s = std::min(1.0, hsv.s * s);
        auto rgb = hsv_to_rgb(hsv);
        out.pixels[i] = rgb[0];
        out.pixels[i + 1] = rgb[1];
        out.pixels[i + 2] = rgb[2];
    }
    return out;
}

inline Panorama apply_saturation(const Panorama& p, int level) {
    detail_augment::check_level(Effect::saturation, level);
    return apply_saturation_factor(p, EffectGrid::saturation_factors[static_cast<std::size_t>(level - 1)]);
}

// Rotation by level*10 degrees of platform yaw = circular column shift.
inline int rotation_shift_columns(int width, int level) {
    double degrees = level * static_cast<double>(EffectGrid::rotation_step_degrees);
    return static_cast<int>(std::llround(width * degrees / 360.0));
}

inline Panorama apply_rotation(const Panorama& p, int level) {
    if (level < 1 || level > EffectGrid::rotation_levels)
        throw std::invalid_argument("rotation level out of range: " + std::to_string(level));
    return circular_shift(p, rotation_shift_columns(p.width, level));
}

// The six augmented-dataset recipes: each writes the original plus every
// grid level, multiplying per-room counts by 6/6/7/6/6/36.
enum class Recipe { spotlight, shadow, brightdark, contrast, saturation, rotation };

inline const char* to_string(Recipe r) {
    switch (r) {
        case Recipe::spotlight: return "spotlight";
        case Recipe::shadow: return "shadow";
        case Recipe::brightdark: return "brightdark";
        case Recipe::contrast: return "contrast";
        case Recipe::saturation: return "saturation";
        default: return "rotation";
    }
}

inline Recipe parse_recipe(const std::string& s) {
    for (Recipe r : {Recipe::spotlight, Recipe::shadow, Recipe::brightdark, Recipe::contrast,
                     Recipe::saturation, Recipe::rotation})
        if (s == to_string(r)) return r;
    throw std::runtime_error("unknown augmentation recipe: " + s);
}

namespace detail_augment {

struct Variant {
    Effect effect;
    int level;
    std::string tag;
};

inline std::vector<Variant> recipe_variants(Recipe r, int rotation_levels) {
    std::vector<Variant> v;
    auto add = [&](Effect e, const char* prefix, int count) {
        for (int level = 1; level <= count; ++level) {
            char tag[16];
            std::snprintf(tag, sizeof(tag), "%s%02d", prefix, level);
            v.push_back({e, level, tag});
        }
    };
    switch (r) {
        case Recipe::spotlight: add(Effect::spotlight, "spot", 5); break;
        case Recipe::shadow: add(Effect::shadow, "shad", 5); break;
        case Recipe::brightdark:
            add(Effect::brightness, "brt", 3);
            add(Effect::darkness, "drk", 3);
            break;
        case Recipe::contrast: add(Effect::contrast, "con", 5); break;
        case Recipe::saturation: add(Effect::saturation, "sat", 5); break;
        case Recipe::rotation:
            if (rotation_levels < 1 || rotation_levels > EffectGrid::rotation_levels)
                throw std::invalid_argument("rotation levels must be in 1..35");
            add(Effect::rotation, "rot", rotation_levels);
            break;
    }
    return v;
}

inline Panorama apply_variant(const Panorama& p, const Variant& v, std::uint64_t seed,
                              const std::string& image_id) {
    switch (v.effect) {
        case Effect::spotlight:
            return apply_spotlight(p, v.level,
                                   detail::derive_stream(seed, image_id, static_cast<std::uint64_t>(v.level)));
        case Effect::shadow:
            return apply_shadow(p, v.level,
                                detail::derive_stream(seed, image_id, static_cast<std::uint64_t>(v.level)));
        case Effect::brightness: return apply_brightness(p, v.level);
        case Effect::darkness: return apply_darkness(p, v.level);
        case Effect::contrast: return apply_contrast(p, v.level);
        case Effect::saturation: return apply_saturation(p, v.level);
        default: return apply_rotation(p, v.level);
    }
}

}  // namespace detail_augment

// Builds one augmented training dataset: for every source record, re-encodes
// the original and writes one PNG per grid level into out_dir/<room>/.
// Labels, poses and conditions are inherited. Deterministic given
// (manifest, recipe, seed); per-image RNG streams are derived from
// (seed, image id, level) so parallel generation is order-independent.
inline Manifest build_augmented_dataset(const Manifest& m, Recipe recipe, std::uint64_t seed,
                                        const fs::path& out_dir, int rotation_levels = 35) {
    auto variants = detail_augment::recipe_variants(recipe, rotation_levels);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    for (const auto& room : m.rooms) fs::create_directories(out_dir / room, ec);
    if (!fs::is_directory(out_dir))
        throw std::runtime_error("cannot create output directory " + out_dir.string());

    const std::size_t per_record = 1 + variants.size();
    std::vector<ImageRecord> out_records(m.records.size() * per_record);

    detail::parallel_for(m.records.size(), [&](std::size_t i) {
        const ImageRecord& src = m.records[i];
        Panorama img = load_image(src.path);
        std::string stem = fs::path(src.path).stem().string();

        auto emit = [&](std::size_t slot, const std::string& suffix, const Panorama& px) {
            fs::path file = out_dir / src.room /
                            (suffix.empty() ? stem + ".png" : stem + "__" + suffix + ".png");
            save_png(px, file.string());
            ImageRecord rec = src;
            rec.path = file.string();
            if (!suffix.empty()) rec.id = src.id + "__" + suffix;
            out_records[i * per_record + slot] = std::move(rec);
        };

        emit(0, "", img);
        for (std::size_t v = 0; v < variants.size(); ++v)
            emit(v + 1, variants[v].tag,
                 detail_augment::apply_variant(img, variants[v], seed, src.id));
    });

    Manifest out;
    out.rooms = m.rooms;
    out.split_tag = SplitTag::augmented;
    out.records = std::move(out_records);
    out.validate();
    return out;
}

}  // namespace hloc
