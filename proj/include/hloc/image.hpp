#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace hloc {

// 8-bit RGB panorama. The horizontal axis is cyclic: column 0 and column
// width-1 are physically adjacent (360 degree field of view), so every
// horizontal access wraps mod width.
struct Panorama {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, RGB interleaved

    Panorama() = default;
    Panorama(int w, int h) : width(w), height(h) {
        if (w < 1 || h < 1) throw std::invalid_argument("panorama dims must be >= 1");
        pixels.assign(static_cast<std::size_t>(w) * h * 3, 0);
    }

    static Panorama filled(int w, int h, std::array<std::uint8_t, 3> rgb) {
        Panorama p(w, h);
        for (std::size_t i = 0; i < p.pixels.size(); i += 3) {
            p.pixels[i] = rgb[0];
            p.pixels[i + 1] = rgb[1];
            p.pixels[i + 2] = rgb[2];
        }
        return p;
    }

    std::size_t offset(int x, int y) const {
        return (static_cast<std::size_t>(y) * width + x) * 3;
    }
    std::uint8_t at(int x, int y, int c) const { return pixels[offset(x, y) + c]; }
    std::uint8_t& at(int x, int y, int c) { return pixels[offset(x, y) + c]; }

    // Horizontal wraparound access; y is the caller's responsibility.
    std::uint8_t at_wrapped(int x, int y, int c) const {
        x %= width;
        if (x < 0) x += width;
        return at(x, y, c);
    }

    bool same_dims(const Panorama& o) const {
        return width == o.width && height == o.height;
    }
    bool operator==(const Panorama& o) const {
        return same_dims(o) && pixels == o.pixels;
    }
};

// Round half to even. Storage is 8-bit, intermediate math is float; this is
// the single write-back rounding used everywhere so goldens stay pixel-exact.
inline long round_half_even(double x) {
    double f = std::floor(x);
    double frac = x - f;
    long v = static_cast<long>(f);
    if (frac > 0.5)
        ++v;
    else if (frac == 0.5 && (v & 1))
        ++v;
    return v;
}

inline std::uint8_t quantize_u8(double x) {
    if (x <= 0.0) return 0;
    if (x >= 255.0) return 255;
    return static_cast<std::uint8_t>(round_half_even(x));
}

inline std::uint8_t clamp_add(std::uint8_t v, int delta) {
    int r = static_cast<int>(v) + delta;
    if (r < 0) return 0;
    if (r > 255) return 255;
    return static_cast<std::uint8_t>(r);
}

struct Hsv {
    double h;  // degrees, [0, 360)
    double s;  // [0, 1]
    double v;  // [0, 1]
};

// Standard hexcone model.
inline Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
    double mx = std::max(r, std::max(g, b));
    double mn = std::min(r, std::min(g, b));
    double delta = mx - mn;
    Hsv out{0.0, 0.0, mx};
    if (delta > 0.0) {
        if (mx == r)
            out.h = 60.0 * ((g - b) / delta);
        else if (mx == g)
            out.h = 60.0 * (2.0 + (b - r) / delta);
        else
            out.h = 60.0 * (4.0 + (r - g) / delta);
        if (out.h < 0.0) out.h += 360.0;
        if (out.h >= 360.0) out.h -= 360.0;
    }
    if (mx > 0.0) out.s = delta / mx;
    return out;
}

inline std::array<std::uint8_t, 3> hsv_to_rgb(const Hsv& hsv) {
    double h = hsv.h, s = hsv.s, v = hsv.v;
    if (s <= 0.0) {
        std::uint8_t g = quantize_u8(v * 255.0);
        return {g, g, g};
    }
    h /= 60.0;
    int sector = static_cast<int>(std::floor(h)) % 6;
    if (sector < 0) sector += 6;
    double f = h - std::floor(h);
    double p = v * (1.0 - s);
    double q = v * (1.0 - s * f);
    double t = v * (1.0 - s * (1.0 - f));
    double r, g, b;
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    return {quantize_u8(r * 255.0), quantize_u8(g * 255.0), quantize_u8(b * 255.0)};
}

// Bilinear resize that treats the panorama as samples of a signal periodic
// in x: output column j reads input phase j*w_in/w_out, wrapping at the
// seam. Vertical neighbors clamp at the borders.
inline Panorama resize(const Panorama& p, int w, int h) {
    if (w < 1 || h < 1) throw std::invalid_argument("resize dims must be >= 1");
    if (w == p.width && h == p.height) return p;

    Panorama out(w, h);
    const double sx = static_cast<double>(p.width) / w;
    const double sy = static_cast<double>(p.height) / h;
    for (int y = 0; y < h; ++y) {
        double yf = y * sy;
        int y0 = static_cast<int>(std::floor(yf));
        if (y0 > p.height - 1) y0 = p.height - 1;
        int y1 = (y0 + 1 < p.height) ? y0 + 1 : p.height - 1;
        double fy = yf - y0;
        for (int x = 0; x < w; ++x) {
            double xf = x * sx;
            int x0 = static_cast<int>(std::floor(xf));
            double fx = xf - x0;
            x0 %= p.width;
            int x1 = (x0 + 1) % p.width;
            for (int c = 0; c < 3; ++c) {
                double v00 = p.at(x0, y0, c), v10 = p.at(x1, y0, c);
                double v01 = p.at(x0, y1, c), v11 = p.at(x1, y1, c);
                double v = (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 +
                           (1 - fx) * fy * v01 + fx * fy * v11;
                out.at(x, y, c) = quantize_u8(v);
            }
        }
    }
    return out;
}

// Lossless cyclic column shift: out(x) = in(x + cols mod width). For a 360
// degree panorama this is exactly a platform yaw.
inline Panorama circular_shift(const Panorama& p, int cols) {
    int s = cols % p.width;
    if (s < 0) s += p.width;
    if (s == 0) return p;
    Panorama out(p.width, p.height);
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            int src = x + s;
            if (src >= p.width) src -= p.width;
            std::size_t d = out.offset(x, y), o = p.offset(src, y);
            out.pixels[d] = p.pixels[o];
            out.pixels[d + 1] = p.pixels[o + 1];
            out.pixels[d + 2] = p.pixels[o + 2];
        }
    }
    return out;
}

}  // namespace hloc
