#pragma once

// Feature enhancement: the three disease-sensitive channels computed from an
// RGB raster (greenness index, Laplacian texture, green-blue index) and their
// assembly into a normalized three-channel feature raster (TOFI).

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "infestscope/raster.hpp"

namespace infestscope {

// Denominators below this are treated as zero and the index is defined as 0.
inline constexpr double kIndexEpsilon = 1e-8;

namespace detail {
inline void require_rgb(const Raster& r, const char* op) {
    if (!r.valid()) throw std::invalid_argument(std::string(op) + ": invalid raster");
    if (r.channels != 3) throw std::invalid_argument(std::string(op) + ": raster must have 3 channels");
}
}  // namespace detail

/// Visible-band difference vegetation index, (2G-R-B)/(2G+R+B), per pixel.
/// Output range is [-1,1]; pixels with a near-zero denominator map to 0.
inline std::vector<double> vdvi(const Raster& rgb) {
    detail::require_rgb(rgb, "vdvi");
    std::vector<double> out(static_cast<std::size_t>(rgb.width) * rgb.height);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double r = rgb.data[i * 3 + 0];
        const double g = rgb.data[i * 3 + 1];
        const double b = rgb.data[i * 3 + 2];
        const double den = 2.0 * g + r + b;
        out[i] = std::abs(den) < kIndexEpsilon ? 0.0 : (2.0 * g - r - b) / den;
    }
    return out;
}

/// Normalized green-blue difference index, (G-B)/(G+B), per pixel.
inline std::vector<double> ngbdi(const Raster& rgb) {
    detail::require_rgb(rgb, "ngbdi");
    std::vector<double> out(static_cast<std::size_t>(rgb.width) * rgb.height);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double g = rgb.data[i * 3 + 1];
        const double b = rgb.data[i * 3 + 2];
        const double den = g + b;
        out[i] = den < kIndexEpsilon ? 0.0 : (g - b) / den;
    }
    return out;
}

/// Absolute discrete Laplacian of the luminance image
/// (0.299R + 0.587G + 0.114B), 4-neighbor kernel, replicate border padding.
inline std::vector<double> laplacian_texture(const Raster& rgb) {
    detail::require_rgb(rgb, "laplacian_texture");
    const int w = rgb.width, h = rgb.height;
    std::vector<double> gray(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < gray.size(); ++i) {
        gray[i] = 0.299 * rgb.data[i * 3 + 0] + 0.587 * rgb.data[i * 3 + 1] +
                  0.114 * rgb.data[i * 3 + 2];
    }
    std::vector<double> out(gray.size());
    auto at = [&](int x, int y) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return gray[static_cast<std::size_t>(y) * w + x];
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double lap = at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1) -
                         4.0 * at(x, y);
            out[static_cast<std::size_t>(y) * w + x] = std::abs(lap);
        }
    }
    return out;
}

/// Normalization parameters applied to one TOFI channel.
struct NormMeta {
    double min = 0.0;
    double max = 1.0;
    std::optional<double> clip_percentile;  // set only for the texture channel
};

/// Three-channel enhanced feature raster: channel 0 = VDVI, channel 1 =
/// Laplacian texture, channel 2 = NGBDI, each stored in [0,1].
struct Tofi {
    Raster base;  // channels = 3, same spatial dims as the source
    std::array<NormMeta, 3> norm_meta;
};

inline constexpr double kTextureClipPercentile = 0.99;

/// Assembles the TOFI raster. The two indices are mapped from their analytic
/// [-1,1] range onto [0,1] by a fixed affine map so values are comparable
/// across tiles; the texture channel is clipped at its 99th percentile
/// (nearest-rank) and min-max scaled per image, since its range is unbounded.
inline Tofi build_tofi(const Raster& rgb) {
    detail::require_rgb(rgb, "build_tofi");
    const std::vector<double> v = vdvi(rgb);
    const std::vector<double> t = laplacian_texture(rgb);
    const std::vector<double> n = ngbdi(rgb);

    // nearest-rank percentile of the texture values
    std::vector<double> sorted(t);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t count = sorted.size();
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(kTextureClipPercentile * static_cast<double>(count)));
    rank = std::clamp<std::size_t>(rank, 1, count);
    const double clip = sorted[rank - 1];
    const double lo = sorted.front();
    const double hi = std::min(sorted.back(), clip);
    const double span = hi - lo;

    Tofi tofi;
    tofi.base = make_raster(rgb.width, rgb.height, 3, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        tofi.base.data[i * 3 + 0] = (v[i] + 1.0) / 2.0;
        const double tc = std::min(t[i], clip);
        tofi.base.data[i * 3 + 1] = span > 0.0 ? (tc - lo) / span : 0.0;
        tofi.base.data[i * 3 + 2] = (n[i] + 1.0) / 2.0;
    }
    tofi.norm_meta[0] = {-1.0, 1.0, std::nullopt};
    tofi.norm_meta[1] = {lo, hi, kTextureClipPercentile};
    tofi.norm_meta[2] = {-1.0, 1.0, std::nullopt};
    return tofi;
}

}  // namespace infestscope
