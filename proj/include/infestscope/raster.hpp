#pragma once

// Image container, binary portable-pixmap I/O (P5/P6) and the fixed-size
// tiling pipeline used to cut large orthomosaics into detector-sized tiles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace infestscope {

/// Row-major, channel-interleaved image. Intensities live in [0,1];
/// 8-bit samples map to v/255 on load and round(v*255) on save.
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 or 3
    std::vector<double> data;  // size = width*height*channels

    double& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool valid() const {
        if (width <= 0 || height <= 0) return false;
        if (channels != 1 && channels != 3) return false;
        if (data.size() != static_cast<std::size_t>(width) * height * channels) return false;
        for (double v : data)
            if (!(v >= 0.0 && v <= 1.0)) return false;
        return true;
    }
};

inline Raster make_raster(int width, int height, int channels, double fill = 0.0) {
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("raster dimensions must be positive");
    if (channels != 1 && channels != 3)
        throw std::invalid_argument("raster must have 1 or 3 channels");
    if (!(fill >= 0.0 && fill <= 1.0))
        throw std::invalid_argument("raster fill value must lie in [0,1]");
    Raster r;
    r.width = width;
    r.height = height;
    r.channels = channels;
    r.data.assign(static_cast<std::size_t>(width) * height * channels, fill);
    return r;
}

// ============================================================================
// Portable pixmap I/O (P5 grayscale / P6 color, 8-bit, maxval 255)
// ============================================================================

namespace detail {

inline int pnm_read_token(std::istream& in, std::string& tok) {
    tok.clear();
    int ch = in.get();
    // skip whitespace and '#' comments
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(ch)) {
            ch = in.get();
        } else {
            break;
        }
    }
    while (ch != EOF && !std::isspace(ch)) {
        tok.push_back(static_cast<char>(ch));
        ch = in.get();
    }
    return ch;  // the whitespace byte that terminated the token (or EOF)
}

inline int pnm_parse_int(const std::string& tok, const char* what) {
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
        throw std::runtime_error(std::string("malformed pnm header: bad ") + what);
    long v = std::stol(tok);
    if (v < 0 || v > 1'000'000'000)
        throw std::runtime_error(std::string("malformed pnm header: bad ") + what);
    return static_cast<int>(v);
}

}  // namespace detail

/// Reads a binary PGM (P5) or PPM (P6) file. Only 8-bit maxval-255 samples
/// are accepted; values are mapped to [0,1] by exact division by 255.
inline Raster load_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image file: " + path.string());

    std::string tok;
    detail::pnm_read_token(in, tok);
    int channels = 0;
    if (tok == "P5") channels = 1;
    else if (tok == "P6") channels = 3;
    else throw std::runtime_error("unsupported image format (need binary P5/P6): " + path.string());

    detail::pnm_read_token(in, tok);
    int width = detail::pnm_parse_int(tok, "width");
    detail::pnm_read_token(in, tok);
    int height = detail::pnm_parse_int(tok, "height");
    detail::pnm_read_token(in, tok);
    int maxval = detail::pnm_parse_int(tok, "maxval");
    if (width == 0 || height == 0)
        throw std::runtime_error("zero-dimension image: " + path.string());
    if (maxval != 255)
        throw std::runtime_error("unsupported bit depth (maxval must be 255): " + path.string());

    std::size_t count = static_cast<std::size_t>(width) * height * channels;
    std::vector<unsigned char> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count)
        throw std::runtime_error("truncated image data: " + path.string());

    Raster r;
    r.width = width;
    r.height = height;
    r.channels = channels;
    r.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) r.data[i] = raw[i] / 255.0;
    return r;
}

/// Writes P5 for 1-channel rasters, P6 for 3-channel. Quantization rule is
/// round(v*255), so a save/load round trip moves each sample by at most 1/510.
inline void save_image(const Raster& r, const std::filesystem::path& path) {
    if (!r.valid()) throw std::invalid_argument("cannot save invalid raster");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());

    out << (r.channels == 1 ? "P5" : "P6") << "\n"
        << r.width << " " << r.height << "\n255\n";
    std::vector<unsigned char> raw(r.data.size());
    for (std::size_t i = 0; i < r.data.size(); ++i) {
        long q = std::lround(r.data[i] * 255.0);
        raw[i] = static_cast<unsigned char>(std::clamp(q, 0L, 255L));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw std::runtime_error("failed writing image file: " + path.string());
}

// ============================================================================
// Tiling
// ============================================================================

/// Ceil-division tile cover of a source raster. Partial tiles at the right
/// and bottom edges are zero-padded; the pad amounts are recorded so the
/// cover can be reassembled losslessly. An optional overlap shrinks the
/// stride between tile origins (stride = tile_size - overlap).
struct TileGrid {
    int tile_size = 1024;
    int overlap = 0;
    int cols = 0;
    int rows = 0;
    int pad_right = 0;
    int pad_bottom = 0;

    struct Tile {
        int row = 0;
        int col = 0;
        Raster raster;
    };
    std::vector<Tile> tiles;  // row-major order

    int stride() const { return tile_size - overlap; }
    int source_width() const { return cols * stride() + overlap - pad_right; }
    int source_height() const { return rows * stride() + overlap - pad_bottom; }
};

inline TileGrid tile(const Raster& r, int tile_size, int overlap = 0) {
    if (!r.valid()) throw std::invalid_argument("tile: invalid raster");
    if (tile_size < 1) throw std::invalid_argument("tile: tile_size must be >= 1");
    if (overlap < 0 || overlap >= tile_size)
        throw std::invalid_argument("tile: overlap must lie in [0, tile_size)");

    const int stride = tile_size - overlap;
    auto cover = [&](int extent) {
        // smallest k with overlap + k*stride >= extent
        if (extent <= tile_size) return 1;
        return static_cast<int>((static_cast<long>(extent) - overlap + stride - 1) / stride);
    };

    TileGrid g;
    g.tile_size = tile_size;
    g.overlap = overlap;
    g.cols = cover(r.width);
    g.rows = cover(r.height);
    g.pad_right = g.cols * stride + overlap - r.width;
    g.pad_bottom = g.rows * stride + overlap - r.height;
    g.tiles.reserve(static_cast<std::size_t>(g.cols) * g.rows);

    for (int row = 0; row < g.rows; ++row) {
        for (int col = 0; col < g.cols; ++col) {
            Raster t = make_raster(tile_size, tile_size, r.channels, 0.0);
            const int x0 = col * stride;
            const int y0 = row * stride;
            const int w = std::min(tile_size, r.width - x0);
            const int h = std::min(tile_size, r.height - y0);
            for (int y = 0; y < h; ++y) {
                const double* src = &r.data[(static_cast<std::size_t>(y0 + y) * r.width + x0) * r.channels];
                double* dst = &t.data[static_cast<std::size_t>(y) * tile_size * r.channels];
                std::copy(src, src + static_cast<std::size_t>(w) * r.channels, dst);
            }
            g.tiles.push_back({row, col, std::move(t)});
        }
    }
    return g;
}

/// Inverse of tile(): reassembles the source raster and drops the recorded
/// padding. Overlapping regions are taken from the first covering tile.
inline Raster untile(const TileGrid& g) {
    if (g.cols < 1 || g.rows < 1 || g.tile_size < 1)
        throw std::invalid_argument("untile: malformed grid");
    const std::size_t expected = static_cast<std::size_t>(g.cols) * g.rows;
    if (g.tiles.size() != expected)
        throw std::invalid_argument("untile: grid is missing tiles");

    std::vector<const Raster*> slot(expected, nullptr);
    int channels = 0;
    for (const auto& t : g.tiles) {
        if (t.row < 0 || t.row >= g.rows || t.col < 0 || t.col >= g.cols)
            throw std::invalid_argument("untile: tile index out of range");
        std::size_t idx = static_cast<std::size_t>(t.row) * g.cols + t.col;
        if (slot[idx]) throw std::invalid_argument("untile: duplicate tile");
        if (t.raster.width != g.tile_size || t.raster.height != g.tile_size)
            throw std::invalid_argument("untile: inconsistent tile size");
        if (channels == 0) channels = t.raster.channels;
        else if (t.raster.channels != channels)
            throw std::invalid_argument("untile: inconsistent tile channels");
        slot[idx] = &t.raster;
    }
    for (const Raster* p : slot)
        if (!p) throw std::invalid_argument("untile: grid is missing tiles");

    const int stride = g.stride();
    const int W = g.source_width();
    const int H = g.source_height();
    if (W <= 0 || H <= 0) throw std::invalid_argument("untile: malformed grid");

    Raster out = make_raster(W, H, channels, 0.0);
    for (int row = 0; row < g.rows; ++row) {
        const int y0 = row * stride;
        const int y1 = (row == g.rows - 1) ? H : std::min(H, y0 + stride);
        for (int col = 0; col < g.cols; ++col) {
            const Raster& t = *slot[static_cast<std::size_t>(row) * g.cols + col];
            const int x0 = col * stride;
            const int x1 = (col == g.cols - 1) ? W : std::min(W, x0 + stride);
            if (x1 <= x0 || y1 <= y0) continue;
            for (int y = y0; y < y1; ++y) {
                const double* src = &t.data[(static_cast<std::size_t>(y - y0) * g.tile_size) * channels];
                double* dst = &out.data[(static_cast<std::size_t>(y) * W + x0) * channels];
                std::copy(src, src + static_cast<std::size_t>(x1 - x0) * channels, dst);
            }
        }
    }
    return out;
}

}  // namespace infestscope
