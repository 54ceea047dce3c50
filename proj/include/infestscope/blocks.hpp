#pragma once

// Framework-free forward passes for the two fusion blocks: adaptive
// multi-scale fusion (per-pixel 1x1 channel projections blended by
// softmax-normalized scalar weights) and efficient channel attention
// (global average pool -> circular 1-D convolution over channels ->
// sigmoid gate). Forward-only; parameters are supplied externally.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace infestscope {

/// Planar feature tensor, data layout [channel][row][column].
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;  // size = channels*height*width

    double& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }

    bool valid() const {
        return channels > 0 && height > 0 && width > 0 &&
               data.size() == static_cast<std::size_t>(channels) * height * width;
    }
};

inline FeatureMap make_feature_map(int channels, int height, int width, double fill = 0.0) {
    if (channels <= 0 || height <= 0 || width <= 0)
        throw std::invalid_argument("feature map dimensions must be positive");
    FeatureMap f;
    f.channels = channels;
    f.height = height;
    f.width = width;
    f.data.assign(static_cast<std::size_t>(channels) * height * width, fill);
    return f;
}

/// Dense row-major matrix, used for the 1x1 projection weights.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // size = rows*cols

    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
};

inline Matrix identity_matrix(int n) {
    Matrix m;
    m.rows = m.cols = n;
    m.data.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

// ============================================================================
// AMFM
// ============================================================================

/// Parameters of the fusion block: one projection matrix per branch (the 1x1
/// convolutions) and a pair of learnable scalar logits.
struct AmfmParams {
    Matrix proj_rgb;   // C_out x C_rgb
    Matrix proj_fem;   // C_out x C_fem
    double logit_rgb = 0.0;
    double logit_fem = 0.0;
};

/// Numerically stable two-way softmax; weights are strictly positive and sum
/// to 1 up to floating-point rounding.
inline std::pair<double, double> softmax_pair(double a, double b) {
    const double m = std::max(a, b);
    const double ea = std::exp(a - m);
    const double eb = std::exp(b - m);
    const double sum = ea + eb;
    return {ea / sum, eb / sum};
}

/// out = w_rgb * (proj_rgb (*) rgb) + w_fem * (proj_fem (*) fem), where (*)
/// is per-pixel channel mixing and (w_rgb, w_fem) = softmax(logits).
inline FeatureMap amfm_fuse(const FeatureMap& rgb_feat, const FeatureMap& fem_feat,
                            const AmfmParams& p) {
    if (!rgb_feat.valid() || !fem_feat.valid())
        throw std::invalid_argument("amfm_fuse: invalid feature map");
    if (rgb_feat.height != fem_feat.height || rgb_feat.width != fem_feat.width)
        throw std::invalid_argument("amfm_fuse: spatial dimensions of the branches differ");
    if (p.proj_rgb.cols != rgb_feat.channels)
        throw std::invalid_argument("amfm_fuse: proj_rgb column count does not match rgb channels");
    if (p.proj_fem.cols != fem_feat.channels)
        throw std::invalid_argument("amfm_fuse: proj_fem column count does not match fem channels");
    if (p.proj_rgb.rows != p.proj_fem.rows || p.proj_rgb.rows <= 0)
        throw std::invalid_argument("amfm_fuse: projection output channel counts differ");

    const auto [w_rgb, w_fem] = softmax_pair(p.logit_rgb, p.logit_fem);
    const int c_out = p.proj_rgb.rows;
    const int h = rgb_feat.height, w = rgb_feat.width;
    FeatureMap out = make_feature_map(c_out, h, w, 0.0);

    const std::size_t plane = out.plane_size();
    for (int o = 0; o < c_out; ++o) {
        double* dst = &out.data[static_cast<std::size_t>(o) * plane];
        for (int c = 0; c < rgb_feat.channels; ++c) {
            const double k = w_rgb * p.proj_rgb.at(o, c);
            if (k == 0.0) continue;
            const double* src = &rgb_feat.data[static_cast<std::size_t>(c) * plane];
            for (std::size_t i = 0; i < plane; ++i) dst[i] += k * src[i];
        }
        for (int c = 0; c < fem_feat.channels; ++c) {
            const double k = w_fem * p.proj_fem.at(o, c);
            if (k == 0.0) continue;
            const double* src = &fem_feat.data[static_cast<std::size_t>(c) * plane];
            for (std::size_t i = 0; i < plane; ++i) dst[i] += k * src[i];
        }
    }
    return out;
}

// ============================================================================
// ECA
// ============================================================================

/// Kernel-size rule parameters, following the convention of the efficient
/// channel attention reference design.
struct EcaConfig {
    int gamma = 2;
    int b = 1;
};

/// k = odd(floor(|log2(C)/gamma + b/gamma|)), rounded up to the next odd
/// number and never below 1.
inline int eca_kernel_size(int channels, EcaConfig cfg = {}) {
    if (channels < 1) throw std::invalid_argument("eca_kernel_size: channels must be >= 1");
    if (cfg.gamma <= 0) throw std::invalid_argument("eca_kernel_size: gamma must be positive");
    const double raw = std::abs(std::log2(static_cast<double>(channels)) / cfg.gamma +
                                static_cast<double>(cfg.b) / cfg.gamma);
    int t = static_cast<int>(std::floor(raw));
    int k = (t % 2 == 1) ? t : t + 1;
    return std::max(k, 1);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Channel gates: s = per-channel global average pool, a = circular 1-D
/// cross-correlation of s with the centered kernel, g = sigmoid(a).
/// Output is x with each channel scaled by its gate; spatial structure is
/// untouched, so the block commutes with per-channel pixel permutations.
inline FeatureMap eca_forward(const FeatureMap& x, const std::vector<double>& weights,
                              EcaConfig cfg = {}) {
    if (!x.valid()) throw std::invalid_argument("eca_forward: invalid feature map");
    const int k = eca_kernel_size(x.channels, cfg);
    if (static_cast<int>(weights.size()) != k)
        throw std::invalid_argument("eca_forward: expected " + std::to_string(k) +
                                    " weights, got " + std::to_string(weights.size()));

    for (double v : x.data)
        if (!std::isfinite(v)) throw std::invalid_argument("eca_forward: non-finite value");

    const int C = x.channels;
    const std::size_t plane = x.plane_size();
    // pool in ascending value order: the fixed summation order makes the mean
    // bit-identical under any spatial permutation of the channel
    std::vector<double> pooled(C);
    std::vector<double> sorted(plane);
    for (int c = 0; c < C; ++c) {
        const double* src = &x.data[static_cast<std::size_t>(c) * plane];
        std::copy(src, src + plane, sorted.begin());
        std::sort(sorted.begin(), sorted.end());
        double sum = 0.0;
        for (double v : sorted) sum += v;
        pooled[c] = sum / static_cast<double>(plane);
    }

    const int half = (k - 1) / 2;
    FeatureMap out = make_feature_map(C, x.height, x.width, 0.0);
    for (int c = 0; c < C; ++c) {
        double a = 0.0;
        for (int j = 0; j < k; ++j) {
            int idx = (c + j - half) % C;
            if (idx < 0) idx += C;
            a += weights[static_cast<std::size_t>(j)] * pooled[idx];
        }
        const double gate = sigmoid(a);
        const double* src = &x.data[static_cast<std::size_t>(c) * plane];
        double* dst = &out.data[static_cast<std::size_t>(c) * plane];
        for (std::size_t i = 0; i < plane; ++i) dst[i] = gate * src[i];
    }
    return out;
}

}  // namespace infestscope
