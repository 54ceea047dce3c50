#pragma once

// Synthetic forest-scene generator. Produces ground-truth annotation sets
// with planted infected clusters and healthy-tree fields, derives noisy
// detection sets with known confusion counts, and renders toy rasters whose
// crown palettes carry the expected vegetation-index signs.
//
// Determinism contract: all draws come from one SplitMix64 stream consumed
// in a fixed order, so a seed reproduces the scene bit-exactly.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "infestscope/detections.hpp"
#include "infestscope/metrics.hpp"
#include "infestscope/raster.hpp"
#include "infestscope/rng.hpp"
#include "infestscope/situation.hpp"

namespace infestscope {

struct ClusterSpec {
    double cx = 0.0;
    double cy = 0.0;
    double std_dev = 1.0;  // Gaussian spread; samples are truncated at 2.5 std_dev
    int count = 0;
};

struct HealthyPlacement {
    enum class Mode { Uniform, Blobs };
    Mode mode = Mode::Uniform;
    int count = 0;                   // uniform mode
    std::vector<ClusterSpec> blobs;  // blob mode
};

// The one supported score model: true positives U[0.6,1.0], false positives
// U[0.1,0.7] - overlapping ranges so precision-recall curves are non-trivial.
inline constexpr const char* kDefaultScoreModel = "uniform-tp[0.6,1.0]-fp[0.1,0.7]";

struct DetectorNoise {
    double miss_rate = 0.0;
    double false_rate = 0.0;
    double box_jitter = 0.0;  // pixels; boxes are translated by U[-j,j] per axis
    std::string score_model = kDefaultScoreModel;
    // An all-zero noise model short-circuits to detections == annotations
    // with score 1.
    double tp_score_min = 0.6, tp_score_max = 1.0;
    double fp_score_min = 0.1, fp_score_max = 0.7;

    bool all_zero() const { return miss_rate == 0.0 && false_rate == 0.0 && box_jitter == 0.0; }
};

struct SceneSpec {
    std::uint64_t seed = 0;
    PlotExtent extent;
    std::vector<ClusterSpec> clusters;  // infected trees
    HealthyPlacement healthy;
    std::pair<double, double> crown_area_range = {25.0, 100.0};  // pixels^2
    DetectorNoise detector_noise;
    std::string image_id = "synthetic";
};

struct SceneExpected {
    std::vector<std::pair<double, double>> cluster_centroids;     // planted
    std::vector<std::pair<double, double>> cluster_sample_means;  // realized
    std::vector<std::pair<double, double>> healthy_blob_centroids;
    ConfusionCounts confusion;  // realized counts at IoU 0.5
};

struct SceneTruth {
    PlotExtent extent;
    std::vector<Annotation> annotations;
    std::vector<Detection> detections;
    SceneExpected expected;
    double min_spacing = 0.0;  // enforced center spacing between any two trees
    std::string score_model;
};

namespace detail {

// Minimum center spacing that keeps annotation boxes disjoint with margin,
// so a translation-jittered detection can only overlap its own source box.
inline double required_spacing(double area_max) { return 1.5 * std::sqrt(area_max); }

// Largest translation jitter that keeps IoU(jittered, source) > 0.5 for the
// smallest crown: (1 - j/s)^2 > 2/3 per axis-aligned square overlap algebra.
inline double max_safe_jitter(double area_min) {
    return (1.0 - std::sqrt(2.0 / 3.0)) * std::sqrt(area_min);
}

inline void place_with_spacing(SplitMix64& rng, std::vector<TreePoint>& placed,
                               const PlotExtent& extent, double spacing, TreeClass cls,
                               const ClusterSpec* cluster, int count) {
    const double spacing2 = spacing * spacing;
    for (int m = 0; m < count; ++m) {
        bool ok = false;
        for (int attempt = 0; attempt < 2000 && !ok; ++attempt) {
            double x, y;
            if (cluster) {
                double gx, gy;
                do {
                    std::tie(gx, gy) = rng.gauss_pair();
                } while (gx * gx + gy * gy > 2.5 * 2.5);
                x = cluster->cx + cluster->std_dev * gx;
                y = cluster->cy + cluster->std_dev * gy;
            } else {
                x = rng.uniform(extent.x_min, extent.x_max);
                y = rng.uniform(extent.y_min, extent.y_max);
            }
            if (!extent.contains(x, y)) continue;
            ok = true;
            for (const auto& p : placed) {
                const double dx = p.x - x, dy = p.y - y;
                if (dx * dx + dy * dy < spacing2) {
                    ok = false;
                    break;
                }
            }
            if (ok) placed.push_back({x, y, cls, 0.0});
        }
        if (!ok)
            throw std::runtime_error(
                "infeasible scene spec: cannot place trees at the required spacing");
    }
}

}  // namespace detail

inline SceneTruth generate(const SceneSpec& spec) {
    if (!spec.extent.valid()) throw std::invalid_argument("generate: degenerate extent");
    const auto [area_min, area_max] = spec.crown_area_range;
    if (!(area_min > 0.0) || area_min > area_max)
        throw std::invalid_argument("generate: crown_area_range must satisfy 0 < min <= max");
    const DetectorNoise& noise = spec.detector_noise;
    if (noise.miss_rate < 0.0 || noise.miss_rate > 1.0 || noise.false_rate < 0.0 ||
        noise.false_rate > 1.0 || noise.box_jitter < 0.0)
        throw std::invalid_argument("generate: noise rates must lie in [0,1] and jitter must be >= 0");
    if (noise.score_model != kDefaultScoreModel)
        throw std::invalid_argument("generate: unknown score model '" + noise.score_model + "'");
    for (const auto& c : spec.clusters)
        if (c.count < 0 || !(c.std_dev > 0.0))
            throw std::invalid_argument("generate: cluster counts must be >= 0 and std > 0");
    if (noise.box_jitter > detail::max_safe_jitter(area_min))
        throw std::runtime_error(
            "infeasible scene spec: box_jitter too large for the smallest crown (would break "
            "IoU > 0.5 with the source box)");

    const double spacing = detail::required_spacing(area_max);
    long total = 0;
    for (const auto& c : spec.clusters) total += c.count;
    if (spec.healthy.mode == HealthyPlacement::Mode::Uniform) total += spec.healthy.count;
    else
        for (const auto& b : spec.healthy.blobs) total += b.count;
    if (static_cast<double>(total) * spacing * spacing >
        4.0 * spec.extent.width() * spec.extent.height())
        throw std::runtime_error("infeasible scene spec: more trees than the extent can hold "
                                 "at the required spacing");

    SplitMix64 rng(spec.seed);
    SceneTruth truth;
    truth.extent = spec.extent;
    truth.min_spacing = spacing;
    truth.score_model = noise.score_model;

    // --- tree placement ---
    std::vector<TreePoint> trees;
    std::vector<std::size_t> cluster_begin;
    for (const auto& c : spec.clusters) {
        cluster_begin.push_back(trees.size());
        detail::place_with_spacing(rng, trees, spec.extent, spacing, TreeClass::Infected, &c, c.count);
        truth.expected.cluster_centroids.emplace_back(c.cx, c.cy);
    }
    for (std::size_t k = 0; k < spec.clusters.size(); ++k) {
        const std::size_t b = cluster_begin[k];
        const std::size_t e = k + 1 < cluster_begin.size() ? cluster_begin[k + 1] : trees.size();
        double sx = 0.0, sy = 0.0;
        for (std::size_t i = b; i < e; ++i) { sx += trees[i].x; sy += trees[i].y; }
        const double cnt = static_cast<double>(e - b);
        truth.expected.cluster_sample_means.emplace_back(cnt > 0 ? sx / cnt : spec.clusters[k].cx,
                                                         cnt > 0 ? sy / cnt : spec.clusters[k].cy);
    }
    if (spec.healthy.mode == HealthyPlacement::Mode::Uniform) {
        detail::place_with_spacing(rng, trees, spec.extent, spacing, TreeClass::Healthy, nullptr,
                                   spec.healthy.count);
    } else {
        for (const auto& b : spec.healthy.blobs) {
            detail::place_with_spacing(rng, trees, spec.extent, spacing, TreeClass::Healthy, &b,
                                       b.count);
            truth.expected.healthy_blob_centroids.emplace_back(b.cx, b.cy);
        }
    }

    // --- annotations: square crowns of random area ---
    for (auto& t : trees) {
        t.area = rng.uniform(area_min, area_max);
        const double half = std::sqrt(t.area) / 2.0;
        truth.annotations.push_back(
            {spec.image_id, {t.x - half, t.y - half, t.x + half, t.y + half}, t.cls});
    }

    // --- detections ---
    if (noise.all_zero()) {
        for (const auto& a : truth.annotations)
            truth.detections.push_back({a.image_id, a.box, a.cls, 1.0});
        truth.expected.confusion = {static_cast<long>(truth.annotations.size()), 0, 0};
        return truth;
    }

    long tp = 0, fn = 0, fp = 0;
    for (const auto& a : truth.annotations) {
        if (rng.uniform() < noise.miss_rate) {
            ++fn;
            continue;
        }
        const double dx = rng.uniform(-noise.box_jitter, noise.box_jitter);
        const double dy = rng.uniform(-noise.box_jitter, noise.box_jitter);
        Box b{a.box.x_min + dx, a.box.y_min + dy, a.box.x_max + dx, a.box.y_max + dy};
        truth.detections.push_back(
            {a.image_id, b, a.cls, rng.uniform(noise.tp_score_min, noise.tp_score_max)});
        ++tp;
    }
    for (const auto& a : truth.annotations) {
        if (rng.uniform() >= noise.false_rate) continue;
        bool placed = false;
        for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
            const double side = std::sqrt(rng.uniform(area_min, area_max));
            const double cx = rng.uniform(spec.extent.x_min, spec.extent.x_max);
            const double cy = rng.uniform(spec.extent.y_min, spec.extent.y_max);
            Box b{cx - side / 2.0, cy - side / 2.0, cx + side / 2.0, cy + side / 2.0};
            bool clear = true;
            for (const auto& gt : truth.annotations) {
                if (iou(b, gt.box) >= 0.1) {
                    clear = false;
                    break;
                }
            }
            if (!clear) continue;
            const TreeClass cls = rng.below(2) == 0 ? TreeClass::Infected : TreeClass::Healthy;
            truth.detections.push_back(
                {a.image_id, b, cls, rng.uniform(noise.fp_score_min, noise.fp_score_max)});
            placed = true;
            ++fp;
        }
        if (!placed)
            throw std::runtime_error("infeasible scene spec: no room for a false-positive box");
    }
    truth.expected.confusion = {tp, fp, fn};
    return truth;
}

// ============================================================================
// Rendering
// ============================================================================

// Crown palettes chosen so healthy centers have VDVI > 0 and NGBDI > 0 while
// infected centers have VDVI < 0 (needle discoloration as a red/brown shift).
inline constexpr double kHealthyColor[3] = {0.20, 0.55, 0.15};
inline constexpr double kInfectedColor[3] = {0.55, 0.25, 0.10};
inline constexpr double kSoilColor[3] = {0.40, 0.35, 0.30};

/// Renders crowns as filled discs over a flat soil background, ppm pixels
/// per scene unit. Index signs at every crown center are asserted after
/// drawing.
inline Raster render(const SceneTruth& truth, double ppm) {
    if (!(ppm > 0.0)) throw std::invalid_argument("render: resolution must be positive");
    const double w_units = truth.extent.width();
    const double h_units = truth.extent.height();
    const long w = std::lround(std::ceil(w_units * ppm));
    const long h = std::lround(std::ceil(h_units * ppm));
    if (w < 1 || h < 1 || w > 20000 || h > 20000)
        throw std::invalid_argument("render: extent/resolution out of range");

    Raster img = make_raster(static_cast<int>(w), static_cast<int>(h), 3, 0.0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = kSoilColor[c];

    const auto points = to_points(truth.annotations);
    for (const auto& t : points) {
        const double* col = t.cls == TreeClass::Healthy ? kHealthyColor : kInfectedColor;
        const double cx = (t.x - truth.extent.x_min) * ppm;
        const double cy = (t.y - truth.extent.y_min) * ppm;
        const double radius = std::max(1.0, std::sqrt(t.area) / 2.0 * ppm);
        const int x0 = static_cast<int>(std::max(0L, std::lround(std::floor(cx - radius))));
        const int x1 = static_cast<int>(
            std::min(static_cast<long>(img.width) - 1, std::lround(std::ceil(cx + radius))));
        const int y0 = static_cast<int>(std::max(0L, std::lround(std::floor(cy - radius))));
        const int y1 = static_cast<int>(
            std::min(static_cast<long>(img.height) - 1, std::lround(std::ceil(cy + radius))));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
                if (dx * dx + dy * dy > radius * radius) continue;
                for (int c = 0; c < 3; ++c) img.at(x, y, c) = col[c];
            }
        }
    }

    // post-render palette check at crown centers
    for (const auto& t : points) {
        const int px = std::clamp(static_cast<int>((t.x - truth.extent.x_min) * ppm), 0, img.width - 1);
        const int py = std::clamp(static_cast<int>((t.y - truth.extent.y_min) * ppm), 0, img.height - 1);
        const double r = img.at(px, py, 0), g = img.at(px, py, 1), b = img.at(px, py, 2);
        const double v = (2.0 * g - r - b) / (2.0 * g + r + b);
        const double n = (g - b) / (g + b);
        if (t.cls == TreeClass::Healthy ? !(v > 0.0 && n > 0.0) : !(v < 0.0))
            throw std::runtime_error("render: crown palette check failed (overlapping crowns?)");
    }
    return img;
}

}  // namespace infestscope
