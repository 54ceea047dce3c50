#pragma once

// Pest-situation analytics on tree points: Gaussian-kernel density field of
// infected trees over normalized plot coordinates, neighborhood risk scores
// for healthy trees, density-based clustering with fitted ellipses for
// protection areas, and crown-size class statistics.

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "infestscope/detections.hpp"
#include "infestscope/parallel.hpp"

namespace infestscope {

// ============================================================================
// Plot extent and density field
// ============================================================================

struct PlotExtent {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    bool valid() const { return width() > 0.0 && height() > 0.0; }
    bool contains(double x, double y) const {
        return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
    }
};

/// Tight bounding region of a point set (zero-size extents are widened by
/// half a unit on each side so the extent stays valid).
inline PlotExtent bounding_extent(const std::vector<TreePoint>& points) {
    if (points.empty()) throw std::invalid_argument("bounding_extent: empty point set");
    PlotExtent e{points[0].x, points[0].y, points[0].x, points[0].y};
    for (const auto& p : points) {
        e.x_min = std::min(e.x_min, p.x);
        e.y_min = std::min(e.y_min, p.y);
        e.x_max = std::max(e.x_max, p.x);
        e.y_max = std::max(e.y_max, p.y);
    }
    if (e.width() <= 0.0) { e.x_min -= 0.5; e.x_max += 0.5; }
    if (e.height() <= 0.0) { e.y_min -= 0.5; e.y_max += 0.5; }
    return e;
}

/// KDE bandwidth h = n^(-1/(d+4)), dimensionless on normalized coordinates.
inline double bandwidth(long n, int d) {
    if (n < 1) throw std::invalid_argument("bandwidth: n must be >= 1");
    if (d < 1) throw std::invalid_argument("bandwidth: dimension must be >= 1");
    return std::pow(static_cast<double>(n), -1.0 / (d + 4));
}

/// Gaussian kernel density estimate over a uniform grid of cell centers in
/// the unit square. Values are plain kernel sums (1/(n hx hy)) sum K, not
/// clipped or rescaled; the discrete integral over the unit square is ~1.
struct DensityField {
    PlotExtent extent;
    int grid_w = 256;
    int grid_h = 256;
    std::vector<double> values;  // row-major, values[iy*grid_w + ix]
    double bandwidth = 0.0;      // the isotropic h actually used
    double bandwidth_x = 0.0;    // per-axis h (differ from `bandwidth` in scott mode)
    double bandwidth_y = 0.0;
    long n_points = 0;
    std::string normalization;   // coordinate-map descriptor

    double at(int ix, int iy) const { return values[static_cast<std::size_t>(iy) * grid_w + ix]; }
};

struct KdeOptions {
    int grid_w = 256;
    int grid_h = 256;
    // 0 = use the n^(-1/6) rule; otherwise the bandwidth to use (normalized units)
    double bandwidth_override = 0.0;
    // scale the per-axis bandwidth by the sample standard deviation (Scott's rule)
    bool scott = false;
};

inline DensityField kde(const std::vector<TreePoint>& infected, const PlotExtent& extent,
                        const KdeOptions& opt = {}) {
    if (infected.empty()) throw std::invalid_argument("kde: empty infected set");
    if (!extent.valid()) throw std::invalid_argument("kde: degenerate extent");
    if (opt.grid_w < 1 || opt.grid_h < 1) throw std::invalid_argument("kde: grid must be >= 1x1");
    for (const auto& p : infected)
        if (!extent.contains(p.x, p.y))
            throw std::invalid_argument("kde: point outside extent");

    const long n = static_cast<long>(infected.size());
    const double h = opt.bandwidth_override > 0.0 ? opt.bandwidth_override : bandwidth(n, 2);

    // normalize coordinates into the unit square
    std::vector<double> u(infected.size()), v(infected.size());
    for (std::size_t i = 0; i < infected.size(); ++i) {
        u[i] = (infected[i].x - extent.x_min) / extent.width();
        v[i] = (infected[i].y - extent.y_min) / extent.height();
    }

    double hx = h, hy = h;
    if (opt.scott) {
        auto stddev = [&](const std::vector<double>& c) {
            double mean = 0.0;
            for (double x : c) mean += x;
            mean /= static_cast<double>(c.size());
            double var = 0.0;
            for (double x : c) var += (x - mean) * (x - mean);
            return std::sqrt(var / static_cast<double>(c.size()));
        };
        hx = h * stddev(u);
        hy = h * stddev(v);
        if (hx < 1e-12 || hy < 1e-12)
            throw std::invalid_argument("kde: degenerate point spread for scott bandwidth");
    }

    DensityField f;
    f.extent = extent;
    f.grid_w = opt.grid_w;
    f.grid_h = opt.grid_h;
    f.values.assign(static_cast<std::size_t>(opt.grid_w) * opt.grid_h, 0.0);
    f.bandwidth = h;
    f.bandwidth_x = hx;
    f.bandwidth_y = hy;
    f.n_points = n;
    f.normalization = opt.scott ? "unit-square-scott" : "unit-square";

    const double norm = 1.0 / (static_cast<double>(n) * hx * hy * 2.0 * std::numbers::pi);
    parallel_for(0, opt.grid_h, [&](int iy) {
        const double cy = (iy + 0.5) / opt.grid_h;
        double* row = &f.values[static_cast<std::size_t>(iy) * opt.grid_w];
        for (int ix = 0; ix < opt.grid_w; ++ix) {
            const double cx = (ix + 0.5) / opt.grid_w;
            double sum = 0.0;
            for (std::size_t i = 0; i < u.size(); ++i) {
                const double du = (cx - u[i]) / hx;
                const double dv = (cy - v[i]) / hy;
                sum += std::exp(-0.5 * (du * du + dv * dv));
            }
            row[ix] = norm * sum;
        }
    });
    return f;
}

/// Bilinear interpolation of the field at an image-coordinate query point.
/// Queries between the border cell centers and the extent edge clamp to the
/// border cell.
inline double sample_density(const DensityField& f, double x, double y) {
    if (!f.extent.contains(x, y)) throw std::invalid_argument("sample_density: query outside extent");
    const double u = (x - f.extent.x_min) / f.extent.width();
    const double v = (y - f.extent.y_min) / f.extent.height();
    const double gx = u * f.grid_w - 0.5;
    const double gy = v * f.grid_h - 0.5;
    const int x0 = std::clamp(static_cast<int>(std::floor(gx)), 0, f.grid_w - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(gy)), 0, f.grid_h - 1);
    const int x1 = std::min(x0 + 1, f.grid_w - 1);
    const int y1 = std::min(y0 + 1, f.grid_h - 1);
    const double tx = std::clamp(gx - x0, 0.0, 1.0);
    const double ty = std::clamp(gy - y0, 0.0, 1.0);
    const double top = f.at(x0, y0) * (1.0 - tx) + f.at(x1, y0) * tx;
    const double bot = f.at(x0, y1) * (1.0 - tx) + f.at(x1, y1) * tx;
    return top * (1.0 - ty) + bot * ty;
}

/// Grid-cell local maxima (value >= all existing 8-neighbors), strongest
/// first, at most k entries. Cell indices are returned as (ix, iy).
inline std::vector<std::pair<int, int>> local_maxima(const DensityField& f, int k) {
    std::vector<std::pair<int, int>> cells;
    for (int iy = 0; iy < f.grid_h; ++iy) {
        for (int ix = 0; ix < f.grid_w; ++ix) {
            const double v = f.at(ix, iy);
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy) {
                for (int dx = -1; dx <= 1 && is_max; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const int nx = ix + dx, ny = iy + dy;
                    if (nx < 0 || nx >= f.grid_w || ny < 0 || ny >= f.grid_h) continue;
                    if (f.at(nx, ny) > v) is_max = false;
                }
            }
            if (is_max) cells.emplace_back(ix, iy);
        }
    }
    std::stable_sort(cells.begin(), cells.end(), [&](const auto& a, const auto& b) {
        return f.at(a.first, a.second) > f.at(b.first, b.second);
    });
    if (static_cast<int>(cells.size()) > k) cells.resize(static_cast<std::size_t>(k));
    return cells;
}

// ============================================================================
// Healthy-tree risk
// ============================================================================

struct RiskEntry {
    TreePoint tree;  // cls = Healthy
    double risk = 0.0;
};

struct RiskTable {
    std::vector<RiskEntry> entries;  // one per healthy tree, input order
    double radius = 0.0;             // normalized units
};

/// Mean of the density field over all grid cells whose centers lie within
/// normalized distance r of the tree position. If no cell center falls
/// inside the disc, the bilinear sample at the tree position is used.
inline RiskTable risk_scores(const std::vector<TreePoint>& healthy, const DensityField& f,
                             double r) {
    if (!(r > 0.0)) throw std::invalid_argument("risk_scores: radius must be positive");
    for (const auto& p : healthy)
        if (!f.extent.contains(p.x, p.y))
            throw std::invalid_argument("risk_scores: healthy tree outside extent");

    RiskTable table;
    table.radius = r;
    table.entries.resize(healthy.size());
    parallel_for(0, static_cast<int>(healthy.size()), [&](int j) {
        const TreePoint& p = healthy[static_cast<std::size_t>(j)];
        const double u = (p.x - f.extent.x_min) / f.extent.width();
        const double v = (p.y - f.extent.y_min) / f.extent.height();
        const int ix_lo = std::max(0, static_cast<int>(std::floor((u - r) * f.grid_w - 0.5)));
        const int ix_hi = std::min(f.grid_w - 1, static_cast<int>(std::ceil((u + r) * f.grid_w - 0.5)));
        const int iy_lo = std::max(0, static_cast<int>(std::floor((v - r) * f.grid_h - 0.5)));
        const int iy_hi = std::min(f.grid_h - 1, static_cast<int>(std::ceil((v + r) * f.grid_h - 0.5)));

        // Kahan-compensated mean over the disc
        double sum = 0.0, comp = 0.0;
        long count = 0;
        for (int iy = iy_lo; iy <= iy_hi; ++iy) {
            const double cy = (iy + 0.5) / f.grid_h;
            for (int ix = ix_lo; ix <= ix_hi; ++ix) {
                const double cx = (ix + 0.5) / f.grid_w;
                const double du = cx - u, dv = cy - v;
                if (du * du + dv * dv > r * r) continue;
                const double y = f.at(ix, iy) - comp;
                const double t = sum + y;
                comp = (t - sum) - y;
                sum = t;
                ++count;
            }
        }
        table.entries[static_cast<std::size_t>(j)] =
            {p, count > 0 ? sum / static_cast<double>(count) : sample_density(f, p.x, p.y)};
    });
    return table;
}

// ============================================================================
// DBSCAN
// ============================================================================

inline constexpr int kNoiseLabel = -1;

/// Classic density-based clustering. A point is core when it has >= min_pts
/// neighbors within eps (itself included). Cluster ids are assigned in the
/// order the first core point of each cluster appears in the input; the
/// expansion queue is FIFO with neighbors enqueued in input order, so border
/// points go to the first cluster that reaches them.
inline std::vector<int> dbscan(const std::vector<TreePoint>& points, double eps, int min_pts) {
    if (!(eps > 0.0)) throw std::invalid_argument("dbscan: eps must be positive");
    if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");

    const std::size_t n = points.size();
    std::vector<int> labels(n, kNoiseLabel);
    if (n == 0) return labels;

    const double eps2 = eps * eps;
    auto neighbors_of = [&](std::size_t i) {
        std::vector<std::size_t> nb;
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = points[i].x - points[j].x;
            const double dy = points[i].y - points[j].y;
            if (dx * dx + dy * dy <= eps2) nb.push_back(j);
        }
        return nb;
    };

    std::vector<char> visited(n, 0);
    int next_cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (visited[i]) continue;
        visited[i] = 1;
        auto seed = neighbors_of(i);
        if (static_cast<int>(seed.size()) < min_pts) continue;  // noise unless claimed later

        const int cluster = next_cluster++;
        labels[i] = cluster;
        std::deque<std::size_t> queue(seed.begin(), seed.end());
        while (!queue.empty()) {
            const std::size_t q = queue.front();
            queue.pop_front();
            if (labels[q] == kNoiseLabel) labels[q] = cluster;  // claim border/noise point
            if (visited[q]) continue;
            visited[q] = 1;
            auto nb = neighbors_of(q);
            if (static_cast<int>(nb.size()) >= min_pts)
                queue.insert(queue.end(), nb.begin(), nb.end());
        }
    }
    return labels;
}

/// Median k-th nearest neighbor distance (k counted excluding the point
/// itself); the documented default-eps heuristic for protection areas.
inline double median_knn_distance(const std::vector<TreePoint>& points, int k) {
    if (points.size() <= static_cast<std::size_t>(k))
        throw std::invalid_argument("median_knn_distance: need more points than k");
    std::vector<double> kth;
    kth.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::vector<double> d2;
        d2.reserve(points.size() - 1);
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (i == j) continue;
            const double dx = points[i].x - points[j].x;
            const double dy = points[i].y - points[j].y;
            d2.push_back(dx * dx + dy * dy);
        }
        std::nth_element(d2.begin(), d2.begin() + (k - 1), d2.end());
        kth.push_back(std::sqrt(d2[static_cast<std::size_t>(k - 1)]));
    }
    std::sort(kth.begin(), kth.end());
    return kth[kth.size() / 2];
}

// ============================================================================
// Ellipse fitting
// ============================================================================

struct EllipseFit {
    double cx = 0.0;
    double cy = 0.0;
    double semi_major = 0.0;
    double semi_minor = 0.0;
    double angle = 0.0;  // radians from the x-axis, in (-pi/2, pi/2]
};

/// Covariance ellipse of a point set: center = coordinate mean, axes from
/// the eigen-decomposition of the 2x2 covariance, semi-axis lengths
/// 2*sqrt(eigenvalue) (~95% mass for Gaussian scatter).
inline EllipseFit fit_ellipse(const std::vector<TreePoint>& members) {
    if (members.size() < 3)
        throw std::invalid_argument("fit_ellipse: need at least 3 points");
    const double n = static_cast<double>(members.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : members) { mx += p.x; my += p.y; }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& p : members) {
        const double dx = p.x - mx, dy = p.y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    sxx /= n;
    syy /= n;
    sxy /= n;

    // eigenvalues of [[sxx, sxy], [sxy, syy]]
    const double tr = sxx + syy;
    const double det_term = std::sqrt(std::max(0.0, (sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy));
    const double l_max = (tr + det_term) / 2.0;
    const double l_min = (tr - det_term) / 2.0;
    if (!(l_min > 0.0) || l_min < 1e-12 * l_max)
        throw std::invalid_argument("fit_ellipse: collinear points (degenerate minor axis)");

    double angle = 0.0;
    if (det_term > 1e-15 * std::max(1.0, tr)) {  // distinct eigenvalues define a direction
        double vx, vy;
        if (std::abs(sxy) > 1e-300) {
            vx = l_max - syy;
            vy = sxy;
        } else {
            vx = sxx >= syy ? 1.0 : 0.0;
            vy = sxx >= syy ? 0.0 : 1.0;
        }
        angle = std::atan2(vy, vx);
        // fold into (-pi/2, pi/2]
        if (angle > std::numbers::pi / 2.0) angle -= std::numbers::pi;
        if (angle <= -std::numbers::pi / 2.0) angle += std::numbers::pi;
    }

    EllipseFit e;
    e.cx = mx;
    e.cy = my;
    e.semi_major = 2.0 * std::sqrt(l_max);
    e.semi_minor = 2.0 * std::sqrt(l_min);
    e.angle = angle;
    return e;
}

// ============================================================================
// Protection areas
// ============================================================================

struct ProtectionArea {
    std::string id;  // PA1, PA2, ... in descending member count
    std::vector<TreePoint> members;
    EllipseFit ellipse;
};

inline std::vector<ProtectionArea> protection_areas(const std::vector<TreePoint>& healthy,
                                                    double eps, int min_pts) {
    const std::vector<int> labels = dbscan(healthy, eps, min_pts);
    int n_clusters = 0;
    for (int l : labels) n_clusters = std::max(n_clusters, l + 1);

    std::vector<ProtectionArea> areas(static_cast<std::size_t>(n_clusters));
    for (std::size_t i = 0; i < healthy.size(); ++i)
        if (labels[i] >= 0) areas[static_cast<std::size_t>(labels[i])].members.push_back(healthy[i]);

    // First-claim border assignment can strand a late cluster below min_pts
    // (its neighbors already belong to an earlier cluster); such fragments are
    // not reportable areas. An ellipse also needs at least 3 points.
    const std::size_t floor_size = static_cast<std::size_t>(std::max(min_pts, 3));
    std::erase_if(areas, [&](const ProtectionArea& a) { return a.members.size() < floor_size; });

    // largest first; ties keep discovery order
    std::stable_sort(areas.begin(), areas.end(), [](const ProtectionArea& a, const ProtectionArea& b) {
        return a.members.size() > b.members.size();
    });
    for (std::size_t i = 0; i < areas.size(); ++i) {
        areas[i].id = "PA" + std::to_string(i + 1);
        areas[i].ellipse = fit_ellipse(areas[i].members);
    }
    return areas;
}

// ============================================================================
// Crown-size classes
// ============================================================================

/// Per-size-class tree counts. Boundaries split [min area, max area] into
/// three equal-width intervals; the tertile mode uses the 1/3 and 2/3 order
/// statistics instead. Classes: small [a_min,b1), medium [b1,b2),
/// large [b2,a_max].
struct SizeClassStats {
    double b1 = 0.0;
    double b2 = 0.0;
    bool degenerate = false;  // all areas equal; every tree lands in "large"
    bool tertiles = false;

    struct Bucket {
        long total = 0;
        long infected = 0;
        long healthy = 0;
        double infected_fraction = 0.0;  // 0 when the bucket is empty
    };
    Bucket small, medium, large;
};

inline SizeClassStats size_class_stats(const std::vector<TreePoint>& trees, bool tertiles = false) {
    if (trees.empty()) throw std::invalid_argument("size_class_stats: empty input");

    std::vector<double> areas;
    areas.reserve(trees.size());
    for (const auto& t : trees) areas.push_back(t.area);
    const auto [mn_it, mx_it] = std::minmax_element(areas.begin(), areas.end());
    const double a_min = *mn_it, a_max = *mx_it;

    SizeClassStats s;
    s.tertiles = tertiles;
    if (tertiles) {
        std::vector<double> sorted(areas);
        std::sort(sorted.begin(), sorted.end());
        s.b1 = sorted[sorted.size() / 3];
        s.b2 = sorted[2 * sorted.size() / 3];
    } else {
        s.b1 = a_min + (a_max - a_min) / 3.0;
        s.b2 = a_min + 2.0 * (a_max - a_min) / 3.0;
    }
    s.degenerate = !(s.b1 < s.b2) || a_min == a_max;

    for (const auto& t : trees) {
        SizeClassStats::Bucket& b =
            t.area < s.b1 ? s.small : (t.area < s.b2 ? s.medium : s.large);
        ++b.total;
        t.cls == TreeClass::Infected ? ++b.infected : ++b.healthy;
    }
    for (SizeClassStats::Bucket* b : {&s.small, &s.medium, &s.large})
        b->infected_fraction =
            b->total > 0 ? static_cast<double>(b->infected) / static_cast<double>(b->total) : 0.0;
    return s;
}

}  // namespace infestscope
