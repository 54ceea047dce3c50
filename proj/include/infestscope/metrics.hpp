#pragma once

// Detection evaluation: confusion counts from score-ordered greedy matching,
// precision/recall, 101-point interpolated average precision per class, and
// the two mAP aggregates (IoU 0.5, and 0.50:0.95 in steps of 0.05).

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "infestscope/detections.hpp"

namespace infestscope {

inline constexpr std::array<double, 10> kIouThresholds = {
    0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};

struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

/// Outcome of matching detections against ground truths at one IoU threshold.
/// Flags are indexed by the position of each record in the input vectors.
struct MatchResult {
    std::vector<bool> det_is_tp;        // per detection
    std::vector<int> det_matched_gt;    // index into gts, -1 when unmatched
    std::vector<bool> gt_matched;       // per ground truth
    ConfusionCounts counts;
};

/// Score-ordered greedy one-to-one matching, segregated per image and per
/// class. Each detection claims the unmatched same-class ground truth with
/// the highest IoU >= iou_thr. Ties in score keep input order; ties in IoU
/// go to the lowest ground-truth index.
inline MatchResult match(const std::vector<Detection>& dets,
                         const std::vector<Annotation>& gts, double iou_thr) {
    if (!(iou_thr > 0.0 && iou_thr <= 1.0))
        throw std::invalid_argument("match: iou threshold must lie in (0,1]");

    MatchResult res;
    res.det_is_tp.assign(dets.size(), false);
    res.det_matched_gt.assign(dets.size(), -1);
    res.gt_matched.assign(gts.size(), false);

    // group indices by (image, class)
    using Key = std::pair<std::string, int>;
    std::map<Key, std::vector<std::size_t>> det_groups, gt_groups;
    for (std::size_t i = 0; i < dets.size(); ++i)
        det_groups[{dets[i].image_id, static_cast<int>(dets[i].cls)}].push_back(i);
    for (std::size_t i = 0; i < gts.size(); ++i)
        gt_groups[{gts[i].image_id, static_cast<int>(gts[i].cls)}].push_back(i);

    for (auto& [key, det_idx] : det_groups) {
        std::stable_sort(det_idx.begin(), det_idx.end(), [&](std::size_t a, std::size_t b) {
            return dets[a].score > dets[b].score;
        });
        auto git = gt_groups.find(key);
        const std::vector<std::size_t>* gt_idx = git == gt_groups.end() ? nullptr : &git->second;
        for (std::size_t di : det_idx) {
            if (!gt_idx) continue;
            double best = 0.0;
            int best_gt = -1;
            for (std::size_t gi : *gt_idx) {
                if (res.gt_matched[gi]) continue;
                const double v = iou(dets[di].box, gts[gi].box);
                if (v >= iou_thr && v > best) {
                    best = v;
                    best_gt = static_cast<int>(gi);
                }
            }
            if (best_gt >= 0) {
                res.det_is_tp[di] = true;
                res.det_matched_gt[di] = best_gt;
                res.gt_matched[static_cast<std::size_t>(best_gt)] = true;
            }
        }
    }

    for (bool f : res.det_is_tp) f ? ++res.counts.tp : ++res.counts.fp;
    for (bool m : res.gt_matched)
        if (!m) ++res.counts.fn;
    return res;
}

/// P = TP/(TP+FP), R = TP/(TP+FN); degenerate 0/0 cases are defined as 0.
inline std::pair<double, double> precision_recall(const ConfusionCounts& c) {
    const double p = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    const double r = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    return {p, r};
}

/// 101-point max-interpolated average precision for one class at one IoU
/// threshold. Returns 0 when the class has no ground truths.
inline double average_precision(const std::vector<Detection>& dets,
                                const std::vector<Annotation>& gts, TreeClass cls,
                                double iou_thr) {
    long n_gt = 0;
    for (const auto& g : gts)
        if (g.cls == cls) ++n_gt;
    if (n_gt == 0) return 0.0;

    const MatchResult m = match(dets, gts, iou_thr);

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < dets.size(); ++i)
        if (dets[i].cls == cls) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dets[a].score > dets[b].score;
    });

    std::vector<double> precision(order.size()), recall(order.size());
    long tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        m.det_is_tp[order[i]] ? ++tp : ++fp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(tp + fp);
        recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
    }

    // max precision over the curve suffix, sampled at recalls 0.00..1.00
    std::vector<double> max_suffix(order.size());
    double running = 0.0;
    for (std::size_t i = order.size(); i-- > 0;) {
        running = std::max(running, precision[i]);
        max_suffix[i] = running;
    }
    double ap = 0.0;
    for (int s = 0; s <= 100; ++s) {
        const double r = s / 100.0;
        const auto it = std::lower_bound(recall.begin(), recall.end(), r);
        if (it != recall.end())
            ap += max_suffix[static_cast<std::size_t>(it - recall.begin())];
    }
    return ap / 101.0;
}

/// Full evaluation summary. Precision/recall and the confusion counts are
/// pooled over both classes at IoU 0.5; the AP table is per class and
/// threshold; the mAP aggregates average over classes that have ground
/// truths (0 when there are none).
struct EvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double map50 = 0.0;
    double map5095 = 0.0;
    ConfusionCounts counts;
    // ap[class][threshold index], class order: Infected, Healthy
    std::array<std::array<double, kIouThresholds.size()>, 2> ap{};

    double ap_at(TreeClass cls, std::size_t thr_index) const {
        return ap[static_cast<std::size_t>(cls)][thr_index];
    }
};

inline EvalReport evaluate(const std::vector<Detection>& dets,
                           const std::vector<Annotation>& gts) {
    EvalReport rep;
    rep.counts = match(dets, gts, 0.5).counts;
    std::tie(rep.precision, rep.recall) = precision_recall(rep.counts);

    const std::array<TreeClass, 2> classes = {TreeClass::Infected, TreeClass::Healthy};
    std::array<bool, 2> has_gt = {false, false};
    for (const auto& g : gts) has_gt[static_cast<std::size_t>(g.cls)] = true;

    for (std::size_t c = 0; c < classes.size(); ++c)
        for (std::size_t t = 0; t < kIouThresholds.size(); ++t)
            rep.ap[c][t] = average_precision(dets, gts, classes[c], kIouThresholds[t]);

    int n_classes = 0;
    double sum50 = 0.0, sum5095 = 0.0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        if (!has_gt[c]) continue;
        ++n_classes;
        sum50 += rep.ap[c][0];
        sum5095 += std::accumulate(rep.ap[c].begin(), rep.ap[c].end(), 0.0) /
                   static_cast<double>(kIouThresholds.size());
    }
    if (n_classes > 0) {
        rep.map50 = sum50 / n_classes;
        rep.map5095 = sum5095 / n_classes;
    }
    return rep;
}

}  // namespace infestscope
