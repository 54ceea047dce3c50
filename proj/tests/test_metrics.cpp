#include "infestscope/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracle_metrics.hpp"

using namespace infestscope;

namespace {

Detection det(const char* img, Box b, TreeClass c, double s) { return {img, b, c, s}; }
Annotation ann(const char* img, Box b, TreeClass c) { return {img, b, c}; }

}  // namespace

// ---------------------------------------------------------------------------
// match
// ---------------------------------------------------------------------------

TEST(Match, PerfectSingleMatch) {
    const std::vector<Annotation> gts = {ann("a", {0, 0, 10, 10}, TreeClass::Infected)};
    const std::vector<Detection> dets = {det("a", {0, 0, 10, 10}, TreeClass::Infected, 0.9)};
    const MatchResult m = match(dets, gts, 0.5);
    EXPECT_EQ(m.counts.tp, 1);
    EXPECT_EQ(m.counts.fp, 0);
    EXPECT_EQ(m.counts.fn, 0);
}

TEST(Match, BelowThresholdIsFpAndFn) {
    const std::vector<Annotation> gts = {ann("a", {0, 0, 10, 10}, TreeClass::Infected)};
    // IoU = 30/(100+100-30) ~ 0.176 < 0.5
    const std::vector<Detection> dets = {det("a", {7, 0, 17, 10}, TreeClass::Infected, 0.9)};
    const MatchResult m = match(dets, gts, 0.5);
    EXPECT_EQ(m.counts.tp, 0);
    EXPECT_EQ(m.counts.fp, 1);
    EXPECT_EQ(m.counts.fn, 1);
}

TEST(Match, HigherScoreWinsTheOnlyGt) {
    const std::vector<Annotation> gts = {ann("a", {0, 0, 10, 10}, TreeClass::Infected)};
    const std::vector<Detection> dets = {
        det("a", {1, 0, 11, 10}, TreeClass::Infected, 0.8),  // input first, lower score
        det("a", {0, 1, 10, 11}, TreeClass::Infected, 0.9),
    };
    const MatchResult m = match(dets, gts, 0.5);
    EXPECT_FALSE(m.det_is_tp[0]);
    EXPECT_TRUE(m.det_is_tp[1]);
    EXPECT_EQ(m.counts.tp, 1);
    EXPECT_EQ(m.counts.fp, 1);
    EXPECT_EQ(m.counts.fn, 0);

    // brute force over both assignment orders confirms the greedy choice:
    // whichever detection is tried first can claim the gt, but the protocol
    // fixes score order, so the 0.9 detection must own it
    EXPECT_EQ(oracle::max_matching_size(dets, gts, 0.5), 1);
}

TEST(Match, ScoreTiesKeepInputOrder) {
    const std::vector<Annotation> gts = {ann("a", {0, 0, 10, 10}, TreeClass::Infected)};
    const std::vector<Detection> dets = {
        det("a", {0, 0, 10, 10}, TreeClass::Infected, 0.7),
        det("a", {0, 0, 10, 10}, TreeClass::Infected, 0.7),
    };
    const MatchResult m = match(dets, gts, 0.5);
    EXPECT_TRUE(m.det_is_tp[0]);
    EXPECT_FALSE(m.det_is_tp[1]);
}

TEST(Match, IouTiesGoToLowestGtIndex) {
    const std::vector<Annotation> gts = {
        ann("a", {0, 0, 10, 10}, TreeClass::Infected),
        ann("a", {20, 0, 30, 10}, TreeClass::Infected),
    };
    // equidistant detection straddling both equally would need overlap; use two
    // identical gts instead
    const std::vector<Annotation> twins = {
        ann("a", {0, 0, 10, 10}, TreeClass::Infected),
        ann("a", {0, 0, 10, 10}, TreeClass::Infected),
    };
    const std::vector<Detection> dets = {det("a", {0, 0, 10, 10}, TreeClass::Infected, 0.9)};
    const MatchResult m = match(dets, twins, 0.5);
    EXPECT_EQ(m.det_matched_gt[0], 0);
    (void)gts;
}

TEST(Match, ClassesAndImagesAreSegregated) {
    const std::vector<Annotation> gts = {ann("a", {0, 0, 10, 10}, TreeClass::Infected)};
    const std::vector<Detection> dets = {
        det("a", {0, 0, 10, 10}, TreeClass::Healthy, 0.9),  // wrong class
        det("b", {0, 0, 10, 10}, TreeClass::Infected, 0.9),  // wrong image
    };
    const MatchResult m = match(dets, gts, 0.5);
    EXPECT_EQ(m.counts.tp, 0);
    EXPECT_EQ(m.counts.fp, 2);
    EXPECT_EQ(m.counts.fn, 1);
}

// ---------------------------------------------------------------------------
// precision_recall
// ---------------------------------------------------------------------------

TEST(PrecisionRecall, Arithmetic) {
    const auto [p, r] = precision_recall({3, 1, 1});
    EXPECT_DOUBLE_EQ(p, 0.75);
    EXPECT_DOUBLE_EQ(r, 0.75);
}

TEST(PrecisionRecall, DegenerateZeroConvention) {
    const auto [p, r] = precision_recall({0, 0, 0});
    EXPECT_EQ(p, 0.0);
    EXPECT_EQ(r, 0.0);
}

TEST(PrecisionRecall, PerfectDetector) {
    const auto [p, r] = precision_recall({5, 0, 0});
    EXPECT_EQ(p, 1.0);
    EXPECT_EQ(r, 1.0);
}

// ---------------------------------------------------------------------------
// average_precision
// ---------------------------------------------------------------------------

TEST(AveragePrecision, PerfectDetectionsScoreOneAtEveryThreshold) {
    std::vector<Annotation> gts;
    std::vector<Detection> dets;
    for (int i = 0; i < 6; ++i) {
        const double x = i * 20.0;
        gts.push_back(ann("a", {x, 0, x + 10, 10}, TreeClass::Infected));
        dets.push_back(det("a", {x, 0, x + 10, 10}, TreeClass::Infected, 1.0));
    }
    for (double thr : kIouThresholds)
        EXPECT_DOUBLE_EQ(average_precision(dets, gts, TreeClass::Infected, thr), 1.0);
}

TEST(AveragePrecision, NoDetectionsGiveZero) {
    const std::vector<Annotation> gts = {ann("a", {0, 0, 10, 10}, TreeClass::Infected)};
    EXPECT_EQ(average_precision({}, gts, TreeClass::Infected, 0.5), 0.0);
}

TEST(AveragePrecision, TrailingFalsePositiveDoesNotHurt) {
    const std::vector<Annotation> gts = {ann("a", {0, 0, 10, 10}, TreeClass::Infected)};
    const std::vector<Detection> dets = {
        det("a", {0, 0, 10, 10}, TreeClass::Infected, 0.9),
        det("a", {50, 50, 60, 60}, TreeClass::Infected, 0.8),
    };
    EXPECT_DOUBLE_EQ(average_precision(dets, gts, TreeClass::Infected, 0.5), 1.0);
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

TEST(Evaluate, SelfEvaluationIsPerfect) {
    std::vector<Annotation> gts;
    std::vector<Detection> dets;
    std::mt19937 rng(51);
    std::uniform_real_distribution<double> pos(0.0, 200.0), len(5.0, 15.0);
    for (int i = 0; i < 20; ++i) {
        const double x = pos(rng), y = pos(rng), w = len(rng), h = len(rng);
        const TreeClass c = i % 2 ? TreeClass::Healthy : TreeClass::Infected;
        gts.push_back(ann("a", {x, y, x + w, y + h}, c));
        dets.push_back(det("a", {x, y, x + w, y + h}, c, 1.0));
    }
    const EvalReport rep = evaluate(dets, gts);
    EXPECT_DOUBLE_EQ(rep.precision, 1.0);
    EXPECT_DOUBLE_EQ(rep.recall, 1.0);
    EXPECT_DOUBLE_EQ(rep.map50, 1.0);
    EXPECT_DOUBLE_EQ(rep.map5095, 1.0);
}

TEST(Evaluate, EmptyDetectionsGiveAllZero) {
    const std::vector<Annotation> gts = {ann("a", {0, 0, 10, 10}, TreeClass::Infected),
                                         ann("a", {20, 0, 30, 10}, TreeClass::Healthy)};
    const EvalReport rep = evaluate({}, gts);
    EXPECT_EQ(rep.precision, 0.0);
    EXPECT_EQ(rep.recall, 0.0);
    EXPECT_EQ(rep.map50, 0.0);
    EXPECT_EQ(rep.map5095, 0.0);
    EXPECT_EQ(rep.counts.fn, 2);
}

TEST(Evaluate, MatchesOracleOnRandomInstances) {
    std::mt19937 rng(52);
    for (int trial = 0; trial < 100; ++trial) {
        const auto inst = oracle::random_instance(rng);
        for (double thr : kIouThresholds) {
            const MatchResult m = match(inst.dets, inst.gts, thr);
            const oracle::Counts c = oracle::counts(inst.dets, inst.gts, thr);
            ASSERT_EQ(m.counts.tp, c.tp) << "trial " << trial << " thr " << thr;
            ASSERT_EQ(m.counts.fp, c.fp);
            ASSERT_EQ(m.counts.fn, c.fn);
            for (TreeClass cls : {TreeClass::Infected, TreeClass::Healthy}) {
                const double got = average_precision(inst.dets, inst.gts, cls, thr);
                const double want = oracle::average_precision(inst.dets, inst.gts, cls, thr);
                ASSERT_NEAR(got, want, 1e-9);
            }
        }
    }
}

TEST(Evaluate, GreedyAttainsMaximumMatchingOnDisjointGts) {
    // when same-image same-class gts are mutually disjoint, no detection can
    // clear IoU 0.5 against two of them, so greedy must reach the maximum
    std::mt19937 rng(53);
    for (int trial = 0; trial < 60; ++trial) {
        const auto inst = oracle::random_instance(rng, /*disjoint_gts=*/true);
        if (inst.dets.size() > 8) continue;  // keep the exhaustive search cheap
        const MatchResult m = match(inst.dets, inst.gts, 0.5);
        EXPECT_EQ(m.counts.tp, oracle::max_matching_size(inst.dets, inst.gts, 0.5))
            << "trial " << trial;
    }
}

TEST(Evaluate, AddingFalsePositiveNeverHelpsPrecisionOrChangesRecall) {
    std::mt19937 rng(54);
    for (int trial = 0; trial < 50; ++trial) {
        auto inst = oracle::random_instance(rng);
        const MatchResult before = match(inst.dets, inst.gts, 0.5);
        // far-away box cannot match anything
        inst.dets.push_back(det("img0", {500, 500, 510, 510}, TreeClass::Infected, 0.99));
        const MatchResult after = match(inst.dets, inst.gts, 0.5);

        const auto [p0, r0] = precision_recall(before.counts);
        const auto [p1, r1] = precision_recall(after.counts);
        if (before.counts.tp > 0) {
            EXPECT_LE(p1, p0);
        }
        EXPECT_DOUBLE_EQ(r1, r0);
    }
}

TEST(Evaluate, RemovingUnmatchedGtNeverLowersRecall) {
    std::mt19937 rng(55);
    for (int trial = 0; trial < 50; ++trial) {
        auto inst = oracle::random_instance(rng);
        const MatchResult m = match(inst.dets, inst.gts, 0.5);
        long fn_index = -1;
        for (std::size_t i = 0; i < inst.gts.size(); ++i)
            if (!m.gt_matched[i]) {
                fn_index = static_cast<long>(i);
                break;
            }
        if (fn_index < 0) continue;
        const auto [p0, r0] = precision_recall(m.counts);
        inst.gts.erase(inst.gts.begin() + fn_index);
        const auto [p1, r1] = precision_recall(match(inst.dets, inst.gts, 0.5).counts);
        EXPECT_GE(r1, r0);
        (void)p0;
        (void)p1;
    }
}

TEST(Evaluate, ApMonotoneInThreshold) {
    std::mt19937 rng(56);
    for (int trial = 0; trial < 50; ++trial) {
        const auto inst = oracle::random_instance(rng);
        for (TreeClass cls : {TreeClass::Infected, TreeClass::Healthy}) {
            double prev = 2.0;
            for (double thr : kIouThresholds) {
                const double ap = average_precision(inst.dets, inst.gts, cls, thr);
                EXPECT_LE(ap, prev + 1e-12) << "thr " << thr;
                prev = ap;
            }
        }
    }
}

TEST(Evaluate, PermutationInvariantWithDistinctScores) {
    std::mt19937 rng(57);
    for (int trial = 0; trial < 20; ++trial) {
        auto inst = oracle::random_instance(rng);
        // force distinct scores
        std::vector<double> scores(inst.dets.size());
        for (std::size_t i = 0; i < scores.size(); ++i)
            scores[i] = (i + 1.0) / (scores.size() + 1.0);
        std::shuffle(scores.begin(), scores.end(), rng);
        for (std::size_t i = 0; i < scores.size(); ++i) inst.dets[i].score = scores[i];

        const EvalReport base = evaluate(inst.dets, inst.gts);
        auto shuffled = inst;
        std::shuffle(shuffled.dets.begin(), shuffled.dets.end(), rng);
        std::shuffle(shuffled.gts.begin(), shuffled.gts.end(), rng);
        const EvalReport perm = evaluate(shuffled.dets, shuffled.gts);

        EXPECT_DOUBLE_EQ(base.precision, perm.precision);
        EXPECT_DOUBLE_EQ(base.recall, perm.recall);
        EXPECT_NEAR(base.map50, perm.map50, 1e-12);
        EXPECT_NEAR(base.map5095, perm.map5095, 1e-12);
    }
}

TEST(Evaluate, MapAveragesOnlyClassesWithGroundTruth) {
    // single-class scene: a perfect detector must still reach mAP 1
    const std::vector<Annotation> gts = {ann("a", {0, 0, 10, 10}, TreeClass::Infected)};
    const std::vector<Detection> dets = {det("a", {0, 0, 10, 10}, TreeClass::Infected, 1.0)};
    const EvalReport rep = evaluate(dets, gts);
    EXPECT_DOUBLE_EQ(rep.map50, 1.0);
    EXPECT_DOUBLE_EQ(rep.map5095, 1.0);
}

TEST(Match, RejectsBadThreshold) {
    EXPECT_THROW(match({}, {}, 0.0), std::invalid_argument);
    EXPECT_THROW(match({}, {}, 1.5), std::invalid_argument);
}
