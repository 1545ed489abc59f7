#include <gtest/gtest.h>

#include "polarseg/metrics.hpp"
#include "polarseg/rng.hpp"

using namespace polarseg;

namespace {

Tensor random_mask(const Shape& s, Rng& rng, double p_open = 0.5) {
    Tensor t(s);
    for (auto& v : t.data) v = rng.uniform() < p_open ? 1.0f : 0.0f;
    return t;
}

}  // namespace

TEST(ConfusionMatrix, IdenticalMasksHaveZeroOffDiagonals) {
    Rng rng(51);
    auto m = random_mask({16, 16}, rng);
    ConfusionMatrix cm;
    cm.accumulate(m, m);
    EXPECT_EQ(cm.counts[0][1], 0);
    EXPECT_EQ(cm.counts[1][0], 0);
    EXPECT_EQ(cm.total(), 256);
}

TEST(ConfusionMatrix, ComplementMasksHaveZeroDiagonals) {
    Rng rng(52);
    auto m = random_mask({16, 16}, rng);
    Tensor inv(m.shape);
    for (std::size_t i = 0; i < m.data.size(); ++i) inv.data[i] = 1.0f - m.data[i];
    ConfusionMatrix cm;
    cm.accumulate(inv, m);
    EXPECT_EQ(cm.counts[0][0], 0);
    EXPECT_EQ(cm.counts[1][1], 0);
}

TEST(ConfusionMatrix, MatchesNaiveLoopCounts) {
    Rng rng(53);
    auto pred = random_mask({20, 20}, rng, 0.4);
    auto actual = random_mask({20, 20}, rng, 0.6);
    ConfusionMatrix cm;
    cm.accumulate(pred, actual);
    std::int64_t want[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < pred.data.size(); ++i)
        ++want[pred.data[i] >= 0.5f ? 1 : 0][actual.data[i] >= 0.5f ? 1 : 0];
    for (int p = 0; p < 2; ++p)
        for (int a = 0; a < 2; ++a) EXPECT_EQ(cm.counts[p][a], want[p][a]);
    ConfusionMatrix other = cm;
    other.merge(cm);
    EXPECT_EQ(other.total(), 2 * cm.total());
    Tensor bad(Shape{3, 3});
    EXPECT_THROW(cm.accumulate(bad, actual), std::invalid_argument);
}

TEST(MeanIou, PerfectAndWorstCases) {
    Rng rng(54);
    auto m = random_mask({16, 16}, rng);
    ConfusionMatrix cm;
    cm.accumulate(m, m);
    EXPECT_DOUBLE_EQ(mean_iou(cm).mean_iou, 1.0);

    Tensor inv(m.shape);
    for (std::size_t i = 0; i < m.data.size(); ++i) inv.data[i] = 1.0f - m.data[i];
    ConfusionMatrix bad;
    bad.accumulate(inv, m);
    EXPECT_DOUBLE_EQ(mean_iou(bad).mean_iou, 0.0);
}

TEST(MeanIou, DirectFormulaExample) {
    ConfusionMatrix cm;
    cm.counts[0][0] = 30;
    cm.counts[0][1] = 10;
    cm.counts[1][0] = 10;
    cm.counts[1][1] = 50;
    auto rep = mean_iou(cm);
    EXPECT_NEAR(rep.iou[0], 0.6, 1e-12);
    EXPECT_NEAR(rep.iou[1], 50.0 / 70.0, 1e-12);
    EXPECT_NEAR(rep.mean_iou, (0.6 + 50.0 / 70.0) / 2.0, 1e-12);
}

TEST(MeanIou, ClassRelabelingSymmetry) {
    ConfusionMatrix cm;
    cm.counts[0][0] = 12;
    cm.counts[0][1] = 3;
    cm.counts[1][0] = 7;
    cm.counts[1][1] = 40;
    ConfusionMatrix swapped;
    swapped.counts[0][0] = cm.counts[1][1];
    swapped.counts[0][1] = cm.counts[1][0];
    swapped.counts[1][0] = cm.counts[0][1];
    swapped.counts[1][1] = cm.counts[0][0];
    EXPECT_DOUBLE_EQ(mean_iou(cm).mean_iou, mean_iou(swapped).mean_iou);
}

TEST(MeanIou, CorruptingACorrectPixelNeverHelps) {
    Rng rng(55);
    auto labels = random_mask({12, 12}, rng);
    auto pred = labels;
    ConfusionMatrix cm;
    cm.accumulate(pred, labels);
    double prev = mean_iou(cm).mean_iou;
    for (int k = 0; k < 20; ++k) {
        const std::size_t i = rng.uniform_index(pred.data.size());
        if (pred.data[i] != labels.data[i]) continue;
        pred.data[i] = 1.0f - pred.data[i];
        ConfusionMatrix next;
        next.accumulate(pred, labels);
        const double now = mean_iou(next).mean_iou;
        EXPECT_LE(now, prev + 1e-12);
        prev = now;
    }
}

TEST(MeanIou, EmptyUnionClassExcluded) {
    // All pixels are open and predicted open: occupied has an empty union.
    ConfusionMatrix cm;
    cm.counts[1][1] = 100;
    auto rep = mean_iou(cm);
    EXPECT_FALSE(rep.present[0]);
    EXPECT_TRUE(rep.present[1]);
    EXPECT_DOUBLE_EQ(rep.mean_iou, 1.0);
    ConfusionMatrix empty;
    EXPECT_THROW(mean_iou(empty), std::invalid_argument);
}
