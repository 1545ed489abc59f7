#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "polarseg/gradcheck.hpp"
#include "polarseg/losses.hpp"
#include "polarseg/metrics.hpp"
#include "polarseg/rng.hpp"

using namespace polarseg;

namespace {

TensorD random_probs(const Shape& s, Rng& rng, double lo = 0.05, double hi = 0.95) {
    TensorD t(s);
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

TensorD random_labels(const Shape& s, Rng& rng, double p_open = 0.5) {
    TensorD t(s);
    for (auto& v : t.data) v = rng.uniform() < p_open ? 1.0 : 0.0;
    return t;
}

// Independent evaluation of the Lovasz extension: the Jaccard set function is
// evaluated on each sorted prefix by explicit set counting instead of the
// incremental intersection/union bookkeeping the implementation uses.
double lovasz_oracle(const std::vector<double>& probs, const std::vector<int>& labels) {
    const std::int64_t n = static_cast<std::int64_t>(probs.size());
    double total = 0.0;
    int present = 0;
    for (int c = 0; c < 2; ++c) {
        if (std::count(labels.begin(), labels.end(), c) > 0) ++present;
    }
    if (present == 0) return 0.0;

    for (int c = 0; c < 2; ++c) {
        std::vector<std::int64_t> gt;
        for (std::int64_t i = 0; i < n; ++i)
            if (labels[static_cast<std::size_t>(i)] == c) gt.push_back(i);
        if (gt.empty()) continue;

        std::vector<double> m(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            const double pc = c == 1 ? probs[static_cast<std::size_t>(i)] : 1.0 - probs[static_cast<std::size_t>(i)];
            m[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)] == c ? 1.0 - pc : pc;
        }
        std::vector<std::int64_t> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
            if (m[static_cast<std::size_t>(a)] != m[static_cast<std::size_t>(b)])
                return m[static_cast<std::size_t>(a)] > m[static_cast<std::size_t>(b)];
            return a < b;
        });

        auto delta = [&](std::int64_t prefix_len) {
            // |S| / |G union S| by counting.
            if (prefix_len == 0) return 0.0;
            std::int64_t union_count = static_cast<std::int64_t>(gt.size());
            for (std::int64_t k = 0; k < prefix_len; ++k) {
                const std::int64_t i = order[static_cast<std::size_t>(k)];
                if (labels[static_cast<std::size_t>(i)] != c) ++union_count;  // outside G
            }
            return static_cast<double>(prefix_len) / static_cast<double>(union_count);
        };

        double loss_c = 0.0;
        for (std::int64_t k = 0; k < n; ++k)
            loss_c += m[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] * (delta(k + 1) - delta(k));
        total += loss_c;
    }
    return total / static_cast<double>(present);
}

}  // namespace

// ---------------------------------------------------------------------------
// smce_pixel

TEST(SmcePixel, TrivialValues) {
    EXPECT_NEAR(smce_pixel(1.0, 1).loss, 0.0, 1e-6);
    EXPECT_NEAR(smce_pixel(0.5, 1).loss, std::log(2.0), 1e-12);
    EXPECT_NEAR(smce_pixel(0.5, 0).loss, std::log(2.0), 1e-12);
    EXPECT_THROW(smce_pixel(0.5, 2), std::invalid_argument);
}

TEST(SmcePixel, GradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(700 + seed);
        const double p = rng.uniform(0.05, 0.95);
        for (int label = 0; label < 2; ++label) {
            auto f = [&](const std::vector<double>& v) { return smce_pixel(v[0], label).loss; };
            auto res = finite_diff_gradcheck(f, {p}, {smce_pixel(p, label).dp}, 1e-6);
            EXPECT_LT(res.max_rel_err, 1e-6) << "seed " << seed << " label " << label;
        }
    }
}

// ---------------------------------------------------------------------------
// smce_train (trainable class weights)

TEST(SmceTrain, ReducesToPerClassMeansAtZeroWeights) {
    Rng rng(41);
    TensorD probs = random_probs({2, 4, 4}, rng);
    TensorD labels = random_labels({2, 4, 4}, rng);
    auto got = smce_train_loss(probs, labels, ClassWeights{});

    double expected = 0.0;
    for (std::int64_t f = 0; f < 2; ++f) {
        double sum[2] = {0, 0};
        std::int64_t cnt[2] = {0, 0};
        for (std::int64_t i = 0; i < 16; ++i) {
            const int y = static_cast<int>(labels.data[static_cast<std::size_t>(f * 16 + i)]);
            sum[y] += smce_pixel(probs.data[static_cast<std::size_t>(f * 16 + i)], y).loss;
            ++cnt[y];
        }
        for (int c = 0; c < 2; ++c)
            if (cnt[c]) expected += sum[c] / static_cast<double>(cnt[c]);
    }
    expected /= 2.0;
    EXPECT_DOUBLE_EQ(got.loss, expected);
    EXPECT_EQ(got.dw[0] != 0.0 || got.dw[1] != 0.0, true);
}

TEST(SmceTrain, PerfectPredictionCostsOnlyTheClamp) {
    TensorD probs(Shape{4, 4}, 0.0);
    TensorD labels(Shape{4, 4}, 0.0);
    for (std::int64_t i = 0; i < 8; ++i) {
        probs.data[static_cast<std::size_t>(i)] = 1.0;
        labels.data[static_cast<std::size_t>(i)] = 1.0;
    }
    auto got = smce_train_loss(probs, labels, ClassWeights{});
    EXPECT_NEAR(got.loss, 2.0 * -std::log(1.0 - kProbClamp), 1e-12);
    EXPECT_LT(got.loss, 1e-6);
}

TEST(SmceTrain, WeightGradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(800 + seed);
        TensorD probs = random_probs({3, 5, 5}, rng);
        TensorD labels = random_labels({3, 5, 5}, rng);
        ClassWeights w;
        w.w[0] = rng.uniform(-0.5, 0.5);
        w.w[1] = rng.uniform(-0.5, 0.5);
        // Keep FD away from the |w| kink at zero.
        for (double& x : w.w)
            if (std::abs(x) < 1e-3) x = 0.1;

        auto base = smce_train_loss(probs, labels, w);
        auto f = [&](const std::vector<double>& v) {
            ClassWeights ww;
            ww.w[0] = v[0];
            ww.w[1] = v[1];
            return smce_train_loss(probs, labels, ww).loss;
        };
        auto res = finite_diff_gradcheck(f, {w.w[0], w.w[1]}, {base.dw[0], base.dw[1]}, 1e-6);
        EXPECT_LT(res.max_rel_err, 1e-6) << "seed " << seed;
    }
}

TEST(SmceTrain, ProbGradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(900 + seed);
        TensorD probs = random_probs({2, 3, 4}, rng);
        TensorD labels = random_labels({2, 3, 4}, rng);
        ClassWeights w;
        w.w[0] = 0.3;
        w.w[1] = -0.2;
        auto base = smce_train_loss(probs, labels, w);
        auto f = [&](const std::vector<double>& v) {
            TensorD pp = probs;
            pp.data = v;
            return smce_train_loss(pp, labels, w).loss;
        };
        auto res = finite_diff_gradcheck(f, probs.data, base.dprobs.data, 1e-6);
        EXPECT_LT(res.max_rel_err, 1e-6) << "seed " << seed;
    }
}

TEST(SmceTrain, ScanFindsMinimumAtLogMean) {
    // With equal per-class mean SMCE m, the loss over w_c is e^{-w} m + |w|,
    // minimized at w = ln(m) when ln(m) >= 0.
    Rng rng(42);
    TensorD probs(Shape{1, 2, 2}, 0.25);  // mean SMCE = -ln(0.25) ~ 1.386 for open labels
    TensorD labels(Shape{1, 2, 2}, 1.0);
    const double mean_smce = -std::log(0.25);
    const double w_star = std::log(mean_smce);
    ASSERT_GT(w_star, 0.0);
    double best_w = -2.0, best_loss = 1e100;
    for (double w = -2.0; w <= 2.0; w += 1e-3) {
        ClassWeights cw;
        cw.w[1] = w;
        const double l = smce_train_loss(probs, labels, cw).loss;
        if (l < best_loss) {
            best_loss = l;
            best_w = w;
        }
    }
    EXPECT_NEAR(best_w, w_star, 2e-3);
}

// ---------------------------------------------------------------------------
// plain smce

TEST(Smce, MeanOverAllPixels) {
    TensorD probs(Shape{2, 2}, 0.5);
    TensorD labels(Shape{2, 2}, 1.0);
    auto got = smce_loss(probs, labels);
    EXPECT_NEAR(got.loss, std::log(2.0), 1e-12);
}

TEST(Smce, GradientMatchesFiniteDifferences) {
    Rng rng(43);
    TensorD probs = random_probs({2, 4, 4}, rng);
    TensorD labels = random_labels({2, 4, 4}, rng);
    auto base = smce_loss(probs, labels);
    auto f = [&](const std::vector<double>& v) {
        TensorD pp = probs;
        pp.data = v;
        return smce_loss(pp, labels).loss;
    };
    auto res = finite_diff_gradcheck(f, probs.data, base.dprobs.data, 1e-6);
    EXPECT_LT(res.max_rel_err, 1e-6);
}

// ---------------------------------------------------------------------------
// lovasz

TEST(Lovasz, PerfectHardPredictionIsZero) {
    Rng rng(44);
    TensorD labels = random_labels({1, 4, 3}, rng);
    TensorD probs = labels;
    auto got = lovasz_loss(probs, labels);
    EXPECT_NEAR(got.loss, 0.0, 1e-12);
}

TEST(Lovasz, OneConfidentErrorShrinksWithFrameSize) {
    double prev = 2.0;
    for (std::int64_t n = 2; n <= 8; ++n) {
        TensorD labels(Shape{1, n}, 1.0);
        TensorD probs(Shape{1, n}, 1.0);
        probs.data[0] = 0.0;  // one wrong pixel with full confidence
        const double loss = lovasz_loss(probs, labels).loss;
        EXPECT_GT(loss, 0.0);
        EXPECT_LT(loss, prev) << "n=" << n;
        prev = loss;

        std::vector<int> lab(static_cast<std::size_t>(n), 1);
        EXPECT_NEAR(loss, lovasz_oracle(probs.data, lab), 1e-12);
    }
}

TEST(Lovasz, MatchesEnumerationOracleOnSmallFrames) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(1000 + seed);
        const std::int64_t n = 4 + static_cast<std::int64_t>(rng.uniform_index(9));  // up to 12 pixels
        TensorD probs = random_probs({1, n}, rng, 0.0, 1.0);
        TensorD labels = random_labels({1, n}, rng);
        std::vector<int> lab(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) lab[static_cast<std::size_t>(i)] = static_cast<int>(labels.data[static_cast<std::size_t>(i)]);
        const double got = lovasz_loss(probs, labels).loss;
        const double want = lovasz_oracle(probs.data, lab);
        EXPECT_NEAR(got, want, 1e-9) << "seed " << seed;
    }
}

TEST(Lovasz, HardPredictionsEqualOneMinusIouOnAllPatterns) {
    // Every hard prediction/label pattern on 6 pixels: the extension at a
    // hypercube vertex equals the Jaccard loss, i.e. mean over present
    // classes of (1 - IoU_c) from the confusion matrix.
    const std::int64_t n = 6;
    for (int lab_bits = 0; lab_bits < (1 << n); ++lab_bits) {
        for (int pred_bits = 0; pred_bits < (1 << n); ++pred_bits) {
            TensorD labels(Shape{1, n});
            TensorD probs(Shape{1, n});
            Tensor pred_mask(Shape{1, n}), label_mask(Shape{1, n});
            for (std::int64_t i = 0; i < n; ++i) {
                const int y = (lab_bits >> i) & 1;
                const int p = (pred_bits >> i) & 1;
                labels.data[static_cast<std::size_t>(i)] = y;
                probs.data[static_cast<std::size_t>(i)] = p;
                label_mask.data[static_cast<std::size_t>(i)] = static_cast<float>(y);
                pred_mask.data[static_cast<std::size_t>(i)] = static_cast<float>(p);
            }
            const double loss = lovasz_loss(probs, labels).loss;

            ConfusionMatrix cm;
            cm.accumulate(pred_mask, label_mask);
            double want = 0.0;
            int present = 0;
            for (int c = 0; c < 2; ++c) {
                const std::int64_t tp = cm.counts[c][c];
                const std::int64_t uni = cm.counts[c][c] + cm.counts[c][1 - c] + cm.counts[1 - c][c];
                std::int64_t total_gt = cm.counts[0][c] + cm.counts[1][c];
                if (total_gt == 0) continue;  // class absent from labels
                ++present;
                want += uni == 0 ? 0.0 : 1.0 - static_cast<double>(tp) / static_cast<double>(uni);
            }
            if (present == 0) continue;
            want /= static_cast<double>(present);
            ASSERT_NEAR(loss, want, 1e-9) << "labels " << lab_bits << " preds " << pred_bits;
            ASSERT_GE(loss, 0.0);
            ASSERT_LE(loss, 1.0);
        }
    }
}

TEST(Lovasz, GradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(1100 + seed);
        TensorD probs = random_probs({1, 10}, rng, 0.05, 0.95);
        TensorD labels = random_labels({1, 10}, rng);
        auto base = lovasz_loss(probs, labels);
        auto f = [&](const std::vector<double>& v) {
            TensorD pp = probs;
            pp.data = v;
            return lovasz_loss(pp, labels).loss;
        };
        // Small eps keeps the FD probe inside one linear region of the sort.
        auto res = finite_diff_gradcheck(f, probs.data, base.dprobs.data, 1e-7);
        EXPECT_LT(res.max_rel_err, 1e-5) << "seed " << seed;
    }
}

// ---------------------------------------------------------------------------
// shared properties

TEST(Losses, PermutationInvariantWithinFrame) {
    Rng rng(45);
    const std::int64_t n = 24;
    TensorD probs = random_probs({1, n}, rng);
    TensorD labels = random_labels({1, n}, rng);

    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (std::int64_t i = n - 1; i > 0; --i)
        std::swap(perm[static_cast<std::size_t>(i)], perm[rng.uniform_index(static_cast<std::uint64_t>(i + 1))]);
    TensorD probs_p(Shape{1, n}), labels_p(Shape{1, n});
    for (std::int64_t i = 0; i < n; ++i) {
        probs_p.data[static_cast<std::size_t>(i)] = probs.data[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
        labels_p.data[static_cast<std::size_t>(i)] = labels.data[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    }

    ClassWeights w;
    w.w[0] = 0.2;
    w.w[1] = -0.4;
    EXPECT_NEAR(smce_train_loss(probs, labels, w).loss, smce_train_loss(probs_p, labels_p, w).loss, 1e-12);
    EXPECT_NEAR(smce_loss(probs, labels).loss, smce_loss(probs_p, labels_p).loss, 1e-12);
    EXPECT_NEAR(lovasz_loss(probs, labels).loss, lovasz_loss(probs_p, labels_p).loss, 1e-12);
}
