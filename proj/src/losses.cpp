#include "polarseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace polarseg {

namespace {

struct FrameView {
    std::int64_t n_frames = 1;
    std::int64_t frame_size = 0;
};

template <typename T>
FrameView frame_view(const TensorT<T>& probs, const TensorT<T>& labels, const char* what) {
    check_same_shape(probs.shape, labels.shape, what);
    if (probs.rank() < 2) throw std::invalid_argument(std::string(what) + ": expected at least rank 2");
    FrameView v;
    if (probs.rank() == 2) {
        v.n_frames = 1;
        v.frame_size = probs.numel();
    } else {
        v.n_frames = probs.dim(0);
        v.frame_size = probs.numel() / v.n_frames;
    }
    if (v.n_frames == 0 || v.frame_size == 0) throw std::invalid_argument(std::string(what) + ": empty input");
    return v;
}

inline int label_of(double v) {
    if (v == 0.0) return 0;
    if (v == 1.0) return 1;
    throw std::invalid_argument("loss: labels must be exactly 0 or 1, got " + std::to_string(v));
}

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "smce_train") return LossKind::smce_train;
    if (s == "smce") return LossKind::smce;
    if (s == "lovasz") return LossKind::lovasz;
    throw std::invalid_argument("unknown loss '" + s + "' (expected smce_train|smce|lovasz)");
}

std::string loss_kind_to_string(LossKind k) {
    switch (k) {
        case LossKind::smce_train: return "smce_train";
        case LossKind::smce: return "smce";
        case LossKind::lovasz: return "lovasz";
    }
    return "?";
}

PixelLoss smce_pixel(double p_open, int label) {
    if (label != 0 && label != 1) throw std::invalid_argument("smce_pixel: label must be 0 or 1");
    const bool clamped = p_open < kProbClamp || p_open > 1.0 - kProbClamp;
    const double p = std::clamp(p_open, kProbClamp, 1.0 - kProbClamp);
    PixelLoss out;
    if (label == kClassOpen) {
        out.loss = -std::log(p);
        out.dp = clamped ? 0.0 : -1.0 / p;
    } else {
        out.loss = -std::log(1.0 - p);
        out.dp = clamped ? 0.0 : 1.0 / (1.0 - p);
    }
    return out;
}

template <typename T>
LossResult<T> smce_train_loss(const TensorT<T>& probs, const TensorT<T>& labels, const ClassWeights& weights) {
    const FrameView v = frame_view(probs, labels, "smce_train_loss");
    LossResult<T> out;
    out.dprobs = TensorT<T>(probs.shape);
    const double inv_frames = 1.0 / static_cast<double>(v.n_frames);

    for (std::int64_t f = 0; f < v.n_frames; ++f) {
        const std::int64_t base = f * v.frame_size;
        std::int64_t n_c[2] = {0, 0};
        double sum_smce[2] = {0.0, 0.0};
        for (std::int64_t i = 0; i < v.frame_size; ++i) {
            const int y = label_of(labels.data[static_cast<std::size_t>(base + i)]);
            const auto pl = smce_pixel(static_cast<double>(probs.data[static_cast<std::size_t>(base + i)]), y);
            ++n_c[y];
            sum_smce[y] += pl.loss;
        }
        for (int c = 0; c < 2; ++c) {
            if (n_c[c] == 0) continue;  // absent class contributes nothing
            const double mean_c = sum_smce[c] / static_cast<double>(n_c[c]);
            const double scale = std::exp(-weights.w[c]);
            out.loss += inv_frames * (scale * mean_c + std::abs(weights.w[c]));
            out.dw[c] += inv_frames * (-scale * mean_c + sign_of(weights.w[c]));
        }
        for (std::int64_t i = 0; i < v.frame_size; ++i) {
            const int y = label_of(labels.data[static_cast<std::size_t>(base + i)]);
            const auto pl = smce_pixel(static_cast<double>(probs.data[static_cast<std::size_t>(base + i)]), y);
            const double coeff = inv_frames * std::exp(-weights.w[y]) / static_cast<double>(n_c[y]);
            out.dprobs.data[static_cast<std::size_t>(base + i)] = static_cast<T>(coeff * pl.dp);
        }
    }
    return out;
}

template <typename T>
LossResult<T> smce_loss(const TensorT<T>& probs, const TensorT<T>& labels) {
    const FrameView v = frame_view(probs, labels, "smce_loss");
    LossResult<T> out;
    out.dprobs = TensorT<T>(probs.shape);
    const double coeff = 1.0 / static_cast<double>(v.n_frames * v.frame_size);
    for (std::int64_t i = 0; i < probs.numel(); ++i) {
        const int y = label_of(labels.data[static_cast<std::size_t>(i)]);
        const auto pl = smce_pixel(static_cast<double>(probs.data[static_cast<std::size_t>(i)]), y);
        out.loss += coeff * pl.loss;
        out.dprobs.data[static_cast<std::size_t>(i)] = static_cast<T>(coeff * pl.dp);
    }
    return out;
}

template <typename T>
LossResult<T> lovasz_loss(const TensorT<T>& probs, const TensorT<T>& labels) {
    const FrameView v = frame_view(probs, labels, "lovasz_loss");
    LossResult<T> out;
    out.dprobs = TensorT<T>(probs.shape);
    const double inv_frames = 1.0 / static_cast<double>(v.n_frames);

    std::vector<double> errors(static_cast<std::size_t>(v.frame_size));
    std::vector<std::int64_t> order(static_cast<std::size_t>(v.frame_size));

    for (std::int64_t f = 0; f < v.n_frames; ++f) {
        const std::int64_t base = f * v.frame_size;
        int present = 0;
        for (int c = 0; c < 2; ++c) {
            std::int64_t total_gt = 0;
            for (std::int64_t i = 0; i < v.frame_size; ++i)
                total_gt += label_of(labels.data[static_cast<std::size_t>(base + i)]) == c ? 1 : 0;
            if (total_gt > 0) ++present;
        }
        if (present == 0) continue;
        const double class_coeff = inv_frames / static_cast<double>(present);

        for (int c = 0; c < 2; ++c) {
            std::int64_t total_gt = 0;
            for (std::int64_t i = 0; i < v.frame_size; ++i) {
                const int y = label_of(labels.data[static_cast<std::size_t>(base + i)]);
                const double p = static_cast<double>(probs.data[static_cast<std::size_t>(base + i)]);
                const double p_c = c == kClassOpen ? p : 1.0 - p;
                errors[static_cast<std::size_t>(i)] = y == c ? 1.0 - p_c : p_c;
                total_gt += y == c ? 1 : 0;
            }
            if (total_gt == 0) continue;

            std::iota(order.begin(), order.end(), std::int64_t(0));
            // Descending by error with index tie-break for a deterministic sort.
            std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
                const double ea = errors[static_cast<std::size_t>(a)], eb = errors[static_cast<std::size_t>(b)];
                if (ea != eb) return ea > eb;
                return a < b;
            });

            // Lovasz gradient of the Jaccard set function along the sorted prefix.
            double inter = static_cast<double>(total_gt);
            double uni = static_cast<double>(total_gt);
            double prev_jaccard = 0.0;
            for (std::int64_t k = 0; k < v.frame_size; ++k) {
                const std::int64_t i = order[static_cast<std::size_t>(k)];
                const int y = label_of(labels.data[static_cast<std::size_t>(base + i)]);
                if (y == c) inter -= 1.0;
                else uni += 1.0;
                const double jaccard = 1.0 - inter / uni;
                const double g = jaccard - prev_jaccard;
                prev_jaccard = jaccard;
                out.loss += class_coeff * errors[static_cast<std::size_t>(i)] * g;
                const double derr = class_coeff * g;
                // d err / d p_open: err = (y==c ? 1-p_c : p_c), p_c = (c==1 ? p : 1-p).
                const double dp = (y == c ? -1.0 : 1.0) * (c == kClassOpen ? 1.0 : -1.0) * derr;
                out.dprobs.data[static_cast<std::size_t>(base + i)] += static_cast<T>(dp);
            }
        }
    }
    return out;
}

template <typename T>
LossResult<T> compute_loss(LossKind kind, const TensorT<T>& probs, const TensorT<T>& labels,
                           const ClassWeights& weights) {
    switch (kind) {
        case LossKind::smce_train: return smce_train_loss(probs, labels, weights);
        case LossKind::smce: return smce_loss(probs, labels);
        case LossKind::lovasz: return lovasz_loss(probs, labels);
    }
    throw std::invalid_argument("compute_loss: bad kind");
}

#define POLARSEG_INSTANTIATE(T)                                                                                \
    template LossResult<T> smce_train_loss<T>(const TensorT<T>&, const TensorT<T>&, const ClassWeights&);      \
    template LossResult<T> smce_loss<T>(const TensorT<T>&, const TensorT<T>&);                                 \
    template LossResult<T> lovasz_loss<T>(const TensorT<T>&, const TensorT<T>&);                               \
    template LossResult<T> compute_loss<T>(LossKind, const TensorT<T>&, const TensorT<T>&, const ClassWeights&);

POLARSEG_INSTANTIATE(float)
POLARSEG_INSTANTIATE(double)

#undef POLARSEG_INSTANTIATE

}  // namespace polarseg
