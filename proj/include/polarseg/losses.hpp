#pragma once

#include "polarseg/tensor.hpp"

namespace polarseg {

// Class indices: 0 = occupied, 1 = open.
inline constexpr int kClassOccupied = 0;
inline constexpr int kClassOpen = 1;

// Trainable per-class loss weights, updated by the optimizer alongside the
// network parameters and persisted in checkpoints. Initialized to zero.
struct ClassWeights {
    double w[2] = {0.0, 0.0};
};

enum class LossKind { smce_train, smce, lovasz };

LossKind loss_kind_from_string(const std::string& s);
std::string loss_kind_to_string(LossKind k);

// Probabilities are clamped into [kProbClamp, 1-kProbClamp] before the log so
// saturated sigmoids cannot produce infinities.
inline constexpr double kProbClamp = 1e-7;

struct PixelLoss {
    double loss = 0.0;
    double dp = 0.0;  // d loss / d p_open
};

// Cross-entropy of the 2-class distribution (1-p, p) against the label.
PixelLoss smce_pixel(double p_open, int label);

// Batched losses over open-probabilities [N,H,W] (or [H,W]) and {0,1} labels
// of the same shape. dprobs carries d(loss)/d(p_open) per pixel; dw is the
// gradient wrt the trainable class weights (zero for the untrainable losses).
template <typename T>
struct LossResult {
    double loss = 0.0;
    TensorT<T> dprobs;
    double dw[2] = {0.0, 0.0};
};

// Sum over classes of e^{-w_c} * (mean SMCE over pixels of class c) + |w_c|,
// computed per frame with that frame's class counts, then averaged over the
// batch. Classes absent from a frame contribute nothing for that frame.
template <typename T>
LossResult<T> smce_train_loss(const TensorT<T>& probs, const TensorT<T>& labels, const ClassWeights& weights);

// Plain softmax cross-entropy: per-pixel loss averaged over the whole frame,
// then over the batch.
template <typename T>
LossResult<T> smce_loss(const TensorT<T>& probs, const TensorT<T>& labels);

// Lovasz extension of the Jaccard loss on sorted per-pixel errors, averaged
// over classes present in the frame, then over the batch.
template <typename T>
LossResult<T> lovasz_loss(const TensorT<T>& probs, const TensorT<T>& labels);

template <typename T>
LossResult<T> compute_loss(LossKind kind, const TensorT<T>& probs, const TensorT<T>& labels,
                           const ClassWeights& weights);

}  // namespace polarseg
