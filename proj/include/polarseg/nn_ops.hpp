#pragma once

#include "polarseg/rng.hpp"
#include "polarseg/tensor.hpp"

namespace polarseg {

enum class Mode { train, infer };

template <typename T>
TensorT<T> relu(const TensorT<T>& x);
// dx from the op's own output (relu is idempotent on its output sign pattern).
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& y, const TensorT<T>& dy);

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x);
template <typename T>
TensorT<T> sigmoid_backward(const TensorT<T>& y, const TensorT<T>& dy);

// Per-channel batch normalization over [N,H,W,C]. Train mode normalizes with
// biased batch statistics and updates the running estimates in place; infer
// mode reads the running estimates only.
template <typename T>
struct BatchNormCache {
    TensorT<T> x_hat;
    std::vector<T> inv_std;     // per channel
    std::vector<T> gamma;       // copy used by backward
    std::int64_t count = 0;     // N*H*W
};

template <typename T>
TensorT<T> batchnorm_forward(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                             TensorT<T>& running_mean, TensorT<T>& running_var, T eps, T momentum, Mode mode,
                             BatchNormCache<T>* cache);

template <typename T>
struct BatchNormGrads {
    TensorT<T> dx, dgamma, dbeta;
};

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const TensorT<T>& dy);

// Inverted dropout: kept elements scaled by 1/(1-rate) so expectations match
// infer mode. The mask doubles as the backward multiplier.
template <typename T>
TensorT<T> dropout_forward(const TensorT<T>& x, double rate, Mode mode, Rng& rng, TensorT<T>* mask_out);

template <typename T>
TensorT<T> dropout_backward(const TensorT<T>& mask, const TensorT<T>& dy);

// Bilinear interpolation with align-corners: source coordinate of output cell
// r is r*(H-1)/(out_h-1), so the corner samples reproduce exactly.
template <typename T>
TensorT<T> bilinear_upsample(const TensorT<T>& x, std::int64_t out_h, std::int64_t out_w);
template <typename T>
TensorT<T> bilinear_upsample_backward(const TensorT<T>& dy, std::int64_t in_h, std::int64_t in_w);

// Channel-axis concatenation of [(N,)H,W,Ca] and [(N,)H,W,Cb].
template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b);
template <typename T>
void split_channels(const TensorT<T>& dy, std::int64_t ca, std::int64_t cb, TensorT<T>* da, TensorT<T>* db);

// s <- rho*s + (1-rho)*g^2 ; p <- p - lr*g/sqrt(s+eps). State persists across steps.
template <typename T>
void rmsprop_step(TensorT<T>& param, const TensorT<T>& grad, TensorT<T>& state, T lr, T rho, T eps);

// Zero-mean / unit-variance over the whole tensor (per-frame input whitening).
template <typename T>
TensorT<T> standardize(const TensorT<T>& x);

}  // namespace polarseg
