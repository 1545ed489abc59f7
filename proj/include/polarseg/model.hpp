#pragma once

#include <string>
#include <vector>

#include "polarseg/conv.hpp"
#include "polarseg/nn_ops.hpp"
#include "polarseg/rng.hpp"
#include "polarseg/tensor.hpp"

namespace polarseg {

enum class HeadKind { sigmoid_1ch, softmax_2ch };

// Seven-layer encoder (three column-wise + three row-wise strided 1-d convs
// interleaved, then a 3x3), skip concat of layers 7 and 6, and a decoder of
// two transposed convs, a 5x2 smoothing conv, a 32x1 wide-receptive-field
// conv, bilinear upsampling back to the input size and a 1x1 head.
struct ModelConfig {
    std::int64_t input_hw = 128;
    std::int64_t input_channels = 1;  // 1 = RA map, 64 = RAD cube as channels
    std::int64_t col_kernel = 9;      // column-wise kernels are k x 1
    std::int64_t row_kernel = 5;      // row-wise kernels are 1 x k
    std::vector<std::int64_t> encoder_channels = {64, 64, 96, 96, 96, 96, 128};
    std::int64_t dec_t1_channels = 96;
    std::int64_t dec_t2_channels = 64;
    std::int64_t dec_smooth_channels = 32;
    std::int64_t dec_wide_channels = 16;
    std::int64_t smooth_kernel_rows = 5, smooth_kernel_cols = 2;
    std::int64_t wide_kernel_rows = 32;
    double dropout_rate = 0.5;
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.9;
    HeadKind head = HeadKind::sigmoid_1ch;

    static ModelConfig ra_default() { return ModelConfig{}; }
    static ModelConfig rad_default() {
        ModelConfig c;
        c.input_channels = 64;
        return c;
    }
    // Desk-size network for end-to-end double-precision gradient checks.
    static ModelConfig reduced_gradcheck();

    void validate() const;
    // Spatial sizes after each encoder layer, [hw] -> ... -> [h7,w7].
    std::vector<std::pair<std::int64_t, std::int64_t>> encoder_shape_chain() const;
};

template <typename T>
struct ParamEntry {
    std::string name;
    TensorT<T> value;
    TensorT<T> grad;
    bool trainable = true;
};

template <typename T>
class PolarNetT {
public:
    PolarNetT(const ModelConfig& cfg, Rng& rng);

    // x: [N,H,W,Cin]. Returns open-space probabilities [N,H,W]. Train mode
    // applies dropout (drawing masks from rng) and batch statistics, and
    // caches activations for backward; infer mode is a pure function of
    // (params, x).
    TensorT<T> forward(const TensorT<T>& x, Mode mode, Rng* rng = nullptr);

    // dprobs: [N,H,W] gradient of the scalar loss wrt the probabilities.
    // Accumulates parameter gradients and returns the gradient wrt the input;
    // requires a preceding train-mode forward.
    TensorT<T> backward(const TensorT<T>& dprobs);

    std::vector<ParamEntry<T>>& params() { return params_; }
    const std::vector<ParamEntry<T>>& params() const { return params_; }
    void zero_grads();

    std::int64_t param_count() const;  // trainable parameters only
    std::vector<std::pair<std::string, std::int64_t>> param_breakdown() const;

    const ModelConfig& config() const { return cfg_; }

private:
    struct Conv {
        ConvSpec spec;
        std::size_t w = 0, b = 0;
        bool transposed = false;
        TensorT<T> in, out;  // cached for backward (train mode only)
    };
    struct Norm {
        std::size_t gamma = 0, beta = 0, running_mean = 0, running_var = 0;
        BatchNormCache<T> cache;
        TensorT<T> dropout_mask;
    };

    std::size_t add_param(const std::string& name, Shape shape, bool trainable);
    void init_conv_weights(Conv& conv, const std::string& name, bool sigmoid_act, Rng& rng);
    TensorT<T> run_conv(Conv& conv, const TensorT<T>& x, bool use_relu, bool keep_cache);
    TensorT<T> conv_backprop(Conv& conv, const TensorT<T>& dy, bool used_relu);

    ModelConfig cfg_;
    std::vector<ParamEntry<T>> params_;
    Conv enc_[7];
    Norm bn_[4];
    Conv dec_t1_, dec_t2_, dec_smooth_, dec_wide_, head_;

    // backward bookkeeping
    bool have_cache_ = false;
    TensorT<T> skip_out_;                    // concat input from layer 6
    TensorT<T> wide_out_, upsample_out_, head_out_;
    std::int64_t cached_n_ = 0;
};

using PolarNet = PolarNetT<float>;

// probability >= 0.5 counts as open (1).
template <typename T>
Tensor predict_mask(const TensorT<T>& probabilities);

}  // namespace polarseg
