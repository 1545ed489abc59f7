#include "polarseg/model.hpp"

#include <cmath>
#include <stdexcept>

#include "polarseg/kernels/kernels.hpp"

namespace polarseg {

ModelConfig ModelConfig::reduced_gradcheck() {
    ModelConfig c;
    c.input_hw = 16;
    c.input_channels = 1;
    c.col_kernel = 5;
    c.row_kernel = 3;
    c.encoder_channels = {6, 6, 8, 8, 8, 8, 10};
    c.dec_t1_channels = 8;
    c.dec_t2_channels = 6;
    c.dec_smooth_channels = 6;
    c.dec_wide_channels = 4;
    c.smooth_kernel_rows = 3;
    c.smooth_kernel_cols = 2;
    c.wide_kernel_rows = 6;
    c.dropout_rate = 0.0;  // checks need a deterministic graph
    return c;
}

void ModelConfig::validate() const {
    if (encoder_channels.size() != 7) throw std::invalid_argument("ModelConfig: expected 7 encoder layers");
    for (auto ch : encoder_channels)
        if (ch < 1) throw std::invalid_argument("ModelConfig: non-positive channel width");
    if (input_hw < 8 || input_hw % 8 != 0)
        throw std::invalid_argument("ModelConfig: input size must be a positive multiple of 8");
    if (input_channels < 1 || col_kernel < 1 || row_kernel < 1 || wide_kernel_rows < 1 || smooth_kernel_rows < 1 ||
        smooth_kernel_cols < 1)
        throw std::invalid_argument("ModelConfig: non-positive layer geometry");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw std::invalid_argument("ModelConfig: dropout rate in [0,1)");
    // The decoder narrows monotonically down to the head.
    const std::int64_t concat = encoder_channels[6] + encoder_channels[5];
    const std::int64_t chain[] = {concat, dec_t1_channels, dec_t2_channels, dec_smooth_channels, dec_wide_channels};
    for (std::size_t i = 1; i < std::size(chain); ++i)
        if (chain[i] > chain[i - 1]) throw std::invalid_argument("ModelConfig: decoder widths must be non-increasing");
}

std::vector<std::pair<std::int64_t, std::int64_t>> ModelConfig::encoder_shape_chain() const {
    std::vector<std::pair<std::int64_t, std::int64_t>> chain;
    std::int64_t h = input_hw, w = input_hw;
    for (int layer = 0; layer < 6; ++layer) {
        if (layer % 2 == 0) h = (h + 1) / 2;  // column-wise layers downsample rows
        else w = (w + 1) / 2;                 // row-wise layers downsample columns
        chain.emplace_back(h, w);
    }
    chain.emplace_back(h, w);  // 3x3 stride 1
    return chain;
}

template <typename T>
std::size_t PolarNetT<T>::add_param(const std::string& name, Shape shape, bool trainable) {
    ParamEntry<T> e;
    e.name = name;
    e.value = TensorT<T>(std::move(shape));
    e.trainable = trainable;
    params_.push_back(std::move(e));
    return params_.size() - 1;
}

template <typename T>
void PolarNetT<T>::init_conv_weights(Conv& conv, const std::string& name, bool sigmoid_act, Rng& rng) {
    const auto& s = conv.spec;
    const Shape w_shape = conv.transposed ? Shape{s.kernel_rows, s.kernel_cols, s.out_channels, s.in_channels}
                                          : Shape{s.kernel_rows, s.kernel_cols, s.in_channels, s.out_channels};
    conv.w = add_param(name + ".w", w_shape, true);
    conv.b = add_param(name + ".b", Shape{s.out_channels}, true);

    const double fan_in = static_cast<double>(s.kernel_rows * s.kernel_cols * s.in_channels);
    const double fan_out = static_cast<double>(s.kernel_rows * s.kernel_cols * s.out_channels);
    // He-uniform for ReLU layers, Xavier-uniform for the sigmoid layers.
    const double limit = sigmoid_act ? std::sqrt(6.0 / (fan_in + fan_out)) : std::sqrt(6.0 / fan_in);
    for (auto& v : params_[conv.w].value.data) v = static_cast<T>(rng.uniform(-limit, limit));
}

template <typename T>
PolarNetT<T>::PolarNetT(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const auto& ch = cfg_.encoder_channels;

    std::int64_t in_c = cfg_.input_channels;
    for (int i = 0; i < 7; ++i) {
        Conv& c = enc_[i];
        if (i == 6) {
            c.spec = ConvSpec{3, 3, 1, 1, in_c, ch[6], Padding::same};
        } else if (i % 2 == 0) {
            c.spec = ConvSpec{cfg_.col_kernel, 1, 2, 1, in_c, ch[static_cast<std::size_t>(i)], Padding::same};
        } else {
            c.spec = ConvSpec{1, cfg_.row_kernel, 1, 2, in_c, ch[static_cast<std::size_t>(i)], Padding::same};
        }
        init_conv_weights(c, "enc" + std::to_string(i + 1), false, rng);
        in_c = ch[static_cast<std::size_t>(i)];
    }

    const std::int64_t bn_channels[4] = {ch[1], ch[3], ch[5], cfg_.dec_smooth_channels};
    for (int i = 0; i < 4; ++i) {
        const std::string name = "bn" + std::to_string(i + 1);
        bn_[i].gamma = add_param(name + ".gamma", Shape{bn_channels[i]}, true);
        bn_[i].beta = add_param(name + ".beta", Shape{bn_channels[i]}, true);
        bn_[i].running_mean = add_param(name + ".running_mean", Shape{bn_channels[i]}, false);
        bn_[i].running_var = add_param(name + ".running_var", Shape{bn_channels[i]}, false);
        for (auto& v : params_[bn_[i].gamma].value.data) v = T(1);
        for (auto& v : params_[bn_[i].running_var].value.data) v = T(1);
    }

    const std::int64_t concat_c = ch[6] + ch[5];
    dec_t1_.spec = ConvSpec{1, cfg_.row_kernel, 1, 2, concat_c, cfg_.dec_t1_channels, Padding::same};
    dec_t1_.transposed = true;
    init_conv_weights(dec_t1_, "dec_t1", false, rng);

    dec_t2_.spec = ConvSpec{cfg_.col_kernel, 1, 2, 1, cfg_.dec_t1_channels, cfg_.dec_t2_channels, Padding::same};
    dec_t2_.transposed = true;
    init_conv_weights(dec_t2_, "dec_t2", false, rng);

    dec_smooth_.spec = ConvSpec{cfg_.smooth_kernel_rows, cfg_.smooth_kernel_cols, 1, 1,
                                cfg_.dec_t2_channels, cfg_.dec_smooth_channels, Padding::same};
    init_conv_weights(dec_smooth_, "dec_smooth", false, rng);

    dec_wide_.spec = ConvSpec{cfg_.wide_kernel_rows, 1, 1, 1, cfg_.dec_smooth_channels, cfg_.dec_wide_channels,
                              Padding::same};
    init_conv_weights(dec_wide_, "dec_wide", true, rng);

    const std::int64_t head_out = cfg_.head == HeadKind::sigmoid_1ch ? 1 : 2;
    head_.spec = ConvSpec{1, 1, 1, 1, cfg_.dec_wide_channels, head_out, Padding::same};
    init_conv_weights(head_, "head", true, rng);

    for (auto& p : params_)
        if (p.trainable) p.grad = TensorT<T>(p.value.shape);
}

template <typename T>
void PolarNetT<T>::zero_grads() {
    for (auto& p : params_)
        if (p.trainable) std::fill(p.grad.data.begin(), p.grad.data.end(), T(0));
}

template <typename T>
TensorT<T> PolarNetT<T>::run_conv(Conv& conv, const TensorT<T>& x, bool use_relu, bool keep_cache) {
    const auto& w = params_[conv.w].value;
    const auto& b = params_[conv.b].value;
    TensorT<T> y = conv.transposed ? transposed_conv2d(x, w, b, conv.spec) : conv2d(x, w, b, conv.spec);
    if (use_relu) y = relu(y);
    if (keep_cache) {
        conv.in = x;
        conv.out = y;
    }
    return y;
}

template <typename T>
TensorT<T> PolarNetT<T>::conv_backprop(Conv& conv, const TensorT<T>& dy, bool used_relu) {
    TensorT<T> d = used_relu ? relu_backward(conv.out, dy) : dy;
    const auto& w = params_[conv.w].value;
    ConvGrads<T> grads = conv.transposed ? transposed_conv2d_backward(conv.in, w, d, conv.spec)
                                         : conv2d_backward(conv.in, w, d, conv.spec);
    auto& kt = kernels::active_table<T>();
    kt.scale_add(params_[conv.w].grad.data.data(), grads.dw.data.data(), T(1), grads.dw.numel());
    kt.scale_add(params_[conv.b].grad.data.data(), grads.db.data.data(), T(1), grads.db.numel());
    conv.in = TensorT<T>();
    conv.out = TensorT<T>();
    return grads.dx;
}

template <typename T>
TensorT<T> PolarNetT<T>::forward(const TensorT<T>& x, Mode mode, Rng* rng) {
    if (x.rank() != 4 || x.dim(1) != cfg_.input_hw || x.dim(2) != cfg_.input_hw || x.dim(3) != cfg_.input_channels)
        throw std::invalid_argument("forward: expected [N," + std::to_string(cfg_.input_hw) + "," +
                                    std::to_string(cfg_.input_hw) + "," + std::to_string(cfg_.input_channels) +
                                    "], got " + shape_str(x.shape));
    const bool train = mode == Mode::train;
    if (train && cfg_.dropout_rate > 0.0 && rng == nullptr)
        throw std::invalid_argument("forward: train mode with dropout needs an rng");
    Rng fallback(0);
    if (rng == nullptr) rng = &fallback;

    const auto chain = cfg_.encoder_shape_chain();
    auto check_shape = [&](const TensorT<T>& t, std::size_t layer) {
        if (t.dim(1) != chain[layer].first || t.dim(2) != chain[layer].second)
            throw std::runtime_error("forward: layer " + std::to_string(layer + 1) + " produced " +
                                     shape_str(t.shape) + ", expected " + std::to_string(chain[layer].first) + "x" +
                                     std::to_string(chain[layer].second));
    };

    have_cache_ = train;
    cached_n_ = x.dim(0);
    TensorT<T> h = x;
    for (int i = 0; i < 6; ++i) {
        h = run_conv(enc_[i], h, true, train);
        check_shape(h, static_cast<std::size_t>(i));
        if (i % 2 == 1) {
            Norm& norm = bn_[i / 2];
            h = batchnorm_forward<T>(h, params_[norm.gamma].value, params_[norm.beta].value,
                                     params_[norm.running_mean].value, params_[norm.running_var].value,
                                     static_cast<T>(cfg_.bn_epsilon), static_cast<T>(cfg_.bn_momentum), mode,
                                     train ? &norm.cache : nullptr);
            Rng drop_rng = rng->split(static_cast<std::uint64_t>(i));
            h = dropout_forward<T>(h, train ? cfg_.dropout_rate : 0.0, mode, drop_rng,
                                   train ? &norm.dropout_mask : nullptr);
        }
    }
    if (train) skip_out_ = h;
    TensorT<T> l7 = run_conv(enc_[6], h, true, train);
    check_shape(l7, 6);
    TensorT<T> cat = concat_channels(l7, h);

    TensorT<T> d1 = run_conv(dec_t1_, cat, true, train);
    TensorT<T> d2 = run_conv(dec_t2_, d1, true, train);
    TensorT<T> sm = run_conv(dec_smooth_, d2, true, train);
    {
        Norm& norm = bn_[3];
        sm = batchnorm_forward<T>(sm, params_[norm.gamma].value, params_[norm.beta].value,
                                  params_[norm.running_mean].value, params_[norm.running_var].value,
                                  static_cast<T>(cfg_.bn_epsilon), static_cast<T>(cfg_.bn_momentum), mode,
                                  train ? &norm.cache : nullptr);
        Rng drop_rng = rng->split(9);
        sm = dropout_forward<T>(sm, train ? cfg_.dropout_rate : 0.0, mode, drop_rng,
                                train ? &norm.dropout_mask : nullptr);
    }

    // Final two layers carry sigmoid activations.
    TensorT<T> wide = run_conv(dec_wide_, sm, false, train);
    wide = sigmoid(wide);
    if (train) {
        wide_out_ = wide;
        dec_wide_.out = TensorT<T>();  // sigmoid output cached separately
    }

    TensorT<T> up = bilinear_upsample(wide, cfg_.input_hw, cfg_.input_hw);
    TensorT<T> z = run_conv(head_, up, false, train);
    if (train) {
        upsample_out_ = up;
        head_.out = TensorT<T>();
    }

    TensorT<T> probs(Shape{x.dim(0), cfg_.input_hw, cfg_.input_hw});
    if (cfg_.head == HeadKind::sigmoid_1ch) {
        TensorT<T> p = sigmoid(z);
        probs.data.assign(p.data.begin(), p.data.end());
        if (train) head_out_ = p;
    } else {
        // Two-channel softmax: p_open = sigmoid(z1 - z0).
        for (std::int64_t i = 0; i < probs.numel(); ++i) {
            const double z0 = z.data[static_cast<std::size_t>(2 * i)];
            const double z1 = z.data[static_cast<std::size_t>(2 * i + 1)];
            const double pv = 1.0 / (1.0 + std::exp(z0 - z1));
            probs.data[static_cast<std::size_t>(i)] = static_cast<T>(pv);
        }
        if (train) head_out_ = probs;
    }
    probs.require_finite("forward: non-finite activation (training divergence?)");
    return probs;
}

template <typename T>
TensorT<T> PolarNetT<T>::backward(const TensorT<T>& dprobs) {
    if (!have_cache_) throw std::runtime_error("backward: no cached train-mode forward");
    if (dprobs.rank() != 3 || dprobs.dim(0) != cached_n_)
        throw std::invalid_argument("backward: dprobs shape " + shape_str(dprobs.shape));
    have_cache_ = false;

    // Head activation.
    TensorT<T> dz;
    if (cfg_.head == HeadKind::sigmoid_1ch) {
        dz = TensorT<T>(Shape{cached_n_, cfg_.input_hw, cfg_.input_hw, 1});
        for (std::int64_t i = 0; i < dprobs.numel(); ++i) {
            const T p = head_out_.data[static_cast<std::size_t>(i)];
            dz.data[static_cast<std::size_t>(i)] = dprobs.data[static_cast<std::size_t>(i)] * p * (T(1) - p);
        }
    } else {
        dz = TensorT<T>(Shape{cached_n_, cfg_.input_hw, cfg_.input_hw, 2});
        for (std::int64_t i = 0; i < dprobs.numel(); ++i) {
            const T p = head_out_.data[static_cast<std::size_t>(i)];
            const T g = dprobs.data[static_cast<std::size_t>(i)] * p * (T(1) - p);
            dz.data[static_cast<std::size_t>(2 * i)] = -g;
            dz.data[static_cast<std::size_t>(2 * i + 1)] = g;
        }
    }
    head_out_ = TensorT<T>();

    TensorT<T> d_up = conv_backprop(head_, dz, false);
    TensorT<T> d_wide = bilinear_upsample_backward(d_up, wide_out_.dim(1), wide_out_.dim(2));
    upsample_out_ = TensorT<T>();
    d_wide = sigmoid_backward(wide_out_, d_wide);
    wide_out_ = TensorT<T>();

    TensorT<T> d_sm = conv_backprop(dec_wide_, d_wide, false);
    {
        Norm& norm = bn_[3];
        d_sm = dropout_backward(norm.dropout_mask, d_sm);
        norm.dropout_mask = TensorT<T>();
        auto g = batchnorm_backward(norm.cache, d_sm);
        norm.cache = BatchNormCache<T>{};
        auto& kt = kernels::active_table<T>();
        kt.scale_add(params_[norm.gamma].grad.data.data(), g.dgamma.data.data(), T(1), g.dgamma.numel());
        kt.scale_add(params_[norm.beta].grad.data.data(), g.dbeta.data.data(), T(1), g.dbeta.numel());
        d_sm = std::move(g.dx);
    }
    TensorT<T> d_d2 = conv_backprop(dec_smooth_, d_sm, true);
    TensorT<T> d_d1 = conv_backprop(dec_t2_, d_d2, true);
    TensorT<T> d_cat = conv_backprop(dec_t1_, d_d1, true);

    TensorT<T> d_l7, d_skip;
    split_channels(d_cat, cfg_.encoder_channels[6], cfg_.encoder_channels[5], &d_l7, &d_skip);
    TensorT<T> d_h = conv_backprop(enc_[6], d_l7, true);
    {
        auto& kt = kernels::active_table<T>();
        kt.scale_add(d_h.data.data(), d_skip.data.data(), T(1), d_h.numel());
    }
    skip_out_ = TensorT<T>();

    for (int i = 5; i >= 0; --i) {
        if (i % 2 == 1) {
            Norm& norm = bn_[i / 2];
            d_h = dropout_backward(norm.dropout_mask, d_h);
            norm.dropout_mask = TensorT<T>();
            auto g = batchnorm_backward(norm.cache, d_h);
            norm.cache = BatchNormCache<T>{};
            auto& kt = kernels::active_table<T>();
            kt.scale_add(params_[norm.gamma].grad.data.data(), g.dgamma.data.data(), T(1), g.dgamma.numel());
            kt.scale_add(params_[norm.beta].grad.data.data(), g.dbeta.data.data(), T(1), g.dbeta.numel());
            d_h = std::move(g.dx);
        }
        d_h = conv_backprop(enc_[i], d_h, true);
    }
    return d_h;
}

template <typename T>
std::int64_t PolarNetT<T>::param_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_)
        if (p.trainable) n += p.value.numel();
    return n;
}

template <typename T>
std::vector<std::pair<std::string, std::int64_t>> PolarNetT<T>::param_breakdown() const {
    std::vector<std::pair<std::string, std::int64_t>> out;
    for (const auto& p : params_)
        if (p.trainable) out.emplace_back(p.name, p.value.numel());
    return out;
}

template <typename T>
Tensor predict_mask(const TensorT<T>& probabilities) {
    for (const T& v : probabilities.data)
        if (!(v >= T(0) && v <= T(1)))
            throw std::invalid_argument("predict_mask: probability outside [0,1]");
    Tensor mask(probabilities.shape);
    for (std::size_t i = 0; i < probabilities.data.size(); ++i)
        mask.data[i] = probabilities.data[i] >= T(0.5) ? 1.0f : 0.0f;
    return mask;
}

template class PolarNetT<float>;
template class PolarNetT<double>;
template Tensor predict_mask<float>(const TensorT<float>&);
template Tensor predict_mask<double>(const TensorT<double>&);

}  // namespace polarseg
