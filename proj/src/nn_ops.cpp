#include "polarseg/nn_ops.hpp"
#include <algorithm>
#include <limits>

#include <cmath>
#include <stdexcept>

#include "polarseg/kernels/kernels.hpp"

namespace polarseg {

namespace {

template <typename T>
void split_nhwc(const Shape& s, std::int64_t* n, std::int64_t* h, std::int64_t* w, std::int64_t* c, const char* what) {
    if (s.size() == 4) {
        *n = s[0]; *h = s[1]; *w = s[2]; *c = s[3];
    } else if (s.size() == 3) {
        *n = 1; *h = s[0]; *w = s[1]; *c = s[2];
    } else {
        throw std::invalid_argument(std::string(what) + ": expected rank 3 or 4, got " + shape_str(s));
    }
}

}  // namespace

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    x.require_finite("relu");
    TensorT<T> y(x.shape);
    kernels::active_table<T>().relu_forward(x.data.data(), y.data.data(), x.numel());
    return y;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& y, const TensorT<T>& dy) {
    check_same_shape(y.shape, dy.shape, "relu_backward");
    TensorT<T> dx(y.shape);
    kernels::active_table<T>().relu_backward(y.data.data(), dy.data.data(), dx.data.data(), y.numel());
    return dx;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
    x.require_finite("sigmoid");
    TensorT<T> y(x.shape);
    // Output stays strictly inside (0,1) even where exp saturates.
    const T hi = T(1) - std::numeric_limits<T>::epsilon();
    const T lo = std::numeric_limits<T>::min();
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double v = static_cast<double>(x.data[i]);
        y.data[i] = std::clamp(static_cast<T>(1.0 / (1.0 + std::exp(-v))), lo, hi);
    }
    return y;
}

template <typename T>
TensorT<T> sigmoid_backward(const TensorT<T>& y, const TensorT<T>& dy) {
    check_same_shape(y.shape, dy.shape, "sigmoid_backward");
    TensorT<T> dx(y.shape);
    for (std::size_t i = 0; i < y.data.size(); ++i) dx.data[i] = dy.data[i] * y.data[i] * (T(1) - y.data[i]);
    return dx;
}

template <typename T>
TensorT<T> batchnorm_forward(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                             TensorT<T>& running_mean, TensorT<T>& running_var, T eps, T momentum, Mode mode,
                             BatchNormCache<T>* cache) {
    std::int64_t n, h, w, c;
    split_nhwc<T>(x.shape, &n, &h, &w, &c, "batchnorm");
    if (gamma.numel() != c || beta.numel() != c || running_mean.numel() != c || running_var.numel() != c)
        throw std::invalid_argument("batchnorm: channel mismatch, C=" + std::to_string(c));
    const std::int64_t count = n * h * w;
    if (count == 0) throw std::invalid_argument("batchnorm: zero batch");
    x.require_finite("batchnorm");

    std::vector<double> mean(static_cast<std::size_t>(c), 0.0);
    std::vector<double> var(static_cast<std::size_t>(c), 0.0);
    if (mode == Mode::train) {
        // Mean is accumulated relative to the first row so a constant channel
        // yields an exactly zero deviation (and thus output beta exactly).
        for (std::int64_t i = 0; i < count; ++i) {
            const T* xp = x.data.data() + i * c;
            for (std::int64_t ch = 0; ch < c; ++ch)
                mean[static_cast<std::size_t>(ch)] += static_cast<double>(xp[ch]) - static_cast<double>(x.data[static_cast<std::size_t>(ch)]);
        }
        for (std::int64_t ch = 0; ch < c; ++ch)
            mean[static_cast<std::size_t>(ch)] =
                mean[static_cast<std::size_t>(ch)] / static_cast<double>(count) + static_cast<double>(x.data[static_cast<std::size_t>(ch)]);
        for (std::int64_t i = 0; i < count; ++i) {
            const T* xp = x.data.data() + i * c;
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const double d = xp[ch] - mean[static_cast<std::size_t>(ch)];
                var[static_cast<std::size_t>(ch)] += d * d;
            }
        }
        for (auto& v : var) v /= static_cast<double>(count);
        for (std::int64_t ch = 0; ch < c; ++ch) {
            running_mean.data[static_cast<std::size_t>(ch)] =
                momentum * running_mean.data[static_cast<std::size_t>(ch)] + (T(1) - momentum) * static_cast<T>(mean[static_cast<std::size_t>(ch)]);
            running_var.data[static_cast<std::size_t>(ch)] =
                momentum * running_var.data[static_cast<std::size_t>(ch)] + (T(1) - momentum) * static_cast<T>(var[static_cast<std::size_t>(ch)]);
        }
    } else {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            mean[static_cast<std::size_t>(ch)] = running_mean.data[static_cast<std::size_t>(ch)];
            var[static_cast<std::size_t>(ch)] = running_var.data[static_cast<std::size_t>(ch)];
        }
    }

    std::vector<T> inv_std(static_cast<std::size_t>(c));
    for (std::int64_t ch = 0; ch < c; ++ch)
        inv_std[static_cast<std::size_t>(ch)] = static_cast<T>(1.0 / std::sqrt(var[static_cast<std::size_t>(ch)] + static_cast<double>(eps)));

    TensorT<T> y(x.shape);
    TensorT<T> x_hat;
    const bool keep_cache = cache != nullptr;
    if (keep_cache) x_hat = TensorT<T>(x.shape);
    for (std::int64_t i = 0; i < count; ++i) {
        const T* xp = x.data.data() + i * c;
        T* yp = y.data.data() + i * c;
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const std::size_t k = static_cast<std::size_t>(ch);
            const T xh = static_cast<T>((xp[ch] - mean[k]) * inv_std[k]);
            if (keep_cache) x_hat.data[static_cast<std::size_t>(i * c + ch)] = xh;
            yp[ch] = gamma.data[k] * xh + beta.data[k];
        }
    }
    if (keep_cache) {
        cache->x_hat = std::move(x_hat);
        cache->inv_std = std::move(inv_std);
        cache->gamma.assign(gamma.data.begin(), gamma.data.end());
        cache->count = count;
    }
    return y;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const TensorT<T>& dy) {
    const TensorT<T>& x_hat = cache.x_hat;
    check_same_shape(x_hat.shape, dy.shape, "batchnorm_backward");
    const std::int64_t c = static_cast<std::int64_t>(cache.inv_std.size());
    const std::int64_t count = cache.count;

    BatchNormGrads<T> g;
    g.dgamma = TensorT<T>(Shape{c});
    g.dbeta = TensorT<T>(Shape{c});
    g.dx = TensorT<T>(dy.shape);

    std::vector<double> sum_dy(static_cast<std::size_t>(c), 0.0);
    std::vector<double> sum_dy_xhat(static_cast<std::size_t>(c), 0.0);
    for (std::int64_t i = 0; i < count; ++i) {
        const T* dyp = dy.data.data() + i * c;
        const T* xhp = x_hat.data.data() + i * c;
        for (std::int64_t ch = 0; ch < c; ++ch) {
            sum_dy[static_cast<std::size_t>(ch)] += dyp[ch];
            sum_dy_xhat[static_cast<std::size_t>(ch)] += static_cast<double>(dyp[ch]) * xhp[ch];
        }
    }
    for (std::int64_t ch = 0; ch < c; ++ch) {
        g.dbeta.data[static_cast<std::size_t>(ch)] = static_cast<T>(sum_dy[static_cast<std::size_t>(ch)]);
        g.dgamma.data[static_cast<std::size_t>(ch)] = static_cast<T>(sum_dy_xhat[static_cast<std::size_t>(ch)]);
    }
    // dx = gamma*inv_std*(dy - mean(dy) - x_hat*mean(dy*x_hat)) with batch means.
    const double inv_count = 1.0 / static_cast<double>(count);
    for (std::int64_t i = 0; i < count; ++i) {
        const T* dyp = dy.data.data() + i * c;
        const T* xhp = x_hat.data.data() + i * c;
        T* dxp = g.dx.data.data() + i * c;
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const std::size_t k = static_cast<std::size_t>(ch);
            const double centered = dyp[ch] - sum_dy[k] * inv_count - xhp[ch] * sum_dy_xhat[k] * inv_count;
            dxp[ch] = static_cast<T>(cache.gamma[k] * cache.inv_std[k] * centered);
        }
    }
    return g;
}

template <typename T>
TensorT<T> dropout_forward(const TensorT<T>& x, double rate, Mode mode, Rng& rng, TensorT<T>* mask_out) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(rate));
    if (mode == Mode::infer || rate == 0.0) {
        if (mask_out) *mask_out = TensorT<T>(x.shape, T(1));
        return x;
    }
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    TensorT<T> mask(x.shape);
    TensorT<T> y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const bool keep = rng.uniform() >= rate;
        mask.data[i] = keep ? scale : T(0);
        y.data[i] = x.data[i] * mask.data[i];
    }
    if (mask_out) *mask_out = std::move(mask);
    return y;
}

template <typename T>
TensorT<T> dropout_backward(const TensorT<T>& mask, const TensorT<T>& dy) {
    check_same_shape(mask.shape, dy.shape, "dropout_backward");
    TensorT<T> dx(dy.shape);
    for (std::size_t i = 0; i < dy.data.size(); ++i) dx.data[i] = dy.data[i] * mask.data[i];
    return dx;
}

namespace {

struct LerpIndex {
    std::int64_t lo, hi;
    double w_hi;
};

inline LerpIndex lerp_index(std::int64_t out_i, std::int64_t out_n, std::int64_t in_n) {
    if (in_n == 1 || out_n == 1) return {0, 0, 0.0};
    const double src = static_cast<double>(out_i) * static_cast<double>(in_n - 1) / static_cast<double>(out_n - 1);
    std::int64_t lo = static_cast<std::int64_t>(src);
    if (lo >= in_n - 1) lo = in_n - 2;
    return {lo, lo + 1, src - static_cast<double>(lo)};
}

}  // namespace

template <typename T>
TensorT<T> bilinear_upsample(const TensorT<T>& x, std::int64_t out_h, std::int64_t out_w) {
    std::int64_t n, h, w, c;
    split_nhwc<T>(x.shape, &n, &h, &w, &c, "bilinear_upsample");
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("bilinear_upsample: empty output");
    if (out_h < h || out_w < w) throw std::invalid_argument("bilinear_upsample: output smaller than input");

    Shape os = x.shape;
    os[os.size() - 3] = out_h;
    os[os.size() - 2] = out_w;
    TensorT<T> y(os);
    const std::int64_t x_img = h * w * c, y_img = out_h * out_w * c;
    for (std::int64_t b = 0; b < n; ++b) {
        for (std::int64_t oy = 0; oy < out_h; ++oy) {
            const LerpIndex ry = lerp_index(oy, out_h, h);
            for (std::int64_t ox = 0; ox < out_w; ++ox) {
                const LerpIndex rx = lerp_index(ox, out_w, w);
                const T* x00 = x.data.data() + b * x_img + (ry.lo * w + rx.lo) * c;
                const T* x01 = x.data.data() + b * x_img + (ry.lo * w + rx.hi) * c;
                const T* x10 = x.data.data() + b * x_img + (ry.hi * w + rx.lo) * c;
                const T* x11 = x.data.data() + b * x_img + (ry.hi * w + rx.hi) * c;
                T* yp = y.data.data() + b * y_img + (oy * out_w + ox) * c;
                const double w00 = (1.0 - ry.w_hi) * (1.0 - rx.w_hi);
                const double w01 = (1.0 - ry.w_hi) * rx.w_hi;
                const double w10 = ry.w_hi * (1.0 - rx.w_hi);
                const double w11 = ry.w_hi * rx.w_hi;
                for (std::int64_t ch = 0; ch < c; ++ch)
                    yp[ch] = static_cast<T>(w00 * x00[ch] + w01 * x01[ch] + w10 * x10[ch] + w11 * x11[ch]);
            }
        }
    }
    return y;
}

template <typename T>
TensorT<T> bilinear_upsample_backward(const TensorT<T>& dy, std::int64_t in_h, std::int64_t in_w) {
    std::int64_t n, oh, ow, c;
    split_nhwc<T>(dy.shape, &n, &oh, &ow, &c, "bilinear_upsample_backward");
    Shape is = dy.shape;
    is[is.size() - 3] = in_h;
    is[is.size() - 2] = in_w;
    TensorT<T> dx(is);
    const std::int64_t x_img = in_h * in_w * c, y_img = oh * ow * c;
    for (std::int64_t b = 0; b < n; ++b) {
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            const LerpIndex ry = lerp_index(oy, oh, in_h);
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                const LerpIndex rx = lerp_index(ox, ow, in_w);
                const T* dyp = dy.data.data() + b * y_img + (oy * ow + ox) * c;
                T* d00 = dx.data.data() + b * x_img + (ry.lo * in_w + rx.lo) * c;
                T* d01 = dx.data.data() + b * x_img + (ry.lo * in_w + rx.hi) * c;
                T* d10 = dx.data.data() + b * x_img + (ry.hi * in_w + rx.lo) * c;
                T* d11 = dx.data.data() + b * x_img + (ry.hi * in_w + rx.hi) * c;
                const double w00 = (1.0 - ry.w_hi) * (1.0 - rx.w_hi);
                const double w01 = (1.0 - ry.w_hi) * rx.w_hi;
                const double w10 = ry.w_hi * (1.0 - rx.w_hi);
                const double w11 = ry.w_hi * rx.w_hi;
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    d00[ch] += static_cast<T>(w00 * dyp[ch]);
                    d01[ch] += static_cast<T>(w01 * dyp[ch]);
                    d10[ch] += static_cast<T>(w10 * dyp[ch]);
                    d11[ch] += static_cast<T>(w11 * dyp[ch]);
                }
            }
        }
    }
    return dx;
}

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    std::int64_t na, ha, wa, ca, nb, hb, wb, cb;
    split_nhwc<T>(a.shape, &na, &ha, &wa, &ca, "concat_channels");
    split_nhwc<T>(b.shape, &nb, &hb, &wb, &cb, "concat_channels");
    if (na != nb || ha != hb || wa != wb || a.rank() != b.rank())
        throw std::invalid_argument("concat_channels: spatial mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    Shape os = a.shape;
    os.back() = ca + cb;
    TensorT<T> out(os);
    const std::int64_t cells = na * ha * wa;
    for (std::int64_t i = 0; i < cells; ++i) {
        const T* ap = a.data.data() + i * ca;
        const T* bp = b.data.data() + i * cb;
        T* op = out.data.data() + i * (ca + cb);
        std::copy(ap, ap + ca, op);
        std::copy(bp, bp + cb, op + ca);
    }
    return out;
}

template <typename T>
void split_channels(const TensorT<T>& dy, std::int64_t ca, std::int64_t cb, TensorT<T>* da, TensorT<T>* db) {
    std::int64_t n, h, w, c;
    split_nhwc<T>(dy.shape, &n, &h, &w, &c, "split_channels");
    if (c != ca + cb) throw std::invalid_argument("split_channels: channel mismatch");
    Shape sa = dy.shape, sb = dy.shape;
    sa.back() = ca;
    sb.back() = cb;
    *da = TensorT<T>(sa);
    *db = TensorT<T>(sb);
    const std::int64_t cells = n * h * w;
    for (std::int64_t i = 0; i < cells; ++i) {
        const T* dp = dy.data.data() + i * c;
        std::copy(dp, dp + ca, da->data.data() + i * ca);
        std::copy(dp + ca, dp + c, db->data.data() + i * cb);
    }
}

template <typename T>
void rmsprop_step(TensorT<T>& param, const TensorT<T>& grad, TensorT<T>& state, T lr, T rho, T eps) {
    if (lr <= T(0)) throw std::invalid_argument("rmsprop_step: lr must be positive");
    check_same_shape(param.shape, grad.shape, "rmsprop_step");
    check_same_shape(param.shape, state.shape, "rmsprop_step(state)");
    grad.require_finite("rmsprop_step");
    kernels::active_table<T>().rmsprop_update(param.data.data(), grad.data.data(), state.data.data(), param.numel(),
                                              lr, rho, eps);
}

template <typename T>
TensorT<T> standardize(const TensorT<T>& x) {
    double mean = 0.0;
    for (const T& v : x.data) mean += v;
    mean /= static_cast<double>(x.data.size());
    double var = 0.0;
    for (const T& v : x.data) {
        const double d = v - mean;
        var += d * d;
    }
    var /= static_cast<double>(x.data.size());
    const double inv = 1.0 / std::sqrt(var + 1e-12);
    TensorT<T> y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = static_cast<T>((x.data[i] - mean) * inv);
    return y;
}

#define POLARSEG_INSTANTIATE(T)                                                                                      \
    template TensorT<T> relu<T>(const TensorT<T>&);                                                                 \
    template TensorT<T> relu_backward<T>(const TensorT<T>&, const TensorT<T>&);                                     \
    template TensorT<T> sigmoid<T>(const TensorT<T>&);                                                              \
    template TensorT<T> sigmoid_backward<T>(const TensorT<T>&, const TensorT<T>&);                                  \
    template TensorT<T> batchnorm_forward<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, TensorT<T>&,  \
                                             TensorT<T>&, T, T, Mode, BatchNormCache<T>*);                          \
    template BatchNormGrads<T> batchnorm_backward<T>(const BatchNormCache<T>&, const TensorT<T>&);                  \
    template TensorT<T> dropout_forward<T>(const TensorT<T>&, double, Mode, Rng&, TensorT<T>*);                     \
    template TensorT<T> dropout_backward<T>(const TensorT<T>&, const TensorT<T>&);                                  \
    template TensorT<T> bilinear_upsample<T>(const TensorT<T>&, std::int64_t, std::int64_t);                        \
    template TensorT<T> bilinear_upsample_backward<T>(const TensorT<T>&, std::int64_t, std::int64_t);               \
    template TensorT<T> concat_channels<T>(const TensorT<T>&, const TensorT<T>&);                                   \
    template void split_channels<T>(const TensorT<T>&, std::int64_t, std::int64_t, TensorT<T>*, TensorT<T>*);       \
    template void rmsprop_step<T>(TensorT<T>&, const TensorT<T>&, TensorT<T>&, T, T, T);                            \
    template TensorT<T> standardize<T>(const TensorT<T>&);

POLARSEG_INSTANTIATE(float)
POLARSEG_INSTANTIATE(double)

#undef POLARSEG_INSTANTIATE

}  // namespace polarseg
