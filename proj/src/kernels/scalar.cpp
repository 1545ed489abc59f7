#include "polarseg/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "polarseg/parallel.hpp"

namespace polarseg::kernels {

namespace {

// y[n,oh,ow,co] = bias[co] + sum_{kh,kw,ci} x[n, oh*sh - pt + kh, ow*sw - pl + kw, ci] * w[kh,kw,ci,co]
template <typename T>
void conv_forward_scalar(const T* x, const T* w, const T* bias, T* y, const ConvGeom& g) {
    const std::int64_t x_row = g.in_w * g.in_c;
    const std::int64_t x_img = g.in_h * x_row;
    const std::int64_t y_row = g.out_w * g.out_c;
    const std::int64_t y_img = g.out_h * y_row;
    const std::int64_t w_tap = g.in_c * g.out_c;

    parallel_for(g.n * g.out_h, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<T> acc(static_cast<std::size_t>(g.out_c));
        for (std::int64_t r = lo; r < hi; ++r) {
            const std::int64_t n = r / g.out_h;
            const std::int64_t oh = r % g.out_h;
            for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
                if (bias) {
                    std::copy(bias, bias + g.out_c, acc.begin());
                } else {
                    std::fill(acc.begin(), acc.end(), T(0));
                }
                for (std::int64_t kh = 0; kh < g.kh; ++kh) {
                    const std::int64_t ih = oh * g.stride_h - g.pad_top + kh;
                    if (ih < 0 || ih >= g.in_h) continue;
                    for (std::int64_t kw = 0; kw < g.kw; ++kw) {
                        const std::int64_t iw = ow * g.stride_w - g.pad_left + kw;
                        if (iw < 0 || iw >= g.in_w) continue;
                        const T* xp = x + n * x_img + ih * x_row + iw * g.in_c;
                        const T* wp = w + (kh * g.kw + kw) * w_tap;
                        for (std::int64_t ci = 0; ci < g.in_c; ++ci) {
                            const T xv = xp[ci];
                            const T* wrow = wp + ci * g.out_c;
                            for (std::int64_t co = 0; co < g.out_c; ++co) acc[static_cast<std::size_t>(co)] += xv * wrow[co];
                        }
                    }
                }
                std::copy(acc.begin(), acc.end(), y + n * y_img + oh * y_row + ow * g.out_c);
            }
        }
    });
}

// dx[n,ih,iw,ci] = sum over (kh,kw,co) with oh = (ih + pt - kh)/sh, ow = (iw + pl - kw)/sw
// Gather form: every thread writes its own input rows, no scatter conflicts.
template <typename T>
void conv_backward_data_scalar(const T* dy, const T* w, T* dx, const ConvGeom& g) {
    const std::int64_t x_row = g.in_w * g.in_c;
    const std::int64_t x_img = g.in_h * x_row;
    const std::int64_t y_row = g.out_w * g.out_c;
    const std::int64_t y_img = g.out_h * y_row;
    const std::int64_t w_tap = g.in_c * g.out_c;

    parallel_for(g.n * g.in_h, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            const std::int64_t n = r / g.in_h;
            const std::int64_t ih = r % g.in_h;
            T* dxrow = dx + n * x_img + ih * x_row;
            std::fill(dxrow, dxrow + x_row, T(0));
            for (std::int64_t kh = 0; kh < g.kh; ++kh) {
                const std::int64_t oh_num = ih + g.pad_top - kh;
                if (oh_num < 0 || oh_num % g.stride_h != 0) continue;
                const std::int64_t oh = oh_num / g.stride_h;
                if (oh >= g.out_h) continue;
                for (std::int64_t kw = 0; kw < g.kw; ++kw) {
                    const T* wp = w + (kh * g.kw + kw) * w_tap;
                    for (std::int64_t iw = 0; iw < g.in_w; ++iw) {
                        const std::int64_t ow_num = iw + g.pad_left - kw;
                        if (ow_num < 0 || ow_num % g.stride_w != 0) continue;
                        const std::int64_t ow = ow_num / g.stride_w;
                        if (ow >= g.out_w) continue;
                        const T* dyp = dy + n * y_img + oh * y_row + ow * g.out_c;
                        T* dxp = dxrow + iw * g.in_c;
                        for (std::int64_t ci = 0; ci < g.in_c; ++ci) {
                            const T* wrow = wp + ci * g.out_c;
                            T acc = T(0);
                            for (std::int64_t co = 0; co < g.out_c; ++co) acc += dyp[co] * wrow[co];
                            dxp[ci] += acc;
                        }
                    }
                }
            }
        }
    });
}

// dw[kh,kw,ci,co] = sum_{n,oh,ow} x[n, oh*sh - pt + kh, ...] * dy[n,oh,ow,co]
// db[co] = sum dy. Per-thread accumulators merged in thread order keep the
// reduction deterministic.
template <typename T>
void conv_backward_weights_scalar(const T* x, const T* dy, T* dw, T* db, const ConvGeom& g) {
    const std::int64_t x_row = g.in_w * g.in_c;
    const std::int64_t x_img = g.in_h * x_row;
    const std::int64_t y_row = g.out_w * g.out_c;
    const std::int64_t y_img = g.out_h * y_row;
    const std::int64_t w_tap = g.in_c * g.out_c;
    const std::int64_t w_total = g.kh * g.kw * w_tap;

    const int nt = parallel_block_count();
    std::vector<std::vector<T>> dw_part(static_cast<std::size_t>(nt));
    std::vector<std::vector<T>> db_part(static_cast<std::size_t>(nt));

    parallel_for_blocks(g.n, [&](int block, std::int64_t lo, std::int64_t hi) {
        auto& dwp = dw_part[static_cast<std::size_t>(block)];
        auto& dbp = db_part[static_cast<std::size_t>(block)];
        dwp.assign(static_cast<std::size_t>(w_total), T(0));
        dbp.assign(static_cast<std::size_t>(g.out_c), T(0));
        for (std::int64_t n = lo; n < hi; ++n) {
            for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
                for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
                    const T* dyp = dy + n * y_img + oh * y_row + ow * g.out_c;
                    for (std::int64_t co = 0; co < g.out_c; ++co) dbp[static_cast<std::size_t>(co)] += dyp[co];
                    for (std::int64_t kh = 0; kh < g.kh; ++kh) {
                        const std::int64_t ih = oh * g.stride_h - g.pad_top + kh;
                        if (ih < 0 || ih >= g.in_h) continue;
                        for (std::int64_t kw = 0; kw < g.kw; ++kw) {
                            const std::int64_t iw = ow * g.stride_w - g.pad_left + kw;
                            if (iw < 0 || iw >= g.in_w) continue;
                            const T* xp = x + n * x_img + ih * x_row + iw * g.in_c;
                            T* dwp_tap = dwp.data() + (kh * g.kw + kw) * w_tap;
                            for (std::int64_t ci = 0; ci < g.in_c; ++ci) {
                                const T xv = xp[ci];
                                T* dwrow = dwp_tap + ci * g.out_c;
                                for (std::int64_t co = 0; co < g.out_c; ++co) dwrow[co] += xv * dyp[co];
                            }
                        }
                    }
                }
            }
        }
    });

    std::fill(dw, dw + w_total, T(0));
    std::fill(db, db + g.out_c, T(0));
    for (int b = 0; b < nt; ++b) {
        if (dw_part[static_cast<std::size_t>(b)].empty()) continue;
        const auto& dwp = dw_part[static_cast<std::size_t>(b)];
        const auto& dbp = db_part[static_cast<std::size_t>(b)];
        for (std::int64_t i = 0; i < w_total; ++i) dw[i] += dwp[static_cast<std::size_t>(i)];
        for (std::int64_t i = 0; i < g.out_c; ++i) db[i] += dbp[static_cast<std::size_t>(i)];
    }
}

template <typename T>
void relu_forward_scalar(const T* x, T* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward_scalar(const T* y, const T* dy, T* dx, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) dx[i] = y[i] > T(0) ? dy[i] : T(0);
}

template <typename T>
void rmsprop_update_scalar(T* p, const T* grad, T* s, std::int64_t n, T lr, T rho, T eps) {
    for (std::int64_t i = 0; i < n; ++i) {
        s[i] = rho * s[i] + (T(1) - rho) * grad[i] * grad[i];
        p[i] -= lr * grad[i] / std::sqrt(s[i] + eps);
    }
}

template <typename T>
void scale_add_scalar(T* dst, const T* src, T alpha, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) dst[i] += alpha * src[i];
}

template <typename T>
KernelTable<T> make_scalar_table() {
    KernelTable<T> t;
    t.conv_forward = &conv_forward_scalar<T>;
    t.conv_backward_data = &conv_backward_data_scalar<T>;
    t.conv_backward_weights = &conv_backward_weights_scalar<T>;
    t.relu_forward = &relu_forward_scalar<T>;
    t.relu_backward = &relu_backward_scalar<T>;
    t.rmsprop_update = &rmsprop_update_scalar<T>;
    t.scale_add = &scale_add_scalar<T>;
    t.backend = "scalar";
    return t;
}

}  // namespace

template <>
const KernelTable<float>& scalar_table<float>() {
    static const KernelTable<float> t = make_scalar_table<float>();
    return t;
}

template <>
const KernelTable<double>& scalar_table<double>() {
    static const KernelTable<double> t = make_scalar_table<double>();
    return t;
}

}  // namespace polarseg::kernels
