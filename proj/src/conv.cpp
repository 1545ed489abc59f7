#include "polarseg/conv.hpp"

#include <stdexcept>

namespace polarseg {

namespace {

using kernels::ConvGeom;

struct RankInfo {
    bool batched;
    std::int64_t n, h, w, c;
};

RankInfo split_rank(const Shape& s, const char* what) {
    if (s.size() == 3) return {false, 1, s[0], s[1], s[2]};
    if (s.size() == 4) return {true, s[0], s[1], s[2], s[3]};
    throw std::invalid_argument(std::string(what) + ": expected rank 3 or 4, got " + shape_str(s));
}

template <typename T>
void validate_conv_inputs(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, const ConvSpec& spec,
                          std::int64_t w_dim2, std::int64_t w_dim3, std::int64_t x_channels, const char* what) {
    if (w.rank() != 4 || w.dim(0) != spec.kernel_rows || w.dim(1) != spec.kernel_cols || w.dim(2) != w_dim2 ||
        w.dim(3) != w_dim3)
        throw std::invalid_argument(std::string(what) + ": weight shape " + shape_str(w.shape) +
                                    " inconsistent with spec");
    if (x_channels != spec.in_channels)
        throw std::invalid_argument(std::string(what) + ": input has " + std::to_string(x_channels) +
                                    " channels, spec expects " + std::to_string(spec.in_channels));
    if (b.numel() != 0 && (b.rank() != 1 || b.dim(0) != spec.out_channels))
        throw std::invalid_argument(std::string(what) + ": bias shape " + shape_str(b.shape));
    if (spec.kernel_rows < 1 || spec.kernel_cols < 1 || spec.stride_rows < 1 || spec.stride_cols < 1)
        throw std::invalid_argument(std::string(what) + ": kernel and stride must be positive");
    x.require_finite(what);
    w.require_finite(what);
    if (b.numel()) b.require_finite(what);
}

ConvGeom forward_geom(const RankInfo& ri, const ConvSpec& spec) {
    ConvGeom g;
    g.n = ri.n;
    g.in_h = ri.h;
    g.in_w = ri.w;
    g.in_c = spec.in_channels;
    g.kh = spec.kernel_rows;
    g.kw = spec.kernel_cols;
    g.out_c = spec.out_channels;
    g.stride_h = spec.stride_rows;
    g.stride_w = spec.stride_cols;
    g.pad_top = conv_pad_before(g.kh, spec.padding);
    g.pad_left = conv_pad_before(g.kw, spec.padding);
    g.out_h = conv_out_size(ri.h, g.kh, g.stride_h, spec.padding);
    g.out_w = conv_out_size(ri.w, g.kw, g.stride_w, spec.padding);
    if (g.out_h < 1 || g.out_w < 1)
        throw std::invalid_argument("conv2d: empty output for input " + std::to_string(ri.h) + "x" +
                                    std::to_string(ri.w));
    return g;
}

// Geometry of the conv whose backward-data pass realises a transposed conv
// with this spec: it maps [in*stride] -> [in].
ConvGeom transposed_geom(const RankInfo& ri, const ConvSpec& spec) {
    ConvGeom g;
    g.n = ri.n;
    g.in_h = ri.h * spec.stride_rows;
    g.in_w = ri.w * spec.stride_cols;
    g.in_c = spec.out_channels;
    g.kh = spec.kernel_rows;
    g.kw = spec.kernel_cols;
    g.out_c = spec.in_channels;
    g.stride_h = spec.stride_rows;
    g.stride_w = spec.stride_cols;
    g.pad_top = conv_pad_before(g.kh, spec.padding);
    g.pad_left = conv_pad_before(g.kw, spec.padding);
    g.out_h = ri.h;
    g.out_w = ri.w;
    return g;
}

template <typename T>
Shape out_shape(const RankInfo& ri, std::int64_t oh, std::int64_t ow, std::int64_t oc) {
    if (ri.batched) return {ri.n, oh, ow, oc};
    return {oh, ow, oc};
}

}  // namespace

std::int64_t conv_pad_before(std::int64_t k, Padding p) { return p == Padding::same ? (k - 1) / 2 : 0; }

std::int64_t conv_out_size(std::int64_t in, std::int64_t k, std::int64_t stride, Padding p) {
    if (p == Padding::same) return (in + stride - 1) / stride;
    return (in - k) / stride + 1;
}

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, const ConvSpec& spec) {
    const RankInfo ri = split_rank(x.shape, "conv2d");
    validate_conv_inputs(x, w, b, spec, spec.in_channels, spec.out_channels, ri.c, "conv2d");
    const ConvGeom g = forward_geom(ri, spec);
    TensorT<T> y(out_shape<T>(ri, g.out_h, g.out_w, g.out_c));
    kernels::active_table<T>().conv_forward(x.data.data(), w.data.data(), b.numel() ? b.data.data() : nullptr,
                                            y.data.data(), g);
    return y;
}

template <typename T>
ConvGrads<T> conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& dy, const ConvSpec& spec) {
    const RankInfo ri = split_rank(x.shape, "conv2d_backward");
    const ConvGeom g = forward_geom(ri, spec);
    const RankInfo ro = split_rank(dy.shape, "conv2d_backward(dy)");
    if (ro.n != ri.n || ro.h != g.out_h || ro.w != g.out_w || ro.c != g.out_c)
        throw std::invalid_argument("conv2d_backward: dy shape " + shape_str(dy.shape) + " does not match output");
    dy.require_finite("conv2d_backward");

    ConvGrads<T> grads;
    grads.dx = TensorT<T>(x.shape);
    grads.dw = TensorT<T>(w.shape);
    grads.db = TensorT<T>(Shape{spec.out_channels});
    const auto& kt = kernels::active_table<T>();
    kt.conv_backward_data(dy.data.data(), w.data.data(), grads.dx.data.data(), g);
    kt.conv_backward_weights(x.data.data(), dy.data.data(), grads.dw.data.data(), grads.db.data.data(), g);
    return grads;
}

template <typename T>
TensorT<T> transposed_conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, const ConvSpec& spec) {
    const RankInfo ri = split_rank(x.shape, "transposed_conv2d");
    validate_conv_inputs(x, w, b, spec, spec.out_channels, spec.in_channels, ri.c, "transposed_conv2d");
    const ConvGeom g = transposed_geom(ri, spec);
    TensorT<T> y(out_shape<T>(ri, g.in_h, g.in_w, g.in_c));
    // The transposed conv IS the backward-data pass of the mirrored conv.
    kernels::active_table<T>().conv_backward_data(x.data.data(), w.data.data(), y.data.data(), g);
    if (b.numel()) {
        T* yp = y.data.data();
        const std::int64_t cells = y.numel() / spec.out_channels;
        for (std::int64_t i = 0; i < cells; ++i)
            for (std::int64_t c = 0; c < spec.out_channels; ++c) yp[i * spec.out_channels + c] += b.data[static_cast<std::size_t>(c)];
    }
    return y;
}

template <typename T>
ConvGrads<T> transposed_conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& dy,
                                        const ConvSpec& spec) {
    const RankInfo ri = split_rank(x.shape, "transposed_conv2d_backward");
    const ConvGeom g = transposed_geom(ri, spec);
    const RankInfo ro = split_rank(dy.shape, "transposed_conv2d_backward(dy)");
    if (ro.n != ri.n || ro.h != g.in_h || ro.w != g.in_w || ro.c != g.in_c)
        throw std::invalid_argument("transposed_conv2d_backward: dy shape " + shape_str(dy.shape));
    dy.require_finite("transposed_conv2d_backward");

    ConvGrads<T> grads;
    grads.dx = TensorT<T>(x.shape);
    grads.dw = TensorT<T>(w.shape);
    grads.db = TensorT<T>(Shape{spec.out_channels});
    const auto& kt = kernels::active_table<T>();
    // d/dx of backward-data is the forward conv applied to the upstream grad.
    kt.conv_forward(dy.data.data(), w.data.data(), nullptr, grads.dx.data.data(), g);
    // d/dw swaps the roles of activation and upstream grad.
    std::vector<T> db_conv(static_cast<std::size_t>(g.out_c));
    kt.conv_backward_weights(dy.data.data(), x.data.data(), grads.dw.data.data(), db_conv.data(), g);
    // Output bias grad is the plain sum of dy over cells, per output channel.
    const std::int64_t cells = dy.numel() / spec.out_channels;
    for (std::int64_t i = 0; i < cells; ++i)
        for (std::int64_t c = 0; c < spec.out_channels; ++c)
            grads.db.data[static_cast<std::size_t>(c)] += dy.data[static_cast<std::size_t>(i * spec.out_channels + c)];
    return grads;
}

template TensorT<float> conv2d<float>(const TensorT<float>&, const TensorT<float>&, const TensorT<float>&,
                                      const ConvSpec&);
template TensorT<double> conv2d<double>(const TensorT<double>&, const TensorT<double>&, const TensorT<double>&,
                                        const ConvSpec&);
template ConvGrads<float> conv2d_backward<float>(const TensorT<float>&, const TensorT<float>&, const TensorT<float>&,
                                                 const ConvSpec&);
template ConvGrads<double> conv2d_backward<double>(const TensorT<double>&, const TensorT<double>&,
                                                   const TensorT<double>&, const ConvSpec&);
template TensorT<float> transposed_conv2d<float>(const TensorT<float>&, const TensorT<float>&, const TensorT<float>&,
                                                 const ConvSpec&);
template TensorT<double> transposed_conv2d<double>(const TensorT<double>&, const TensorT<double>&,
                                                   const TensorT<double>&, const ConvSpec&);
template ConvGrads<float> transposed_conv2d_backward<float>(const TensorT<float>&, const TensorT<float>&,
                                                            const TensorT<float>&, const ConvSpec&);
template ConvGrads<double> transposed_conv2d_backward<double>(const TensorT<double>&, const TensorT<double>&,
                                                              const TensorT<double>&, const ConvSpec&);

}  // namespace polarseg
