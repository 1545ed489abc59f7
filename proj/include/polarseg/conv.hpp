#pragma once

#include "polarseg/kernels/kernels.hpp"
#include "polarseg/tensor.hpp"

namespace polarseg {

enum class Padding { same, valid };

// Column-wise layer <=> kernel_cols == 1; row-wise layer <=> kernel_rows == 1.
struct ConvSpec {
    std::int64_t kernel_rows = 1;
    std::int64_t kernel_cols = 1;
    std::int64_t stride_rows = 1;
    std::int64_t stride_cols = 1;
    std::int64_t in_channels = 1;
    std::int64_t out_channels = 1;
    Padding padding = Padding::same;

    bool column_wise() const { return kernel_cols == 1; }
    bool row_wise() const { return kernel_rows == 1; }
};

// Same padding centres the taps: pad_before = (k-1)/2, pad_after = k-1-pad_before,
// so odd kernels pad symmetrically and even kernels put the extra cell at the
// bottom/right. Output size is ceil(in/stride) for same, (in-k)/stride+1 for valid.
std::int64_t conv_out_size(std::int64_t in, std::int64_t k, std::int64_t stride, Padding p);
std::int64_t conv_pad_before(std::int64_t k, Padding p);

// x: [H,W,Cin] or [N,H,W,Cin]; w: [kh,kw,Cin,Cout]; b: [Cout] (may be empty).
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, const ConvSpec& spec);

template <typename T>
struct ConvGrads {
    TensorT<T> dx, dw, db;
};

template <typename T>
ConvGrads<T> conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& dy, const ConvSpec& spec);

// Adjoint of the strided conv2d that maps the output grid back onto the input
// grid: out spatial size = in size * stride. w: [kh,kw,Cout,Cin] -- the third
// axis indexes this op's OUTPUT channels, so a conv and its transpose can share
// one weight tensor. spec.in_channels/out_channels describe this op itself.
template <typename T>
TensorT<T> transposed_conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b, const ConvSpec& spec);

template <typename T>
ConvGrads<T> transposed_conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& dy,
                                        const ConvSpec& spec);

}  // namespace polarseg
