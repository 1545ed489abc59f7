#pragma once

#include <cstdint>
#include <string>

namespace polarseg::kernels {

// Resolved convolution geometry shared by all conv kernels. Layout is
// channels-last: x[n][h][w][ci], w[kh][kw][ci][co], y[n][oh][ow][co].
struct ConvGeom {
    std::int64_t n = 1;
    std::int64_t in_h = 0, in_w = 0, in_c = 0;
    std::int64_t kh = 0, kw = 0, out_c = 0;
    std::int64_t stride_h = 1, stride_w = 1;
    std::int64_t pad_top = 0, pad_left = 0;
    std::int64_t out_h = 0, out_w = 0;
};

// One entry per data-parallel inner loop with a vectorized variant. Scalar
// implementations are the reference; SIMD variants must match them within
// tight tolerance (see kernel equivalence tests).
template <typename T>
struct KernelTable {
    void (*conv_forward)(const T* x, const T* w, const T* bias, T* y, const ConvGeom& g);
    void (*conv_backward_data)(const T* dy, const T* w, T* dx, const ConvGeom& g);
    void (*conv_backward_weights)(const T* x, const T* dy, T* dw, T* db, const ConvGeom& g);
    void (*relu_forward)(const T* x, T* y, std::int64_t n);
    void (*relu_backward)(const T* y, const T* dy, T* dx, std::int64_t n);
    void (*rmsprop_update)(T* p, const T* g, T* s, std::int64_t n, T lr, T rho, T eps);
    void (*scale_add)(T* dst, const T* src, T alpha, std::int64_t n);  // dst += alpha * src
    const char* backend;
};

template <typename T>
const KernelTable<T>& scalar_table();

// AVX2+FMA variants exist for float only; double stays on the scalar
// reference path (it is the gradcheck precision, not the hot path).
const KernelTable<float>& avx2_table_f32();

bool cpu_has_avx2();

// Active table: AVX2 when the CPU supports it and scalar is not forced.
template <typename T>
const KernelTable<T>& active_table();

// Force the scalar reference path (tests, determinism experiments). Also
// honoured at startup via POLARSEG_FORCE_SCALAR=1.
void set_force_scalar(bool force);
bool force_scalar();

std::string active_backend_name();

}  // namespace polarseg::kernels
