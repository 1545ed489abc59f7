// AVX2+FMA float kernels. Compiled with -mavx2 -mfma; only reached when the
// running CPU reports both features (see dispatch.cpp).

#include "polarseg/kernels/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "polarseg/parallel.hpp"

namespace polarseg::kernels {

namespace {

inline float hsum8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

void conv_forward_avx2(const float* x, const float* w, const float* bias, float* y, const ConvGeom& g) {
    const std::int64_t x_row = g.in_w * g.in_c;
    const std::int64_t x_img = g.in_h * x_row;
    const std::int64_t y_row = g.out_w * g.out_c;
    const std::int64_t y_img = g.out_h * y_row;
    const std::int64_t w_tap = g.in_c * g.out_c;
    const std::int64_t co_vec = g.out_c & ~std::int64_t(31);  // 32-wide tiles
    const std::int64_t co_vec8 = g.out_c & ~std::int64_t(7);

    parallel_for(g.n * g.out_h, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            const std::int64_t n = r / g.out_h;
            const std::int64_t oh = r % g.out_h;
            const std::int64_t kh_lo = std::max<std::int64_t>(0, g.pad_top - oh * g.stride_h);
            const std::int64_t kh_hi = std::min<std::int64_t>(g.kh, g.in_h + g.pad_top - oh * g.stride_h);
            for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
                float* yp = y + n * y_img + oh * y_row + ow * g.out_c;
                const std::int64_t kw_lo = std::max<std::int64_t>(0, g.pad_left - ow * g.stride_w);
                const std::int64_t kw_hi = std::min<std::int64_t>(g.kw, g.in_w + g.pad_left - ow * g.stride_w);

                std::int64_t co = 0;
                for (; co < co_vec; co += 32) {
                    __m256 a0, a1, a2, a3;
                    if (bias) {
                        a0 = _mm256_loadu_ps(bias + co);
                        a1 = _mm256_loadu_ps(bias + co + 8);
                        a2 = _mm256_loadu_ps(bias + co + 16);
                        a3 = _mm256_loadu_ps(bias + co + 24);
                    } else {
                        a0 = a1 = a2 = a3 = _mm256_setzero_ps();
                    }
                    for (std::int64_t kh = kh_lo; kh < kh_hi; ++kh) {
                        const std::int64_t ih = oh * g.stride_h - g.pad_top + kh;
                        for (std::int64_t kw = kw_lo; kw < kw_hi; ++kw) {
                            const std::int64_t iw = ow * g.stride_w - g.pad_left + kw;
                            const float* xp = x + n * x_img + ih * x_row + iw * g.in_c;
                            const float* wp = w + (kh * g.kw + kw) * w_tap + co;
                            for (std::int64_t ci = 0; ci < g.in_c; ++ci) {
                                const __m256 xv = _mm256_set1_ps(xp[ci]);
                                const float* wrow = wp + ci * g.out_c;
                                a0 = _mm256_fmadd_ps(xv, _mm256_loadu_ps(wrow), a0);
                                a1 = _mm256_fmadd_ps(xv, _mm256_loadu_ps(wrow + 8), a1);
                                a2 = _mm256_fmadd_ps(xv, _mm256_loadu_ps(wrow + 16), a2);
                                a3 = _mm256_fmadd_ps(xv, _mm256_loadu_ps(wrow + 24), a3);
                            }
                        }
                    }
                    _mm256_storeu_ps(yp + co, a0);
                    _mm256_storeu_ps(yp + co + 8, a1);
                    _mm256_storeu_ps(yp + co + 16, a2);
                    _mm256_storeu_ps(yp + co + 24, a3);
                }
                for (; co < co_vec8; co += 8) {
                    __m256 acc = bias ? _mm256_loadu_ps(bias + co) : _mm256_setzero_ps();
                    for (std::int64_t kh = kh_lo; kh < kh_hi; ++kh) {
                        const std::int64_t ih = oh * g.stride_h - g.pad_top + kh;
                        for (std::int64_t kw = kw_lo; kw < kw_hi; ++kw) {
                            const std::int64_t iw = ow * g.stride_w - g.pad_left + kw;
                            const float* xp = x + n * x_img + ih * x_row + iw * g.in_c;
                            const float* wp = w + (kh * g.kw + kw) * w_tap + co;
                            for (std::int64_t ci = 0; ci < g.in_c; ++ci) {
                                acc = _mm256_fmadd_ps(_mm256_set1_ps(xp[ci]), _mm256_loadu_ps(wp + ci * g.out_c), acc);
                            }
                        }
                    }
                    _mm256_storeu_ps(yp + co, acc);
                }
                for (; co < g.out_c; ++co) {
                    float acc = bias ? bias[co] : 0.0f;
                    for (std::int64_t kh = kh_lo; kh < kh_hi; ++kh) {
                        const std::int64_t ih = oh * g.stride_h - g.pad_top + kh;
                        for (std::int64_t kw = kw_lo; kw < kw_hi; ++kw) {
                            const std::int64_t iw = ow * g.stride_w - g.pad_left + kw;
                            const float* xp = x + n * x_img + ih * x_row + iw * g.in_c;
                            const float* wp = w + (kh * g.kw + kw) * w_tap + co;
                            for (std::int64_t ci = 0; ci < g.in_c; ++ci) acc += xp[ci] * wp[ci * g.out_c];
                        }
                    }
                    yp[co] = acc;
                }
            }
        }
    });
}

void conv_backward_data_avx2(const float* dy, const float* w, float* dx, const ConvGeom& g) {
    const std::int64_t x_row = g.in_w * g.in_c;
    const std::int64_t x_img = g.in_h * x_row;
    const std::int64_t y_row = g.out_w * g.out_c;
    const std::int64_t y_img = g.out_h * y_row;
    const std::int64_t w_tap = g.in_c * g.out_c;
    const std::int64_t co_vec = g.out_c & ~std::int64_t(7);

    parallel_for(g.n * g.in_h, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            const std::int64_t n = r / g.in_h;
            const std::int64_t ih = r % g.in_h;
            float* dxrow = dx + n * x_img + ih * x_row;
            std::fill(dxrow, dxrow + x_row, 0.0f);
            for (std::int64_t kh = 0; kh < g.kh; ++kh) {
                const std::int64_t oh_num = ih + g.pad_top - kh;
                if (oh_num < 0 || oh_num % g.stride_h != 0) continue;
                const std::int64_t oh = oh_num / g.stride_h;
                if (oh >= g.out_h) continue;
                for (std::int64_t kw = 0; kw < g.kw; ++kw) {
                    const float* wp = w + (kh * g.kw + kw) * w_tap;
                    for (std::int64_t iw = 0; iw < g.in_w; ++iw) {
                        const std::int64_t ow_num = iw + g.pad_left - kw;
                        if (ow_num < 0 || ow_num % g.stride_w != 0) continue;
                        const std::int64_t ow = ow_num / g.stride_w;
                        if (ow >= g.out_w) continue;
                        const float* dyp = dy + n * y_img + oh * y_row + ow * g.out_c;
                        float* dxp = dxrow + iw * g.in_c;
                        for (std::int64_t ci = 0; ci < g.in_c; ++ci) {
                            const float* wrow = wp + ci * g.out_c;
                            __m256 acc = _mm256_setzero_ps();
                            std::int64_t co = 0;
                            for (; co < co_vec; co += 8)
                                acc = _mm256_fmadd_ps(_mm256_loadu_ps(dyp + co), _mm256_loadu_ps(wrow + co), acc);
                            float sum = hsum8(acc);
                            for (; co < g.out_c; ++co) sum += dyp[co] * wrow[co];
                            dxp[ci] += sum;
                        }
                    }
                }
            }
        }
    });
}

void conv_backward_weights_avx2(const float* x, const float* dy, float* dw, float* db, const ConvGeom& g) {
    const std::int64_t x_row = g.in_w * g.in_c;
    const std::int64_t x_img = g.in_h * x_row;
    const std::int64_t y_row = g.out_w * g.out_c;
    const std::int64_t y_img = g.out_h * y_row;
    const std::int64_t w_tap = g.in_c * g.out_c;
    const std::int64_t w_total = g.kh * g.kw * w_tap;
    const std::int64_t co_vec = g.out_c & ~std::int64_t(7);

    const int nt = parallel_block_count();
    std::vector<std::vector<float>> dw_part(static_cast<std::size_t>(nt));
    std::vector<std::vector<float>> db_part(static_cast<std::size_t>(nt));

    parallel_for_blocks(g.n, [&](int block, std::int64_t lo, std::int64_t hi) {
        auto& dwp = dw_part[static_cast<std::size_t>(block)];
        auto& dbp = db_part[static_cast<std::size_t>(block)];
        dwp.assign(static_cast<std::size_t>(w_total), 0.0f);
        dbp.assign(static_cast<std::size_t>(g.out_c), 0.0f);
        for (std::int64_t n = lo; n < hi; ++n) {
            for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
                for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
                    const float* dyp = dy + n * y_img + oh * y_row + ow * g.out_c;
                    {
                        std::int64_t co = 0;
                        for (; co < co_vec; co += 8) {
                            __m256 acc = _mm256_loadu_ps(dbp.data() + co);
                            _mm256_storeu_ps(dbp.data() + co, _mm256_add_ps(acc, _mm256_loadu_ps(dyp + co)));
                        }
                        for (; co < g.out_c; ++co) dbp[static_cast<std::size_t>(co)] += dyp[co];
                    }
                    for (std::int64_t kh = 0; kh < g.kh; ++kh) {
                        const std::int64_t ih = oh * g.stride_h - g.pad_top + kh;
                        if (ih < 0 || ih >= g.in_h) continue;
                        for (std::int64_t kw = 0; kw < g.kw; ++kw) {
                            const std::int64_t iw = ow * g.stride_w - g.pad_left + kw;
                            if (iw < 0 || iw >= g.in_w) continue;
                            const float* xp = x + n * x_img + ih * x_row + iw * g.in_c;
                            float* dwp_tap = dwp.data() + (kh * g.kw + kw) * w_tap;
                            for (std::int64_t ci = 0; ci < g.in_c; ++ci) {
                                const __m256 xv = _mm256_set1_ps(xp[ci]);
                                float* dwrow = dwp_tap + ci * g.out_c;
                                std::int64_t co = 0;
                                for (; co < co_vec; co += 8) {
                                    __m256 acc = _mm256_loadu_ps(dwrow + co);
                                    acc = _mm256_fmadd_ps(xv, _mm256_loadu_ps(dyp + co), acc);
                                    _mm256_storeu_ps(dwrow + co, acc);
                                }
                                for (; co < g.out_c; ++co) dwrow[co] += xp[ci] * dyp[co];
                            }
                        }
                    }
                }
            }
        }
    });

    std::fill(dw, dw + w_total, 0.0f);
    std::fill(db, db + g.out_c, 0.0f);
    for (int b = 0; b < nt; ++b) {
        if (dw_part[static_cast<std::size_t>(b)].empty()) continue;
        const auto& dwp = dw_part[static_cast<std::size_t>(b)];
        const auto& dbp = db_part[static_cast<std::size_t>(b)];
        for (std::int64_t i = 0; i < w_total; ++i) dw[i] += dwp[static_cast<std::size_t>(i)];
        for (std::int64_t i = 0; i < g.out_c; ++i) db[i] += dbp[static_cast<std::size_t>(i)];
    }
}

void relu_forward_avx2(const float* x, float* y, std::int64_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_avx2(const float* y, const float* dy, float* dx, std::int64_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(y + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(dx + i, _mm256_and_ps(_mm256_loadu_ps(dy + i), mask));
    }
    for (; i < n; ++i) dx[i] = y[i] > 0.0f ? dy[i] : 0.0f;
}

void rmsprop_update_avx2(float* p, const float* g, float* s, std::int64_t n, float lr, float rho, float eps) {
    const __m256 vrho = _mm256_set1_ps(rho);
    const __m256 vone_minus = _mm256_set1_ps(1.0f - rho);
    const __m256 vlr = _mm256_set1_ps(lr);
    const __m256 veps = _mm256_set1_ps(eps);
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gv = _mm256_loadu_ps(g + i);
        __m256 sv = _mm256_loadu_ps(s + i);
        sv = _mm256_fmadd_ps(vrho, sv, _mm256_mul_ps(vone_minus, _mm256_mul_ps(gv, gv)));
        _mm256_storeu_ps(s + i, sv);
        const __m256 denom = _mm256_sqrt_ps(_mm256_add_ps(sv, veps));
        const __m256 upd = _mm256_div_ps(_mm256_mul_ps(vlr, gv), denom);
        _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), upd));
    }
    for (; i < n; ++i) {
        s[i] = rho * s[i] + (1.0f - rho) * g[i] * g[i];
        p[i] -= lr * g[i] / std::sqrt(s[i] + eps);
    }
}

void scale_add_avx2(float* dst, const float* src, float alpha, std::int64_t n) {
    const __m256 a = _mm256_set1_ps(alpha);
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(dst + i, _mm256_fmadd_ps(a, _mm256_loadu_ps(src + i), _mm256_loadu_ps(dst + i)));
    for (; i < n; ++i) dst[i] += alpha * src[i];
}

}  // namespace

const KernelTable<float>& avx2_table_f32() {
    static const KernelTable<float> t = [] {
        KernelTable<float> k;
        k.conv_forward = &conv_forward_avx2;
        k.conv_backward_data = &conv_backward_data_avx2;
        k.conv_backward_weights = &conv_backward_weights_avx2;
        k.relu_forward = &relu_forward_avx2;
        k.relu_backward = &relu_backward_avx2;
        k.rmsprop_update = &rmsprop_update_avx2;
        k.scale_add = &scale_add_avx2;
        k.backend = "avx2";
        return k;
    }();
    return t;
}

}  // namespace polarseg::kernels

#else

namespace polarseg::kernels {

// Non-x86 build: AVX2 entry points fall back to the scalar reference.
const KernelTable<float>& avx2_table_f32() { return scalar_table<float>(); }

}  // namespace polarseg::kernels

#endif
