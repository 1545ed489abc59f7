#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace polarseg {

using Complex = std::complex<double>;

// Unnormalized forward DFT, X[k] = sum_n x[n] e^{-j2pi nk/N}, radix-2
// iterative. N must be a power of two.
void fft_pow2(Complex* x, std::int64_t n);

// Applies fft_pow2 along one axis of a row-major 3-d complex array. If
// pad_to > dims[axis] the axis is zero-padded first (pad_to must be a power
// of two); the returned dims reflect the new length.
std::vector<Complex> fft_axis(const std::vector<Complex>& data, const std::int64_t dims[3], int axis,
                              std::int64_t pad_to, std::int64_t out_dims[3]);

bool is_pow2(std::int64_t n);

}  // namespace polarseg
