#include "polarseg/fft.hpp"

#include <cmath>
#include <stdexcept>

#include "polarseg/parallel.hpp"

namespace polarseg {

bool is_pow2(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Plan {
    std::int64_t n;
    std::vector<std::int64_t> bitrev;
    std::vector<Complex> twiddle;  // e^{-j2pi k/n}, k in [0, n/2)

    explicit Plan(std::int64_t len) : n(len), bitrev(static_cast<std::size_t>(len)) {
        int bits = 0;
        while ((std::int64_t(1) << bits) < n) ++bits;
        for (std::int64_t i = 0; i < n; ++i) {
            std::int64_t r = 0;
            for (int b = 0; b < bits; ++b)
                if (i & (std::int64_t(1) << b)) r |= std::int64_t(1) << (bits - 1 - b);
            bitrev[static_cast<std::size_t>(i)] = r;
        }
        twiddle.resize(static_cast<std::size_t>(n / 2));
        for (std::int64_t k = 0; k < n / 2; ++k) {
            const double a = -kTwoPi * static_cast<double>(k) / static_cast<double>(n);
            twiddle[static_cast<std::size_t>(k)] = Complex(std::cos(a), std::sin(a));
        }
    }

    void run(Complex* x) const {
        for (std::int64_t i = 0; i < n; ++i) {
            const std::int64_t j = bitrev[static_cast<std::size_t>(i)];
            if (i < j) std::swap(x[i], x[j]);
        }
        for (std::int64_t len = 2; len <= n; len <<= 1) {
            const std::int64_t half = len >> 1;
            const std::int64_t step = n / len;
            for (std::int64_t base = 0; base < n; base += len) {
                for (std::int64_t k = 0; k < half; ++k) {
                    const Complex w = twiddle[static_cast<std::size_t>(k * step)];
                    const Complex t = w * x[base + k + half];
                    const Complex u = x[base + k];
                    x[base + k] = u + t;
                    x[base + k + half] = u - t;
                }
            }
        }
    }
};

}  // namespace

void fft_pow2(Complex* x, std::int64_t n) {
    if (!is_pow2(n)) throw std::invalid_argument("fft: length " + std::to_string(n) + " is not a power of two");
    Plan(n).run(x);
}

std::vector<Complex> fft_axis(const std::vector<Complex>& data, const std::int64_t dims[3], int axis,
                              std::int64_t pad_to, std::int64_t out_dims[3]) {
    if (axis < 0 || axis > 2) throw std::invalid_argument("fft_axis: axis out of range");
    const std::int64_t in_len = dims[axis];
    const std::int64_t out_len = pad_to > 0 ? pad_to : in_len;
    if (out_len < in_len) throw std::invalid_argument("fft_axis: pad shorter than axis");
    if (!is_pow2(out_len))
        throw std::invalid_argument("fft_axis: transform length " + std::to_string(out_len) + " is not a power of two");

    out_dims[0] = dims[0];
    out_dims[1] = dims[1];
    out_dims[2] = dims[2];
    out_dims[axis] = out_len;

    // Iterate over all lines along `axis`; outer/inner describe the other two axes.
    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= dims[d];
    for (int d = axis + 1; d < 3; ++d) inner *= dims[d];

    std::vector<Complex> out(static_cast<std::size_t>(outer * out_len * inner));
    const Plan plan(out_len);

    parallel_for(outer * inner, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<Complex> line(static_cast<std::size_t>(out_len));
        for (std::int64_t li = lo; li < hi; ++li) {
            const std::int64_t o = li / inner;
            const std::int64_t i = li % inner;
            const Complex* src = data.data() + (o * in_len) * inner + i;
            for (std::int64_t k = 0; k < in_len; ++k) line[static_cast<std::size_t>(k)] = src[k * inner];
            for (std::int64_t k = in_len; k < out_len; ++k) line[static_cast<std::size_t>(k)] = Complex(0.0, 0.0);
            plan.run(line.data());
            Complex* dst = out.data() + (o * out_len) * inner + i;
            for (std::int64_t k = 0; k < out_len; ++k) dst[k * inner] = line[static_cast<std::size_t>(k)];
        }
    });
    return out;
}

}  // namespace polarseg
