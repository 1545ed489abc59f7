#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "polarseg/tensor.hpp"

namespace polarseg {

// RTEN tensor container: magic "RTEN", version u16 (=1), dtype u8, ndim u8,
// ndim x u64 dims, then the row-major payload. Everything little-endian.
enum class RtenDtype : std::uint8_t { f32 = 0, f64 = 1, c64 = 2, u8 = 3 };

struct RtenData {
    RtenDtype dtype = RtenDtype::f32;
    Shape dims;
    std::vector<float> f32;
    std::vector<double> f64;
    std::vector<std::complex<float>> c64;
    std::vector<std::uint8_t> u8;

    std::int64_t numel() const { return shape_numel(dims); }
};

void rten_write(const std::string& path, const Tensor& t);
void rten_write(const std::string& path, const TensorD& t);
void rten_write_c64(const std::string& path, const std::vector<std::complex<float>>& data, const Shape& dims);
void rten_write_u8(const std::string& path, const std::vector<std::uint8_t>& data, const Shape& dims);

RtenData rten_read(const std::string& path);

// Convenience: read an f32 file straight into a Tensor (errors on other dtypes).
Tensor rten_read_f32(const std::string& path);

}  // namespace polarseg
