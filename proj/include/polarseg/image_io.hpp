#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polarseg/tensor.hpp"

namespace polarseg {

// Binary PGM (P5), maxval 255.
void write_pgm(const std::string& path, const std::vector<std::uint8_t>& gray, std::int64_t width,
               std::int64_t height);
std::vector<std::uint8_t> read_pgm(const std::string& path, std::int64_t* width, std::int64_t* height);

// Binary PPM (P6) from interleaved RGB.
void write_ppm(const std::string& path, const std::vector<std::uint8_t>& rgb, std::int64_t width,
               std::int64_t height);

// Masks store 1 = open as 255, 0 = occupied as 0.
void write_mask_pgm(const std::string& path, const Tensor& mask01);
Tensor read_mask_pgm(const std::string& path);

}  // namespace polarseg
