#pragma once

#include <cstdint>
#include <vector>

#include "polarseg/radar.hpp"

namespace polarseg {

// Bird's-eye Cartesian render grid. x is the forward axis (boresight),
// y lateral; cell (ix, iy) sits at the endpoint-inclusive linear lattice
// over [x_min,x_max] x [y_min,y_max]. The default covers the +/-45 deg,
// 15 m wedge: y_max = 15*sin(45 deg).
struct CartesianGrid {
    std::int64_t rows = 128;  // x samples
    std::int64_t cols = 128;  // y samples
    double x_min = 0.0, x_max = 15.0;
    double y_min = -10.61, y_max = 10.61;

    double x_of(std::int64_t ix) const {
        return x_min + (x_max - x_min) * static_cast<double>(ix) / static_cast<double>(rows - 1);
    }
    double y_of(std::int64_t iy) const {
        return y_min + (y_max - y_min) * static_cast<double>(iy) / static_cast<double>(cols - 1);
    }
};

// Polar lattice of a RangeAzimuthMap: bin 0 at 0 m, columns spanning
// [angle_min, angle_max] linearly.
struct PolarGrid {
    std::int64_t rows = 128, cols = 128;
    double range_bin_m = 0.1117;
    double angle_min_deg = -45.0, angle_max_deg = 45.0;

    static PolarGrid of(const RangeAzimuthMap& m) {
        return {m.rows, m.cols, m.geom.range_bin_m, m.angle_min_deg, m.angle_max_deg};
    }
};

enum class Interp { nearest, bilinear };

// Per-destination-cell lookup via r = sqrt(x^2+y^2), theta = atan2(y, x).
// Cells outside the source wedge get `fill`.
std::vector<double> polar_to_cartesian(const std::vector<double>& polar, const PolarGrid& pg,
                                       const CartesianGrid& cg, Interp interp, double fill);

// Inverse direction: per polar cell, sample the Cartesian grid at
// (x, y) = (r cos theta, r sin theta). Cells outside get `fill`.
std::vector<double> cartesian_to_polar(const std::vector<double>& cart, const CartesianGrid& cg,
                                       const PolarGrid& pg, Interp interp, double fill);

}  // namespace polarseg
