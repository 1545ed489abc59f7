#include "polarseg/resample.hpp"

#include <cmath>
#include <stdexcept>

namespace polarseg {

namespace {

constexpr double kRadToDeg = 57.295779513082320876798154814105;

struct Sampler {
    const std::vector<double>& src;
    std::int64_t rows, cols;

    double fetch(double fr, double fc, Interp interp, double fill) const {
        if (interp == Interp::nearest) {
            const std::int64_t r = static_cast<std::int64_t>(std::llround(fr));
            const std::int64_t c = static_cast<std::int64_t>(std::llround(fc));
            if (r < 0 || r >= rows || c < 0 || c >= cols) return fill;
            return src[static_cast<std::size_t>(r * cols + c)];
        }
        std::int64_t r0 = static_cast<std::int64_t>(std::floor(fr));
        std::int64_t c0 = static_cast<std::int64_t>(std::floor(fc));
        if (fr < 0.0 || fc < 0.0 || fr > static_cast<double>(rows - 1) || fc > static_cast<double>(cols - 1))
            return fill;
        if (r0 >= rows - 1) r0 = rows - 2;
        if (c0 >= cols - 1) c0 = cols - 2;
        if (rows == 1) r0 = 0;
        if (cols == 1) c0 = 0;
        const double wr = fr - static_cast<double>(r0);
        const double wc = fc - static_cast<double>(c0);
        const std::int64_t r1 = rows == 1 ? r0 : r0 + 1;
        const std::int64_t c1 = cols == 1 ? c0 : c0 + 1;
        const double v00 = src[static_cast<std::size_t>(r0 * cols + c0)];
        const double v01 = src[static_cast<std::size_t>(r0 * cols + c1)];
        const double v10 = src[static_cast<std::size_t>(r1 * cols + c0)];
        const double v11 = src[static_cast<std::size_t>(r1 * cols + c1)];
        return (1.0 - wr) * (1.0 - wc) * v00 + (1.0 - wr) * wc * v01 + wr * (1.0 - wc) * v10 + wr * wc * v11;
    }
};

void check_grids(const PolarGrid& pg, const CartesianGrid& cg) {
    if (pg.rows < 1 || pg.cols < 2 || cg.rows < 2 || cg.cols < 2)
        throw std::invalid_argument("resample: degenerate grid");
    if (pg.range_bin_m <= 0.0) throw std::invalid_argument("resample: non-positive range bin");
}

}  // namespace

std::vector<double> polar_to_cartesian(const std::vector<double>& polar, const PolarGrid& pg,
                                       const CartesianGrid& cg, Interp interp, double fill) {
    check_grids(pg, cg);
    if (static_cast<std::int64_t>(polar.size()) != pg.rows * pg.cols)
        throw std::invalid_argument("polar_to_cartesian: data size mismatch");
    Sampler s{polar, pg.rows, pg.cols};
    const double ang_span = pg.angle_max_deg - pg.angle_min_deg;
    const double max_range = static_cast<double>(pg.rows - 1) * pg.range_bin_m;

    std::vector<double> out(static_cast<std::size_t>(cg.rows * cg.cols), fill);
    for (std::int64_t ix = 0; ix < cg.rows; ++ix) {
        const double x = cg.x_of(ix);
        for (std::int64_t iy = 0; iy < cg.cols; ++iy) {
            const double y = cg.y_of(iy);
            const double r = std::sqrt(x * x + y * y);
            const double theta = std::atan2(y, x) * kRadToDeg;
            if (r > max_range || theta < pg.angle_min_deg || theta > pg.angle_max_deg) continue;
            const double fr = r / pg.range_bin_m;
            const double fc = (theta - pg.angle_min_deg) / ang_span * static_cast<double>(pg.cols - 1);
            out[static_cast<std::size_t>(ix * cg.cols + iy)] = s.fetch(fr, fc, interp, fill);
        }
    }
    return out;
}

std::vector<double> cartesian_to_polar(const std::vector<double>& cart, const CartesianGrid& cg,
                                       const PolarGrid& pg, Interp interp, double fill) {
    check_grids(pg, cg);
    if (static_cast<std::int64_t>(cart.size()) != cg.rows * cg.cols)
        throw std::invalid_argument("cartesian_to_polar: data size mismatch");
    Sampler s{cart, cg.rows, cg.cols};
    const double ang_span = pg.angle_max_deg - pg.angle_min_deg;
    constexpr double kDegToRad = 1.0 / kRadToDeg;

    std::vector<double> out(static_cast<std::size_t>(pg.rows * pg.cols), fill);
    for (std::int64_t r = 0; r < pg.rows; ++r) {
        const double range = static_cast<double>(r) * pg.range_bin_m;
        for (std::int64_t c = 0; c < pg.cols; ++c) {
            const double theta = (pg.angle_min_deg + ang_span * static_cast<double>(c) / static_cast<double>(pg.cols - 1)) * kDegToRad;
            const double x = range * std::cos(theta);
            const double y = range * std::sin(theta);
            if (x < cg.x_min || x > cg.x_max || y < cg.y_min || y > cg.y_max) continue;
            const double fx = (x - cg.x_min) / (cg.x_max - cg.x_min) * static_cast<double>(cg.rows - 1);
            const double fy = (y - cg.y_min) / (cg.y_max - cg.y_min) * static_cast<double>(cg.cols - 1);
            out[static_cast<std::size_t>(r * pg.cols + c)] = s.fetch(fx, fy, interp, fill);
        }
    }
    return out;
}

}  // namespace polarseg
