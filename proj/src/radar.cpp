#include "polarseg/radar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "polarseg/parallel.hpp"

namespace polarseg {

RadarCubeRDA sca_to_rda(const RadarCubeSCA& sca) {
    const RadarGeometry& g = sca.geom;
    if (static_cast<std::int64_t>(sca.data.size()) != sca.numel())
        throw std::invalid_argument("sca_to_rda: cube size does not match geometry");
    if (g.n_antennas > g.azimuth_bins)
        throw std::invalid_argument("sca_to_rda: more antennas than azimuth bins");

    std::int64_t dims[3] = {g.n_samples, g.n_chirps, g.n_antennas};
    std::int64_t tmp[3];
    auto stage1 = fft_axis(sca.data, dims, 0, 0, tmp);           // samples -> range
    auto stage2 = fft_axis(stage1, tmp, 1, 0, tmp);              // chirps -> doppler
    std::int64_t out_dims[3];
    auto stage3 = fft_axis(stage2, tmp, 2, g.azimuth_bins, out_dims);  // zero-pad + antennas -> azimuth

    // Centre-shift the Doppler axis: FFT bin j carries signed frequency, the
    // shifted index (j + D/2) % D puts zero velocity at D/2.
    RadarCubeRDA rda;
    rda.geom = g;
    rda.data.resize(stage3.size());
    const std::int64_t nr = out_dims[0], nd = out_dims[1], na = out_dims[2];
    parallel_for(nr, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            for (std::int64_t j = 0; j < nd; ++j) {
                const std::int64_t d = (j + nd / 2) % nd;
                const Complex* src = stage3.data() + (r * nd + j) * na;
                Complex* dst = rda.data.data() + (r * nd + d) * na;
                std::copy(src, src + na, dst);
            }
        }
    });
    return rda;
}

RangeAzimuthMap rda_to_ra(const RadarCubeRDA& rda, RaMode mode) {
    const RadarGeometry& g = rda.geom;
    RangeAzimuthMap map;
    map.geom = g;
    map.mode = mode;
    map.rows = g.range_bins();
    map.cols = g.azimuth_bins;
    map.angle_min_deg = -g.azimuth_fov_deg;
    map.angle_max_deg = g.azimuth_fov_deg;
    map.values.assign(static_cast<std::size_t>(map.rows * map.cols), 0.0);

    const std::int64_t nd = g.doppler_bins(), na = g.azimuth_bins;
    parallel_for(map.rows, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            for (std::int64_t a = 0; a < na; ++a) {
                double acc = mode == RaMode::sum_log ? 0.0 : -std::numeric_limits<double>::infinity();
                for (std::int64_t d = 0; d < nd; ++d) {
                    const double v = std::log(std::abs(rda.at(r, d, a)) + kLogFloor);
                    if (mode == RaMode::sum_log) acc += v;
                    else acc = std::max(acc, v);
                }
                map.at(r, a) = acc;
            }
        }
    });
    return map;
}

Tensor rda_to_rad_tensor(const RadarCubeRDA& rda) {
    const RadarGeometry& g = rda.geom;
    Tensor t(Shape{g.range_bins(), g.azimuth_bins, g.doppler_bins()});
    const std::int64_t nd = g.doppler_bins(), na = g.azimuth_bins;
    parallel_for(g.range_bins(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            for (std::int64_t a = 0; a < na; ++a) {
                float* dst = t.data.data() + ((r * na + a) * nd);
                for (std::int64_t d = 0; d < nd; ++d)
                    dst[d] = static_cast<float>(std::log(std::abs(rda.at(r, d, a)) + kLogFloor));
            }
        }
    });
    return t;
}

RangeAzimuthMap crop_fov(const RangeAzimuthMap& map, double angle_min_deg, double angle_max_deg) {
    if (angle_min_deg > angle_max_deg) throw std::invalid_argument("crop_fov: empty angle range");
    if (angle_min_deg < map.angle_min_deg - 1e-9 || angle_max_deg > map.angle_max_deg + 1e-9)
        throw std::invalid_argument("crop_fov: requested range exceeds map span");
    const double span = map.angle_max_deg - map.angle_min_deg;
    const double scale = static_cast<double>(map.cols - 1) / span;
    const std::int64_t k_lo = static_cast<std::int64_t>(std::ceil((angle_min_deg - map.angle_min_deg) * scale - 1e-9));
    const std::int64_t k_hi = static_cast<std::int64_t>(std::floor((angle_max_deg - map.angle_min_deg) * scale + 1e-9));
    if (k_lo > k_hi) throw std::invalid_argument("crop_fov: no columns in range");

    RangeAzimuthMap out;
    out.geom = map.geom;
    out.mode = map.mode;
    out.rows = map.rows;
    out.cols = k_hi - k_lo + 1;
    out.angle_min_deg = map.angle_of_column(k_lo);
    out.angle_max_deg = map.angle_of_column(k_hi);
    out.values.resize(static_cast<std::size_t>(out.rows * out.cols));
    for (std::int64_t r = 0; r < out.rows; ++r)
        for (std::int64_t c = 0; c < out.cols; ++c) out.at(r, c) = map.at(r, k_lo + c);
    return out;
}

std::vector<std::uint8_t> ca_cfar_2d(const RangeAzimuthMap& linear_power, const CfarSpec& spec) {
    if (spec.train_rows < 1 || spec.train_cols < 1) throw std::invalid_argument("ca_cfar_2d: training cells must be >= 1");
    if (spec.guard_rows < 0 || spec.guard_cols < 0) throw std::invalid_argument("ca_cfar_2d: negative guard window");
    const std::int64_t rows = linear_power.rows, cols = linear_power.cols;
    std::vector<std::uint8_t> det(static_cast<std::size_t>(rows * cols), 0);

    const std::int64_t gr = spec.guard_rows, gc = spec.guard_cols;
    const std::int64_t wr = gr + spec.train_rows, wc = gc + spec.train_cols;

    parallel_for(rows, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            for (std::int64_t c = 0; c < cols; ++c) {
                double sum = 0.0;
                std::int64_t count = 0;
                const std::int64_t r0 = std::max<std::int64_t>(0, r - wr), r1 = std::min(rows - 1, r + wr);
                const std::int64_t c0 = std::max<std::int64_t>(0, c - wc), c1 = std::min(cols - 1, c + wc);
                for (std::int64_t i = r0; i <= r1; ++i) {
                    const bool in_guard_rows = std::llabs(i - r) <= gr;
                    for (std::int64_t j = c0; j <= c1; ++j) {
                        if (in_guard_rows && std::llabs(j - c) <= gc) continue;  // guard ring + cell under test
                        sum += linear_power.at(i, j);
                        ++count;
                    }
                }
                if (count == 0) throw std::runtime_error("ca_cfar_2d: empty training window");
                const double mean = sum / static_cast<double>(count);
                det[static_cast<std::size_t>(r * cols + c)] = linear_power.at(r, c) > spec.scale_alpha * mean ? 1 : 0;
            }
        }
    });
    return det;
}

double cfar_alpha_for_pfa(double pfa, std::int64_t n_train) {
    if (pfa <= 0.0 || pfa >= 1.0 || n_train < 1) throw std::invalid_argument("cfar_alpha_for_pfa: bad arguments");
    const double n = static_cast<double>(n_train);
    return n * (std::pow(pfa, -1.0 / n) - 1.0);
}

}  // namespace polarseg
