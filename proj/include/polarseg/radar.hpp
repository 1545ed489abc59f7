#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "polarseg/fft.hpp"
#include "polarseg/tensor.hpp"

namespace polarseg {

// Acquisition geometry shared by the echo cube and everything derived from it.
// Default: 128 samples x 64 chirps x up to 128 antennas, azimuth FFT length
// 128 after zero-padding; 0.1117 m range bins; +/-37.3 km/h Doppler span;
// +/-45 deg azimuth field of view.
struct RadarGeometry {
    std::int64_t n_samples = 128;
    std::int64_t n_chirps = 64;
    std::int64_t n_antennas = 128;
    std::int64_t azimuth_bins = 128;
    double range_bin_m = 0.1117;
    double max_range_m = 15.0;
    double velocity_span_kmph = 37.3;
    double azimuth_fov_deg = 45.0;

    std::int64_t range_bins() const { return n_samples; }
    std::int64_t doppler_bins() const { return n_chirps; }
    // Doppler axis is centre-shifted: this index holds zero velocity.
    std::int64_t doppler_zero_bin() const { return n_chirps / 2; }
    double doppler_bin_kmph() const { return 2.0 * velocity_span_kmph / static_cast<double>(n_chirps); }
    // Idealized linear column map: column k <-> -fov + 2*fov*k/(bins-1).
    double azimuth_of_column(std::int64_t k) const {
        return -azimuth_fov_deg + 2.0 * azimuth_fov_deg * static_cast<double>(k) / static_cast<double>(azimuth_bins - 1);
    }
    std::int64_t column_of_azimuth(double deg) const {
        const double t = (deg + azimuth_fov_deg) * static_cast<double>(azimuth_bins - 1) / (2.0 * azimuth_fov_deg);
        return static_cast<std::int64_t>(std::llround(t));
    }
};

// Raw echo cube, complex [samples, chirps, antennas].
struct RadarCubeSCA {
    RadarGeometry geom;
    std::vector<Complex> data;

    std::int64_t numel() const { return geom.n_samples * geom.n_chirps * geom.n_antennas; }
    Complex& at(std::int64_t s, std::int64_t c, std::int64_t a) {
        return data[static_cast<std::size_t>((s * geom.n_chirps + c) * geom.n_antennas + a)];
    }
};

// Transformed cube, complex [range, doppler, azimuth], Doppler centre-shifted.
struct RadarCubeRDA {
    RadarGeometry geom;
    std::vector<Complex> data;

    std::int64_t numel() const { return geom.range_bins() * geom.doppler_bins() * geom.azimuth_bins; }
    const Complex& at(std::int64_t r, std::int64_t d, std::int64_t a) const {
        return data[static_cast<std::size_t>((r * geom.doppler_bins() + d) * geom.azimuth_bins + a)];
    }
};

enum class RaMode { sum_log, max };

// 2-d polar log-power map [range, azimuth].
struct RangeAzimuthMap {
    RadarGeometry geom;
    RaMode mode = RaMode::sum_log;
    std::int64_t rows = 0, cols = 0;
    double angle_min_deg = -45.0, angle_max_deg = 45.0;
    std::vector<double> values;

    double& at(std::int64_t r, std::int64_t c) { return values[static_cast<std::size_t>(r * cols + c)]; }
    double at(std::int64_t r, std::int64_t c) const { return values[static_cast<std::size_t>(r * cols + c)]; }
    double angle_of_column(std::int64_t k) const {
        if (cols == 1) return angle_min_deg;
        return angle_min_deg + (angle_max_deg - angle_min_deg) * static_cast<double>(k) / static_cast<double>(cols - 1);
    }
};

struct CfarSpec {
    std::int64_t guard_rows = 2, guard_cols = 2;
    std::int64_t train_rows = 4, train_cols = 4;
    double scale_alpha = 4.0;
};

// Floor added inside log(|.|): the reduction is undefined at zero magnitude.
inline constexpr double kLogFloor = 1e-12;

// FFT over samples, then chirps, then zero-pad antennas to geom.azimuth_bins
// and FFT; Doppler axis centre-shifted so downstream code never sees the
// wrap-around.
RadarCubeRDA sca_to_rda(const RadarCubeSCA& sca);

// sum_log: RA[i,k] = sum_j ln(|RDA[i,j,k]| + floor); max: max_j of the same.
RangeAzimuthMap rda_to_ra(const RadarCubeRDA& rda, RaMode mode);

// Per-Doppler-bin log magnitudes viewed as channels: [range, azimuth, doppler].
Tensor rda_to_rad_tensor(const RadarCubeRDA& rda);

// Column slice to [angle_min, angle_max]; metadata updated so column angles
// are preserved.
RangeAzimuthMap crop_fov(const RangeAzimuthMap& map, double angle_min_deg, double angle_max_deg);

// Cell-averaging CFAR on a linear-power map: flag cells above
// alpha * mean(training ring), guard ring excluded; border cells use whatever
// training cells are in range.
std::vector<std::uint8_t> ca_cfar_2d(const RangeAzimuthMap& linear_power, const CfarSpec& spec);

// Threshold multiplier that yields the requested false-alarm probability for
// exponentially distributed noise power with n_train training cells.
double cfar_alpha_for_pfa(double pfa, std::int64_t n_train);

}  // namespace polarseg
