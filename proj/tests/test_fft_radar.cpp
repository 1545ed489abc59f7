#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "polarseg/fft.hpp"
#include "polarseg/radar.hpp"
#include "polarseg/resample.hpp"
#include "polarseg/rng.hpp"
#include "polarseg/scene.hpp"

using namespace polarseg;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// O(n^2) reference DFT.
std::vector<Complex> naive_dft(const std::vector<Complex>& x) {
    const std::int64_t n = static_cast<std::int64_t>(x.size());
    std::vector<Complex> out(x.size());
    for (std::int64_t k = 0; k < n; ++k) {
        Complex acc(0.0, 0.0);
        for (std::int64_t m = 0; m < n; ++m) {
            const double a = -kTwoPi * static_cast<double>(k * m) / static_cast<double>(n);
            acc += x[static_cast<std::size_t>(m)] * Complex(std::cos(a), std::sin(a));
        }
        out[static_cast<std::size_t>(k)] = acc;
    }
    return out;
}

RadarGeometry small_geom() {
    RadarGeometry g;
    g.n_samples = 16;
    g.n_chirps = 8;
    g.n_antennas = 8;
    g.azimuth_bins = 16;
    return g;
}

std::int64_t argmax_abs(const std::vector<Complex>& v) {
    std::int64_t best = 0;
    double best_mag = -1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double m = std::abs(v[i]);
        if (m > best_mag) {
            best_mag = m;
            best = static_cast<std::int64_t>(i);
        }
    }
    return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// fft

TEST(Fft, ImpulseIsFlat) {
    std::vector<Complex> x = {1.0, 0.0, 0.0, 0.0};
    fft_pow2(x.data(), 4);
    for (const auto& v : x) {
        EXPECT_NEAR(v.real(), 1.0, 1e-12);
        EXPECT_NEAR(v.imag(), 0.0, 1e-12);
    }
}

TEST(Fft, PureToneHitsExactBin) {
    const std::int64_t n = 128, k = 5;
    std::vector<Complex> x(static_cast<std::size_t>(n));
    for (std::int64_t m = 0; m < n; ++m) {
        const double a = kTwoPi * static_cast<double>(k * m) / static_cast<double>(n);
        x[static_cast<std::size_t>(m)] = Complex(std::cos(a), std::sin(a));
    }
    fft_pow2(x.data(), n);
    for (std::int64_t b = 0; b < n; ++b) {
        if (b == k) {
            EXPECT_NEAR(std::abs(x[static_cast<std::size_t>(b)]), static_cast<double>(n), 1e-9);
        } else {
            EXPECT_LT(std::abs(x[static_cast<std::size_t>(b)]), 1e-9);
        }
    }
}

TEST(Fft, ParsevalAgainstDirectSummation) {
    Rng rng(31);
    const std::int64_t n = 256;
    std::vector<Complex> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    double time_energy = 0.0;
    for (const auto& v : x) time_energy += std::norm(v);
    std::vector<Complex> X = x;
    fft_pow2(X.data(), n);
    double freq_energy = 0.0;
    for (const auto& v : X) freq_energy += std::norm(v);
    freq_energy /= static_cast<double>(n);
    EXPECT_LT(std::abs(time_energy - freq_energy) / time_energy, 1e-9);
}

TEST(Fft, MatchesNaiveDft) {
    Rng rng(32);
    const std::int64_t n = 64;
    std::vector<Complex> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    auto ref = naive_dft(x);
    std::vector<Complex> got = x;
    fft_pow2(got.data(), n);
    for (std::int64_t i = 0; i < n; ++i)
        EXPECT_LT(std::abs(got[static_cast<std::size_t>(i)] - ref[static_cast<std::size_t>(i)]), 1e-9);
}

TEST(Fft, RejectsNonPowerOfTwo) {
    std::vector<Complex> x(12);
    EXPECT_THROW(fft_pow2(x.data(), 12), std::invalid_argument);
    std::int64_t dims[3] = {3, 5, 7};
    std::int64_t out_dims[3];
    EXPECT_THROW(fft_axis(x, dims, 1, 0, out_dims), std::invalid_argument);
}

TEST(Fft, AxisTransformWithZeroPad) {
    // A tone over 4 antennas padded to 8: peak still at its bin.
    std::int64_t dims[3] = {2, 2, 4};
    std::vector<Complex> cube(16, Complex(0.0, 0.0));
    const std::int64_t ka = 3;
    for (std::int64_t a = 0; a < 4; ++a) {
        const double ph = kTwoPi * static_cast<double>(ka * a) / 8.0;
        cube[static_cast<std::size_t>(0 * 8 + 0 * 4 + a)] = Complex(std::cos(ph), std::sin(ph));
    }
    std::int64_t out_dims[3];
    auto out = fft_axis(cube, dims, 2, 8, out_dims);
    EXPECT_EQ(out_dims[2], 8);
    std::vector<Complex> line(out.begin(), out.begin() + 8);
    EXPECT_EQ(argmax_abs(line), ka);
    EXPECT_NEAR(std::abs(line[static_cast<std::size_t>(ka)]), 4.0, 1e-12);
}

// ---------------------------------------------------------------------------
// sca_to_rda

TEST(ScaToRda, PointTargetLandsOnExactBins) {
    SceneSpec scene;
    scene.geom = RadarGeometry{};
    scene.noise_sigma = 0.0;
    scene.seed = 1;
    scene.obstacle_boundary.assign(128, kNoBoundary);
    PointTarget t;
    t.range_bin = 40;
    t.doppler_bin = 10;
    t.azimuth_bin = 80;
    t.amplitude = 1.0;
    scene.targets.push_back(t);

    auto rda = sca_to_rda(synthesize_sca(scene));
    std::int64_t best_r = 0, best_d = 0, best_a = 0;
    double best = -1.0;
    for (std::int64_t r = 0; r < 128; ++r)
        for (std::int64_t d = 0; d < 64; ++d)
            for (std::int64_t a = 0; a < 128; ++a) {
                const double m = std::abs(rda.at(r, d, a));
                if (m > best) {
                    best = m;
                    best_r = r;
                    best_d = d;
                    best_a = a;
                }
            }
    EXPECT_EQ(best_r, 40);
    EXPECT_EQ(best_d, 10);
    EXPECT_EQ(best_a, 80);
    const double expected = 128.0 * 64.0 * 128.0;  // Ns*Nc*Na*amp
    EXPECT_LT(std::abs(best - expected) / expected, 1e-6);
}

TEST(ScaToRda, ZeroCubeStaysZero) {
    RadarCubeSCA sca;
    sca.geom = small_geom();
    sca.data.assign(static_cast<std::size_t>(sca.numel()), Complex(0.0, 0.0));
    auto rda = sca_to_rda(sca);
    for (const auto& v : rda.data) EXPECT_EQ(std::abs(v), 0.0);
}

TEST(ScaToRda, TwentyDbPairKeepsMagnitudeRatio) {
    SceneSpec scene;
    scene.geom = RadarGeometry{};
    scene.noise_sigma = 0.0;
    scene.seed = 2;
    scene.obstacle_boundary.assign(128, kNoBoundary);
    PointTarget a;
    a.range_bin = 30;
    a.doppler_bin = 32;
    a.azimuth_bin = 40;
    a.amplitude = 1.0;
    PointTarget b = a;
    b.range_bin = 90;
    b.azimuth_bin = 100;
    b.amplitude = 0.1;  // 20 dB below
    scene.targets = {a, b};

    auto rda = sca_to_rda(synthesize_sca(scene));
    const double mag_a = std::abs(rda.at(30, 32, 40));
    const double mag_b = std::abs(rda.at(90, 32, 100));
    // Both are local maxima of their neighbourhoods.
    EXPECT_GT(mag_a, std::abs(rda.at(31, 32, 40)));
    EXPECT_GT(mag_b, std::abs(rda.at(89, 32, 100)));
    EXPECT_NEAR(mag_a / mag_b, 10.0, 0.5);
}

TEST(ScaToRda, LinearityOnRandomCubes) {
    Rng rng(33);
    RadarCubeSCA x, y;
    x.geom = y.geom = small_geom();
    const auto n = static_cast<std::size_t>(x.numel());
    x.data.resize(n);
    y.data.resize(n);
    for (auto& v : x.data) v = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    for (auto& v : y.data) v = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double ca = 1.7, cb = -0.6;
    RadarCubeSCA mix;
    mix.geom = x.geom;
    mix.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) mix.data[i] = ca * x.data[i] + cb * y.data[i];

    auto rx = sca_to_rda(x), ry = sca_to_rda(y), rmix = sca_to_rda(mix);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < rmix.data.size(); ++i) {
        worst = std::max(worst, std::abs(rmix.data[i] - (ca * rx.data[i] + cb * ry.data[i])));
        scale = std::max(scale, std::abs(rmix.data[i]));
    }
    EXPECT_LT(worst / scale, 1e-9);
}

// ---------------------------------------------------------------------------
// rda_to_ra

TEST(RdaToRa, AllOnesSumLogIsNearZero) {
    RadarCubeRDA rda;
    rda.geom = RadarGeometry{};
    rda.data.assign(static_cast<std::size_t>(rda.numel()), Complex(1.0, 0.0));
    auto ra = rda_to_ra(rda, RaMode::sum_log);
    for (double v : ra.values) EXPECT_NEAR(v, 64.0 * std::log(1.0 + kLogFloor), 1e-9);
}

TEST(RdaToRa, MaxModePicksTheHotBin) {
    RadarCubeRDA rda;
    rda.geom = small_geom();
    rda.data.assign(static_cast<std::size_t>(rda.numel()), Complex(0.0, 0.0));
    const std::int64_t r = 5, d = 3, a = 7;
    rda.data[static_cast<std::size_t>((r * rda.geom.doppler_bins() + d) * rda.geom.azimuth_bins + a)] =
        Complex(std::exp(1.0), 0.0);
    auto ra = rda_to_ra(rda, RaMode::max);
    EXPECT_NEAR(ra.at(r, a), 1.0, 1e-9);
    EXPECT_NEAR(ra.at(0, 0), std::log(kLogFloor), 1e-9);
}

TEST(RdaToRa, SumLogEqualsBruteForceLoop) {
    Rng rng(34);
    RadarCubeRDA rda;
    rda.geom = small_geom();
    rda.geom.n_samples = 8;
    rda.geom.n_chirps = 4;
    rda.geom.azimuth_bins = 8;
    rda.data.resize(static_cast<std::size_t>(rda.numel()));
    for (auto& v : rda.data) v = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    auto ra = rda_to_ra(rda, RaMode::sum_log);
    for (std::int64_t r = 0; r < 8; ++r)
        for (std::int64_t a = 0; a < 8; ++a) {
            double acc = 0.0;
            for (std::int64_t d = 0; d < 4; ++d) acc += std::log(std::abs(rda.at(r, d, a)) + kLogFloor);
            EXPECT_EQ(ra.at(r, a), acc);
        }
}

TEST(RdaToRa, SumLogPermutationInvariantAlongDoppler) {
    Rng rng(35);
    RadarCubeRDA rda;
    rda.geom = small_geom();
    rda.data.resize(static_cast<std::size_t>(rda.numel()));
    for (auto& v : rda.data) v = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    auto base = rda_to_ra(rda, RaMode::sum_log);

    // Reverse the Doppler slices.
    RadarCubeRDA rev = rda;
    const std::int64_t nd = rda.geom.doppler_bins(), na = rda.geom.azimuth_bins;
    for (std::int64_t r = 0; r < rda.geom.range_bins(); ++r)
        for (std::int64_t d = 0; d < nd; ++d)
            for (std::int64_t a = 0; a < na; ++a)
                rev.data[static_cast<std::size_t>((r * nd + d) * na + a)] = rda.at(r, nd - 1 - d, a);
    auto permuted = rda_to_ra(rev, RaMode::sum_log);
    for (std::size_t i = 0; i < base.values.size(); ++i) EXPECT_NEAR(permuted.values[i], base.values[i], 1e-12);
}

TEST(RdaToRa, MaxIdempotentUnderDuplicatedSlices) {
    Rng rng(36);
    RadarCubeRDA rda;
    rda.geom = small_geom();
    rda.data.resize(static_cast<std::size_t>(rda.numel()));
    for (auto& v : rda.data) v = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    auto base = rda_to_ra(rda, RaMode::max);

    RadarCubeRDA doubled;
    doubled.geom = rda.geom;
    doubled.geom.n_chirps = rda.geom.n_chirps * 2;
    doubled.data.resize(static_cast<std::size_t>(doubled.numel()));
    const std::int64_t nd = rda.geom.doppler_bins(), na = rda.geom.azimuth_bins;
    for (std::int64_t r = 0; r < rda.geom.range_bins(); ++r)
        for (std::int64_t d = 0; d < 2 * nd; ++d)
            for (std::int64_t a = 0; a < na; ++a)
                doubled.data[static_cast<std::size_t>((r * 2 * nd + d) * na + a)] = rda.at(r, d % nd, a);
    auto dup = rda_to_ra(doubled, RaMode::max);
    for (std::size_t i = 0; i < base.values.size(); ++i) EXPECT_EQ(dup.values[i], base.values[i]);
}

// ---------------------------------------------------------------------------
// crop_fov

TEST(CropFov, FullSpanIsIdentity) {
    Rng rng(37);
    RangeAzimuthMap map;
    map.rows = 16;
    map.cols = 128;
    map.values.resize(16 * 128);
    for (auto& v : map.values) v = rng.uniform(-1, 1);
    auto out = crop_fov(map, -45.0, 45.0);
    EXPECT_EQ(out.cols, 128);
    EXPECT_EQ(out.values, map.values);
}

TEST(CropFov, RightHalfSelectsSixtyFourColumns) {
    RangeAzimuthMap map;
    map.rows = 4;
    map.cols = 128;
    map.values.resize(4 * 128);
    for (std::size_t i = 0; i < map.values.size(); ++i) map.values[i] = static_cast<double>(i % 128);
    auto out = crop_fov(map, 0.0, 45.0);
    EXPECT_EQ(out.cols, 64);
    EXPECT_EQ(out.at(0, 0), 64.0);  // first kept column is index 64
    // Column angles survive the crop.
    EXPECT_NEAR(out.angle_of_column(0), map.angle_of_column(64), 1e-12);
    EXPECT_NEAR(out.angle_of_column(63), map.angle_of_column(127), 1e-12);
    // Cropping twice with the same bounds changes nothing.
    auto again = crop_fov(out, out.angle_min_deg, out.angle_max_deg);
    EXPECT_EQ(again.values, out.values);
    EXPECT_THROW(crop_fov(map, 46.0, 50.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// CA-CFAR

TEST(CaCfar, ConstantMapHasNoDetections) {
    RangeAzimuthMap map;
    map.rows = 32;
    map.cols = 32;
    map.values.assign(32 * 32, 3.5);
    CfarSpec spec;
    spec.scale_alpha = 1.5;
    auto det = ca_cfar_2d(map, spec);
    for (auto d : det) EXPECT_EQ(d, 0);
}

TEST(CaCfar, SingleSpikeIsTheOnlyDetection) {
    RangeAzimuthMap map;
    map.rows = 32;
    map.cols = 32;
    map.values.assign(32 * 32, 1.0);
    map.at(12, 20) = 100.0;
    CfarSpec spec;
    spec.scale_alpha = 5.0;
    auto det = ca_cfar_2d(map, spec);
    std::int64_t hits = 0;
    for (std::int64_t r = 0; r < 32; ++r)
        for (std::int64_t c = 0; c < 32; ++c) hits += det[static_cast<std::size_t>(r * 32 + c)];
    EXPECT_EQ(hits, 1);
    EXPECT_EQ(det[12 * 32 + 20], 1);
}

TEST(CaCfar, FalseAlarmRateTracksDesignPfa) {
    // Exponential noise power; alpha chosen for PFA=1e-3 must land within 3x.
    Rng rng(38);
    RangeAzimuthMap map;
    map.rows = 1000;
    map.cols = 1000;
    map.values.resize(1000 * 1000);
    for (auto& v : map.values) v = -std::log(1.0 - rng.uniform());
    CfarSpec spec;
    spec.guard_rows = spec.guard_cols = 2;
    spec.train_rows = spec.train_cols = 4;
    const std::int64_t n_train = (2 * 6 + 1) * (2 * 6 + 1) - (2 * 2 + 1) * (2 * 2 + 1);
    spec.scale_alpha = cfar_alpha_for_pfa(1e-3, n_train);
    auto det = ca_cfar_2d(map, spec);
    const double rate = std::accumulate(det.begin(), det.end(), 0.0) / static_cast<double>(det.size());
    EXPECT_GT(rate, 1e-3 / 3.0);
    EXPECT_LT(rate, 1e-3 * 3.0);
}

TEST(CaCfar, RejectsEmptyTrainingWindow) {
    RangeAzimuthMap map;
    map.rows = 4;
    map.cols = 4;
    map.values.assign(16, 1.0);
    CfarSpec spec;
    spec.train_rows = 0;
    EXPECT_THROW(ca_cfar_2d(map, spec), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// polar <-> cartesian resampling

TEST(Resample, BoresightPointMapsToCentreColumnPair) {
    PolarGrid pg;
    CartesianGrid cg;
    cg.cols = 129;  // odd lattice puts a cell exactly on the x axis (y = 0)
    const std::int64_t r0 = 40;
    // Boresight (theta=0) falls between columns 63 and 64; nearest rounding
    // picks 64 of the centre pair.
    std::vector<double> polar(static_cast<std::size_t>(pg.rows * pg.cols), 0.0);
    polar[static_cast<std::size_t>(r0 * pg.cols + 64)] = 1.0;
    auto cart = polar_to_cartesian(polar, pg, cg, Interp::nearest, -1.0);
    // Cartesian cell nearest (x = r0*bin, y = 0) must sample that polar cell.
    const double x = static_cast<double>(r0) * pg.range_bin_m;
    const std::int64_t ix = static_cast<std::int64_t>(std::llround(x / (cg.x_max - cg.x_min) * 127.0));
    EXPECT_EQ(cart[static_cast<std::size_t>(ix * cg.cols + 64)], 1.0);
    // And the row index round-trips: r = sqrt(x^2+0) -> bin round(x/bin_m) = r0.
    EXPECT_EQ(std::llround(cg.x_of(ix) / pg.range_bin_m), r0);
}

TEST(Resample, AllOpenMaskFillsTheWedgeOnly) {
    PolarGrid pg;
    CartesianGrid cg;
    std::vector<double> polar(static_cast<std::size_t>(pg.rows * pg.cols), 1.0);
    auto cart = polar_to_cartesian(polar, pg, cg, Interp::nearest, -1.0);
    std::int64_t inside = 0, outside = 0;
    for (std::int64_t ix = 0; ix < cg.rows; ++ix) {
        for (std::int64_t iy = 0; iy < cg.cols; ++iy) {
            const double x = cg.x_of(ix), y = cg.y_of(iy);
            const double r = std::sqrt(x * x + y * y);
            const double theta = std::atan2(y, x) * 180.0 / 3.14159265358979323846;
            const double v = cart[static_cast<std::size_t>(ix * cg.cols + iy)];
            if (r <= 127.0 * pg.range_bin_m && std::abs(theta) <= 45.0) {
                EXPECT_EQ(v, 1.0);
                ++inside;
            } else {
                EXPECT_EQ(v, -1.0);
                ++outside;
            }
        }
    }
    EXPECT_GT(inside, 0);
    EXPECT_GT(outside, 0);
}

TEST(Resample, RoundTripAgreementPinnedFromMeasurement) {
    // Measured on the fixed 128x128 grids (nearest interp): scene-style masks
    // round-trip polar->cart->polar at >= 0.962 (worst of 20 seeds); fully
    // random masks drop to ~0.725 because many near-apex polar cells share one
    // cartesian cell; cart->polar->cart recovers >= 0.970 since the polar
    // lattice oversamples the wedge almost everywhere. Thresholds pinned just
    // below those measurements.
    PolarGrid pg;
    CartesianGrid cg;
    double worst_scene = 1.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto scene = sample_scene(900 + seed, SceneParams{});
        auto mask = ground_truth_mask(scene);
        std::vector<double> polar(mask.data.begin(), mask.data.end());
        auto cart = polar_to_cartesian(polar, pg, cg, Interp::nearest, 0.0);
        auto back = cartesian_to_polar(cart, cg, pg, Interp::nearest, 0.0);
        std::int64_t agree = 0;
        for (std::size_t i = 0; i < polar.size(); ++i) agree += polar[i] == back[i] ? 1 : 0;
        worst_scene = std::min(worst_scene, static_cast<double>(agree) / static_cast<double>(polar.size()));
    }
    EXPECT_GE(worst_scene, 0.955);

    Rng rng(39);
    std::vector<double> polar(static_cast<std::size_t>(pg.rows * pg.cols));
    for (auto& v : polar) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    auto cart = polar_to_cartesian(polar, pg, cg, Interp::nearest, 0.0);
    auto back = cartesian_to_polar(cart, cg, pg, Interp::nearest, 0.0);
    std::int64_t agree = 0;
    for (std::size_t i = 0; i < polar.size(); ++i) agree += polar[i] == back[i] ? 1 : 0;
    EXPECT_GE(static_cast<double>(agree) / static_cast<double>(polar.size()), 0.70);

    // Opposite direction on a random cartesian payload, judged inside the wedge.
    std::vector<double> cart2(static_cast<std::size_t>(cg.rows * cg.cols));
    for (auto& v : cart2) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    auto pol2 = cartesian_to_polar(cart2, cg, pg, Interp::nearest, 0.0);
    auto back2 = polar_to_cartesian(pol2, pg, cg, Interp::nearest, -1.0);
    std::int64_t agree2 = 0, considered = 0;
    for (std::size_t i = 0; i < cart2.size(); ++i) {
        if (back2[i] < 0) continue;
        ++considered;
        agree2 += cart2[i] == back2[i] ? 1 : 0;
    }
    EXPECT_GE(static_cast<double>(agree2) / static_cast<double>(considered), 0.96);
}

TEST(Resample, RejectsDegenerateGrids) {
    PolarGrid pg;
    pg.cols = 1;
    CartesianGrid cg;
    std::vector<double> data(static_cast<std::size_t>(pg.rows));
    EXPECT_THROW(polar_to_cartesian(data, pg, cg, Interp::nearest, 0.0), std::invalid_argument);
}
