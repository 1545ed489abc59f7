#include "polarseg/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "polarseg/image_io.hpp"
#include "polarseg/parallel.hpp"
#include "polarseg/rten.hpp"

namespace polarseg {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string frame_name(const char* stem, std::int64_t i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%06lld.%s", stem, static_cast<long long>(i), ext);
    return buf;
}

}  // namespace

PointTarget make_target(const RadarGeometry& geom, double range_m, double azimuth_deg, double velocity_kmph,
                        double amplitude) {
    if (amplitude <= 0.0) throw std::invalid_argument("make_target: amplitude must be positive");
    PointTarget t;
    t.range_bin = std::clamp<std::int64_t>(std::llround(range_m / geom.range_bin_m), 0, geom.range_bins() - 1);
    t.range_m = static_cast<double>(t.range_bin) * geom.range_bin_m;
    t.azimuth_bin = std::clamp<std::int64_t>(geom.column_of_azimuth(azimuth_deg), 0, geom.azimuth_bins - 1);
    t.azimuth_deg = geom.azimuth_of_column(t.azimuth_bin);
    const std::int64_t half = geom.doppler_bins() / 2;
    const std::int64_t signed_bin =
        std::clamp<std::int64_t>(std::llround(velocity_kmph / geom.doppler_bin_kmph()), -half, half - 1);
    t.doppler_bin = signed_bin + half;
    t.velocity_kmph = static_cast<double>(signed_bin) * geom.doppler_bin_kmph();
    t.amplitude = amplitude;
    return t;
}

SceneSpec sample_scene(std::uint64_t seed, const SceneParams& params, const RadarGeometry& geom) {
    SceneSpec scene;
    scene.geom = geom;
    scene.seed = seed;
    scene.noise_sigma = params.noise_sigma;
    scene.obstacle_boundary.assign(static_cast<std::size_t>(geom.azimuth_bins), kNoBoundary);
    if (params.empty) return scene;

    Rng rng = Rng(seed).split(0);

    auto draw = [&]() {
        scene.targets.clear();
        scene.obstacle_boundary.assign(static_cast<std::size_t>(geom.azimuth_bins), kNoBoundary);
        std::set<std::tuple<std::int64_t, std::int64_t, std::int64_t>> used_bins;
        const int n_obstacles = static_cast<int>(rng.uniform_int(params.min_obstacles, params.max_obstacles));

        for (int ob = 0; ob < n_obstacles; ++ob) {
            const std::int64_t span = rng.uniform_int(params.min_span_cols, params.max_span_cols);
            const std::int64_t c0 = rng.uniform_int(0, geom.azimuth_bins - span);
            const std::int64_t face_bin = rng.uniform_int(params.min_face_bin, params.max_face_bin);
            const int n_targets = static_cast<int>(rng.uniform_int(params.min_face_targets, params.max_face_targets));

            for (std::int64_t c = c0; c < c0 + span; ++c) {
                auto& b = scene.obstacle_boundary[static_cast<std::size_t>(c)];
                b = (b == kNoBoundary) ? face_bin : std::min(b, face_bin);
            }

            for (int k = 0; k < n_targets; ++k) {
                // First target sits on the near face so the boundary is observable.
                const std::int64_t col = k == 0 ? c0 + span / 2 : c0 + rng.uniform_int(0, span - 1);
                const std::int64_t depth = k == 0 ? 0 : (rng.uniform() < 0.6 ? 0 : rng.uniform_int(1, 3));
                const std::int64_t rbin = std::min(face_bin + depth, geom.range_bins() - 1);
                // Parked targets cluster around zero velocity.
                const std::int64_t voff = rng.uniform() < 0.6 ? 0 : rng.uniform_int(-2, 2);
                const std::int64_t dbin = geom.doppler_zero_bin() + voff;
                if (!used_bins.insert({rbin, dbin, col}).second) continue;  // bin collision: drop
                PointTarget t;
                t.range_bin = rbin;
                t.range_m = static_cast<double>(rbin) * geom.range_bin_m;
                t.azimuth_bin = col;
                t.azimuth_deg = geom.azimuth_of_column(col);
                t.doppler_bin = dbin;
                t.velocity_kmph = static_cast<double>(dbin - geom.doppler_zero_bin()) * geom.doppler_bin_kmph();
                t.amplitude = rng.uniform(params.min_amplitude, params.max_amplitude);
                scene.targets.push_back(t);
            }
        }
    };

    auto open_fraction = [&]() {
        double open = 0.0;
        for (auto b : scene.obstacle_boundary)
            open += b == kNoBoundary ? static_cast<double>(geom.range_bins()) : static_cast<double>(b);
        return open / static_cast<double>(geom.range_bins() * geom.azimuth_bins);
    };

    // Redraw (continuing the same stream, so still a pure function of the
    // seed) until the class balance lands in the pinned band.
    for (int attempt = 0; attempt < 200; ++attempt) {
        draw();
        const double f = open_fraction();
        if (f >= params.min_open_fraction && f <= params.max_open_fraction) break;
    }
    return scene;
}

RadarCubeSCA synthesize_sca(const SceneSpec& scene) {
    const RadarGeometry& g = scene.geom;
    RadarCubeSCA sca;
    sca.geom = g;
    sca.data.assign(static_cast<std::size_t>(sca.numel()), Complex(0.0, 0.0));

    const std::int64_t ns = g.n_samples, nc = g.n_chirps, na = g.n_antennas;
    std::vector<Complex> u(static_cast<std::size_t>(ns)), v(static_cast<std::size_t>(nc)),
        t(static_cast<std::size_t>(na));

    for (const PointTarget& target : scene.targets) {
        if (target.range_bin < 0 || target.range_bin >= g.range_bins() || target.azimuth_bin < 0 ||
            target.azimuth_bin >= g.azimuth_bins || target.doppler_bin < 0 || target.doppler_bin >= g.doppler_bins())
            throw std::invalid_argument("synthesize_sca: target bin out of range");
        // The chirp tone uses the unshifted FFT bin; sca_to_rda's centre shift
        // then lands the peak at target.doppler_bin.
        const std::int64_t kd_unshifted = (target.doppler_bin + g.doppler_bins() / 2) % g.doppler_bins();
        for (std::int64_t s = 0; s < ns; ++s) {
            const double a = kTwoPi * static_cast<double>(target.range_bin * s) / static_cast<double>(ns);
            u[static_cast<std::size_t>(s)] = Complex(std::cos(a), std::sin(a));
        }
        for (std::int64_t c = 0; c < nc; ++c) {
            const double a = kTwoPi * static_cast<double>(kd_unshifted * c) / static_cast<double>(nc);
            v[static_cast<std::size_t>(c)] = Complex(std::cos(a), std::sin(a));
        }
        for (std::int64_t an = 0; an < na; ++an) {
            // Azimuth phase advances against the padded FFT length.
            const double a = kTwoPi * static_cast<double>(target.azimuth_bin * an) / static_cast<double>(g.azimuth_bins);
            t[static_cast<std::size_t>(an)] = Complex(std::cos(a), std::sin(a));
        }
        parallel_for(ns, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t s = lo; s < hi; ++s) {
                const Complex us = target.amplitude * u[static_cast<std::size_t>(s)];
                for (std::int64_t c = 0; c < nc; ++c) {
                    const Complex usc = us * v[static_cast<std::size_t>(c)];
                    Complex* row = sca.data.data() + (s * nc + c) * na;
                    for (std::int64_t an = 0; an < na; ++an) row[an] += usc * t[static_cast<std::size_t>(an)];
                }
            }
        });
    }

    if (scene.noise_sigma > 0.0) {
        const double comp_std = scene.noise_sigma / std::sqrt(2.0);
        Rng rng = Rng(scene.seed).split(1);
        for (auto& cell : sca.data) cell += Complex(comp_std * rng.normal(), comp_std * rng.normal());
    }
    return sca;
}

Tensor ground_truth_mask(const SceneSpec& scene) {
    const RadarGeometry& g = scene.geom;
    Tensor mask(Shape{g.range_bins(), g.azimuth_bins});
    for (std::int64_t c = 0; c < g.azimuth_bins; ++c) {
        const std::int64_t boundary = scene.obstacle_boundary[static_cast<std::size_t>(c)];
        for (std::int64_t r = 0; r < g.range_bins(); ++r) {
            const bool open = boundary == kNoBoundary || r < boundary;
            mask.at({r, c}) = open ? 1.0f : 0.0f;
        }
    }
    return mask;
}

std::string generate_dataset(const std::string& out_dir, const DatasetParams& params) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::int64_t n = params.n_frames;
    if (n < 1) throw std::invalid_argument("generate_dataset: need at least one frame");

    const std::int64_t blocks = std::max<std::int64_t>(1, std::min(params.n_blocks, n));
    const std::int64_t test_blocks =
        std::min(blocks - (params.train_fraction > 0.0 ? 1 : 0),
                 static_cast<std::int64_t>(std::llround((1.0 - params.train_fraction) * static_cast<double>(blocks))));

    std::vector<std::string> splits(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t b = std::min(i * blocks / n, blocks - 1);
        splits[static_cast<std::size_t>(i)] = b >= blocks - test_blocks ? "test" : "train";
    }

    parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            const std::uint64_t seed = params.base_seed + static_cast<std::uint64_t>(i);
            const SceneSpec scene = sample_scene(seed, params.scene);
            const RadarCubeSCA sca = synthesize_sca(scene);

            if (params.outputs.sca) {
                std::vector<std::complex<float>> c64(sca.data.size());
                for (std::size_t k = 0; k < sca.data.size(); ++k)
                    c64[k] = std::complex<float>(static_cast<float>(sca.data[k].real()),
                                                 static_cast<float>(sca.data[k].imag()));
                rten_write_c64(fs::path(out_dir) / frame_name("sca", i, "rten"),
                               c64, Shape{sca.geom.n_samples, sca.geom.n_chirps, sca.geom.n_antennas});
            }
            if (params.outputs.ra || params.outputs.rad) {
                const RadarCubeRDA rda = sca_to_rda(sca);
                if (params.outputs.ra) {
                    const RangeAzimuthMap ra = rda_to_ra(rda, params.ra_mode);
                    Tensor f(Shape{ra.rows, ra.cols});
                    for (std::size_t k = 0; k < ra.values.size(); ++k) f.data[k] = static_cast<float>(ra.values[k]);
                    rten_write(fs::path(out_dir) / frame_name("ra", i, "rten"), f);
                }
                if (params.outputs.rad) {
                    rten_write(fs::path(out_dir) / frame_name("rad", i, "rten"), rda_to_rad_tensor(rda));
                }
            }
            if (params.outputs.mask) {
                write_mask_pgm(fs::path(out_dir) / frame_name("mask", i, "pgm"), ground_truth_mask(scene));
            }
        }
    });

    nlohmann::json manifest;
    manifest["format"] = "polarseg-dataset";
    manifest["version"] = 1;
    manifest["n_frames"] = n;
    manifest["base_seed"] = params.base_seed;
    manifest["ra_mode"] = params.ra_mode == RaMode::sum_log ? "sum_log" : "max";
    manifest["train_fraction"] = params.train_fraction;
    manifest["blocks"] = blocks;
    manifest["test_blocks"] = test_blocks;
    const RadarGeometry geom;
    manifest["geometry"] = {{"n_samples", geom.n_samples},
                            {"n_chirps", geom.n_chirps},
                            {"n_antennas", geom.n_antennas},
                            {"azimuth_bins", geom.azimuth_bins},
                            {"range_bin_m", geom.range_bin_m},
                            {"velocity_span_kmph", geom.velocity_span_kmph},
                            {"azimuth_fov_deg", geom.azimuth_fov_deg}};
    manifest["scene_params"] = {{"min_obstacles", params.scene.min_obstacles},
                                {"max_obstacles", params.scene.max_obstacles},
                                {"noise_sigma", params.scene.noise_sigma},
                                {"empty", params.scene.empty}};
    nlohmann::json frames = nlohmann::json::array();
    for (std::int64_t i = 0; i < n; ++i) {
        nlohmann::json f;
        f["index"] = i;
        f["seed"] = params.base_seed + static_cast<std::uint64_t>(i);
        f["split"] = splits[static_cast<std::size_t>(i)];
        nlohmann::json files;
        if (params.outputs.sca) files["sca"] = frame_name("sca", i, "rten");
        if (params.outputs.ra) files["ra"] = frame_name("ra", i, "rten");
        if (params.outputs.rad) files["rad"] = frame_name("rad", i, "rten");
        if (params.outputs.mask) files["mask"] = frame_name("mask", i, "pgm");
        f["files"] = files;
        frames.push_back(f);
    }
    manifest["frames"] = frames;

    const std::string manifest_path = fs::path(out_dir) / "manifest.json";
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw std::runtime_error("generate_dataset: cannot write " + manifest_path);
    out << manifest.dump(2) << "\n";
    return manifest_path;
}

}  // namespace polarseg
