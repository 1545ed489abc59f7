#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "polarseg/radar.hpp"
#include "polarseg/rng.hpp"
#include "polarseg/tensor.hpp"

namespace polarseg {

// Point scatterer snapped to integer (range, doppler, azimuth) bins so the
// FFT peaks land exactly on lattice points.
struct PointTarget {
    double range_m = 0.0;
    double azimuth_deg = 0.0;
    double velocity_kmph = 0.0;
    double amplitude = 1.0;
    std::int64_t range_bin = 0;
    std::int64_t azimuth_bin = 0;
    std::int64_t doppler_bin = 0;  // centre-shifted index (zero velocity at D/2)
};

PointTarget make_target(const RadarGeometry& geom, double range_m, double azimuth_deg, double velocity_kmph,
                        double amplitude);

inline constexpr std::int64_t kNoBoundary = -1;

// A parking scene: clustered point targets plus the per-column first-obstacle
// boundary that defines the open-space ground truth.
struct SceneSpec {
    RadarGeometry geom;
    std::vector<PointTarget> targets;
    std::vector<std::int64_t> obstacle_boundary;  // per azimuth column; kNoBoundary = fully open
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

struct SceneParams {
    int min_obstacles = 4, max_obstacles = 8;
    int min_span_cols = 10, max_span_cols = 26;
    std::int64_t min_face_bin = 36, max_face_bin = 104;
    int min_face_targets = 3, max_face_targets = 10;
    double min_amplitude = 0.6, max_amplitude = 1.8;
    double noise_sigma = 70.0;
    // Scenes outside this open-pixel window are redrawn (deterministically)
    // so the dataset stays inside the pinned class-balance band.
    double min_open_fraction = 0.40, max_open_fraction = 0.80;
    bool empty = false;

    static SceneParams empty_scene() {
        SceneParams p;
        p.empty = true;
        p.noise_sigma = 0.0;
        return p;
    }
};

// Deterministic per seed: the same (seed, params, geom) always yields the
// same SceneSpec.
SceneSpec sample_scene(std::uint64_t seed, const SceneParams& params, const RadarGeometry& geom = RadarGeometry{});

// Sum of separable complex tones, one per target, plus circular complex
// Gaussian noise of std noise_sigma (variance split evenly across re/im).
RadarCubeSCA synthesize_sca(const SceneSpec& scene);

// Column k: bins in front of the boundary are open (1); the boundary bin and
// everything behind it is occupied (0); no boundary -> fully open column.
Tensor ground_truth_mask(const SceneSpec& scene);

struct DatasetOutputs {
    bool sca = true;
    bool ra = true;
    bool rad = true;
    bool mask = true;
};

struct DatasetParams {
    std::int64_t n_frames = 10;
    std::uint64_t base_seed = 1;
    SceneParams scene;
    RaMode ra_mode = RaMode::sum_log;
    double train_fraction = 0.8;
    std::int64_t n_blocks = 10;  // contiguous seed blocks emulating sequences
    DatasetOutputs outputs;
};

// Writes per-frame files (sca_i.rten, ra_i.rten, rad_i.rten, mask_i.pgm as
// selected) plus manifest.json; held-out frames are whole trailing seed
// blocks, never interleaved with training frames. Returns the manifest path.
std::string generate_dataset(const std::string& out_dir, const DatasetParams& params);

}  // namespace polarseg
