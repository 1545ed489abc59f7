#pragma once

#include <optional>
#include <string>
#include <vector>

#include "polarseg/losses.hpp"
#include "polarseg/metrics.hpp"
#include "polarseg/model.hpp"
#include "polarseg/radar.hpp"
#include "polarseg/tensor.hpp"

namespace polarseg {

struct TrainConfig {
    std::int64_t batch_size = 64;
    double lr0 = 0.1;
    double decay_factor = 0.8;
    std::int64_t decay_every_steps = 3500;
    std::int64_t total_steps = 1000;
    LossKind loss = LossKind::smce_train;
    std::string input = "RA";  // RA | RAD
    std::uint64_t seed = 1;
    double rmsprop_rho = 0.9;
    double rmsprop_eps = 1e-7;
    std::int64_t eval_every = 250;

    void validate() const;
};

// lr0 * decay^floor(step / decay_every); never increases.
double lr_at_step(std::int64_t step, const TrainConfig& cfg);

// Frames loaded eagerly from a dataset manifest; inputs are standardized
// per frame at load time.
struct FrameSet {
    std::vector<Tensor> inputs;  // [H,W,C]
    std::vector<Tensor> masks;   // [H,W] in {0,1}
    std::vector<int> split;      // 0 = train, 1 = test
    std::string input_kind;
    std::string ra_mode;

    static FrameSet load(const std::string& dataset_dir, const std::string& input_kind);
    std::vector<std::int64_t> indices(int which_split) const;
};

struct EvalReport {
    ConfusionMatrix cm;
    IouReport global;
    double frame_avg_mean_iou = 0.0;
    std::int64_t frames = 0;

    std::string to_json(const std::string& split_name, const std::string& loss_name) const;
};

struct OptimizerState {
    std::vector<Tensor> accumulators;  // parallel to the trainable params
    TensorD w_acc{Shape{2}};           // accumulator for the class weights
};

struct Checkpoint {
    ModelConfig model_config;
    TrainConfig train_config;
    std::int64_t step = 0;
    ClassWeights class_weights;
};

// Checkpoint directory: manifest.json plus one RTEN file per tensor, each
// protected by an FNV-1a 64 content hash checked on load.
void save_checkpoint(const std::string& dir, const PolarNet& model, const OptimizerState& opt,
                     const Checkpoint& meta);
Checkpoint load_checkpoint(const std::string& dir, std::optional<PolarNet>& model, OptimizerState& opt);

struct StepRecord {
    std::int64_t step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    std::vector<StepRecord> steps;
    double best_eval_miou = -1.0;
    std::int64_t best_eval_step = -1;
    std::string best_checkpoint_dir;
    std::string final_checkpoint_dir;
    ClassWeights class_weights;
};

// Deterministic given cfg.seed: fixed shuffle order, per-step dropout
// streams, ordered gradient reductions. Writes a JSON-lines log, periodic
// held-out evals, the best-mIoU checkpoint and the final checkpoint under
// out_dir. Aborts with a diagnostic if the loss turns non-finite.
TrainResult train(const FrameSet& data, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::string& out_dir);

EvalReport evaluate(PolarNet& model, const FrameSet& data, int which_split);

// Resume helper used by the optimizer-continuation tests: runs `steps` more
// training steps on a loaded model/optimizer state starting at meta.step.
void train_steps(PolarNet& model, OptimizerState& opt, Checkpoint& meta, const FrameSet& data,
                 std::int64_t steps, std::vector<StepRecord>* log = nullptr);

}  // namespace polarseg
