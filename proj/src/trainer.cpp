#include "polarseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "polarseg/image_io.hpp"
#include "polarseg/nn_ops.hpp"
#include "polarseg/rten.hpp"

namespace polarseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 0xA;
constexpr std::uint64_t kShuffleStreamBase = 0xE000;
constexpr std::uint64_t kDropoutStreamBase = 0xD000;

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("fnv1a64: cannot open " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string head_to_string(HeadKind h) { return h == HeadKind::sigmoid_1ch ? "sigmoid_1ch" : "softmax_2ch"; }
HeadKind head_from_string(const std::string& s) {
    if (s == "sigmoid_1ch") return HeadKind::sigmoid_1ch;
    if (s == "softmax_2ch") return HeadKind::softmax_2ch;
    throw std::invalid_argument("unknown head kind '" + s + "'");
}

json model_config_to_json(const ModelConfig& c) {
    return json{{"input_hw", c.input_hw},
                {"input_channels", c.input_channels},
                {"col_kernel", c.col_kernel},
                {"row_kernel", c.row_kernel},
                {"encoder_channels", c.encoder_channels},
                {"dec_t1_channels", c.dec_t1_channels},
                {"dec_t2_channels", c.dec_t2_channels},
                {"dec_smooth_channels", c.dec_smooth_channels},
                {"dec_wide_channels", c.dec_wide_channels},
                {"smooth_kernel_rows", c.smooth_kernel_rows},
                {"smooth_kernel_cols", c.smooth_kernel_cols},
                {"wide_kernel_rows", c.wide_kernel_rows},
                {"dropout_rate", c.dropout_rate},
                {"bn_epsilon", c.bn_epsilon},
                {"bn_momentum", c.bn_momentum},
                {"head", head_to_string(c.head)}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    c.input_hw = j.at("input_hw");
    c.input_channels = j.at("input_channels");
    c.col_kernel = j.at("col_kernel");
    c.row_kernel = j.at("row_kernel");
    c.encoder_channels = j.at("encoder_channels").get<std::vector<std::int64_t>>();
    c.dec_t1_channels = j.at("dec_t1_channels");
    c.dec_t2_channels = j.at("dec_t2_channels");
    c.dec_smooth_channels = j.at("dec_smooth_channels");
    c.dec_wide_channels = j.at("dec_wide_channels");
    c.smooth_kernel_rows = j.at("smooth_kernel_rows");
    c.smooth_kernel_cols = j.at("smooth_kernel_cols");
    c.wide_kernel_rows = j.at("wide_kernel_rows");
    c.dropout_rate = j.at("dropout_rate");
    c.bn_epsilon = j.at("bn_epsilon");
    c.bn_momentum = j.at("bn_momentum");
    c.head = head_from_string(j.at("head"));
    return c;
}

json train_config_to_json(const TrainConfig& c) {
    return json{{"batch_size", c.batch_size},
                {"lr0", c.lr0},
                {"decay_factor", c.decay_factor},
                {"decay_every_steps", c.decay_every_steps},
                {"total_steps", c.total_steps},
                {"loss", loss_kind_to_string(c.loss)},
                {"input", c.input},
                {"seed", c.seed},
                {"rmsprop_rho", c.rmsprop_rho},
                {"rmsprop_eps", c.rmsprop_eps},
                {"eval_every", c.eval_every}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.batch_size = j.at("batch_size");
    c.lr0 = j.at("lr0");
    c.decay_factor = j.at("decay_factor");
    c.decay_every_steps = j.at("decay_every_steps");
    c.total_steps = j.at("total_steps");
    c.loss = loss_kind_from_string(j.at("loss"));
    c.input = j.at("input");
    c.seed = j.at("seed");
    c.rmsprop_rho = j.at("rmsprop_rho");
    c.rmsprop_eps = j.at("rmsprop_eps");
    c.eval_every = j.at("eval_every");
    return c;
}

// Batch membership as a pure function of the step, so resumed runs see the
// same stream: the permutation of epoch e comes from its own rng stream.
std::vector<std::int64_t> epoch_permutation(std::uint64_t seed, std::int64_t epoch, std::int64_t n) {
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), std::int64_t(0));
    Rng rng = Rng(seed).split(kShuffleStreamBase + static_cast<std::uint64_t>(epoch));
    for (std::int64_t i = n - 1; i > 0; --i)
        std::swap(perm[static_cast<std::size_t>(i)], perm[rng.uniform_index(static_cast<std::uint64_t>(i + 1))]);
    return perm;
}

std::vector<std::int64_t> batch_indices(std::uint64_t seed, std::int64_t step, std::int64_t batch,
                                        const std::vector<std::int64_t>& pool) {
    const std::int64_t n = static_cast<std::int64_t>(pool.size());
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(batch));
    std::int64_t pos = step * batch;
    std::int64_t epoch = pos / n;
    std::int64_t off = pos % n;
    auto perm = epoch_permutation(seed, epoch, n);
    while (static_cast<std::int64_t>(out.size()) < batch) {
        if (off == n) {
            ++epoch;
            off = 0;
            perm = epoch_permutation(seed, epoch, n);
        }
        out.push_back(pool[static_cast<std::size_t>(perm[static_cast<std::size_t>(off++)])]);
    }
    return out;
}

void stack_batch(const FrameSet& data, const std::vector<std::int64_t>& ids, Tensor* xs, Tensor* ys) {
    const Tensor& first = data.inputs[static_cast<std::size_t>(ids[0])];
    const std::int64_t h = first.dim(0), w = first.dim(1), c = first.dim(2);
    *xs = Tensor(Shape{static_cast<std::int64_t>(ids.size()), h, w, c});
    *ys = Tensor(Shape{static_cast<std::int64_t>(ids.size()), h, w});
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const auto& in = data.inputs[static_cast<std::size_t>(ids[k])];
        const auto& mk = data.masks[static_cast<std::size_t>(ids[k])];
        std::copy(in.data.begin(), in.data.end(), xs->data.begin() + static_cast<std::int64_t>(k) * in.numel());
        std::copy(mk.data.begin(), mk.data.end(), ys->data.begin() + static_cast<std::int64_t>(k) * mk.numel());
    }
}

std::string sanitize(const std::string& name) {
    std::string out = name;
    for (char& ch : out)
        if (ch == '/' || ch == '\\') ch = '_';
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1 || total_steps < 0 || decay_every_steps < 1 || eval_every < 1)
        throw std::invalid_argument("TrainConfig: non-positive sizes");
    if (lr0 <= 0.0 || decay_factor <= 0.0 || decay_factor > 1.0)
        throw std::invalid_argument("TrainConfig: bad learning-rate schedule");
    if (input != "RA" && input != "RAD") throw std::invalid_argument("TrainConfig: input must be RA or RAD");
}

double lr_at_step(std::int64_t step, const TrainConfig& cfg) {
    if (step < 0) throw std::invalid_argument("lr_at_step: negative step");
    return cfg.lr0 * std::pow(cfg.decay_factor, static_cast<double>(step / cfg.decay_every_steps));
}

FrameSet FrameSet::load(const std::string& dataset_dir, const std::string& input_kind) {
    std::ifstream in(fs::path(dataset_dir) / "manifest.json");
    if (!in) throw std::runtime_error("FrameSet: cannot open manifest in " + dataset_dir);
    json manifest;
    in >> manifest;

    const std::string key = input_kind == "RA" ? "ra" : "rad";
    FrameSet out;
    out.input_kind = input_kind;
    out.ra_mode = manifest.value("ra_mode", "sum_log");
    for (const auto& f : manifest.at("frames")) {
        const auto& files = f.at("files");
        if (!files.contains(key))
            throw std::runtime_error("FrameSet: dataset lacks '" + key + "' tensors (regenerate with that output)");
        Tensor x = rten_read_f32(fs::path(dataset_dir) / files.at(key).get<std::string>());
        if (x.rank() == 2) x.shape = {x.dim(0), x.dim(1), 1};
        out.inputs.push_back(standardize(x));
        out.masks.push_back(read_mask_pgm(fs::path(dataset_dir) / files.at("mask").get<std::string>()));
        out.split.push_back(f.at("split") == "test" ? 1 : 0);
    }
    if (out.inputs.empty()) throw std::runtime_error("FrameSet: empty dataset");
    return out;
}

std::vector<std::int64_t> FrameSet::indices(int which_split) const {
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == which_split) out.push_back(static_cast<std::int64_t>(i));
    return out;
}

std::string EvalReport::to_json(const std::string& split_name, const std::string& loss_name) const {
    json j;
    j["split"] = split_name;
    if (!loss_name.empty()) j["loss"] = loss_name;
    j["frames"] = frames;
    j["pixels"] = cm.total();
    j["confusion"] = {{"pred0_act0", cm.counts[0][0]},
                      {"pred0_act1", cm.counts[0][1]},
                      {"pred1_act0", cm.counts[1][0]},
                      {"pred1_act1", cm.counts[1][1]}};
    j["iou_occupied"] = global.present[0] ? json(global.iou[0]) : json();
    j["iou_open"] = global.present[1] ? json(global.iou[1]) : json();
    j["mean_iou"] = global.mean_iou;
    j["mean_iou_frame_avg"] = frame_avg_mean_iou;
    return j.dump();
}

EvalReport evaluate(PolarNet& model, const FrameSet& data, int which_split) {
    const auto ids = data.indices(which_split);
    if (ids.empty()) throw std::invalid_argument("evaluate: split has no frames");
    EvalReport rep;
    rep.frames = static_cast<std::int64_t>(ids.size());
    double frame_sum = 0.0;
    const std::int64_t eval_batch = 8;
    for (std::size_t pos = 0; pos < ids.size(); pos += eval_batch) {
        std::vector<std::int64_t> chunk(ids.begin() + static_cast<std::int64_t>(pos),
                                        ids.begin() + std::min(pos + eval_batch, ids.size()));
        Tensor xs, ys;
        stack_batch(data, chunk, &xs, &ys);
        Tensor probs = model.forward(xs, Mode::infer);
        Tensor masks = predict_mask(probs);
        const std::int64_t frame_px = masks.numel() / static_cast<std::int64_t>(chunk.size());
        for (std::size_t k = 0; k < chunk.size(); ++k) {
            Tensor pred(Shape{frame_px});
            Tensor actual(Shape{frame_px});
            std::copy_n(masks.data.begin() + static_cast<std::int64_t>(k) * frame_px, frame_px, pred.data.begin());
            std::copy_n(ys.data.begin() + static_cast<std::int64_t>(k) * frame_px, frame_px, actual.data.begin());
            ConfusionMatrix frame_cm;
            frame_cm.accumulate(pred, actual);
            rep.cm.merge(frame_cm);
            frame_sum += mean_iou(frame_cm).mean_iou;
        }
    }
    rep.global = mean_iou(rep.cm);
    rep.frame_avg_mean_iou = frame_sum / static_cast<double>(rep.frames);
    return rep;
}

void train_steps(PolarNet& model, OptimizerState& opt, Checkpoint& meta, const FrameSet& data,
                 std::int64_t steps, std::vector<StepRecord>* log) {
    const TrainConfig& cfg = meta.train_config;
    const auto pool = data.indices(0);
    if (pool.empty()) throw std::invalid_argument("train: no training frames");

    std::vector<std::size_t> trainable;
    for (std::size_t i = 0; i < model.params().size(); ++i)
        if (model.params()[i].trainable) trainable.push_back(i);
    if (opt.accumulators.empty()) {
        for (std::size_t i : trainable) opt.accumulators.emplace_back(model.params()[i].value.shape);
    }
    if (opt.accumulators.size() != trainable.size())
        throw std::runtime_error("train: optimizer state does not match the model");

    double last_finite_loss = 0.0;
    std::int64_t last_finite_step = -1;
    for (std::int64_t k = 0; k < steps; ++k) {
        const std::int64_t step = meta.step + k;
        const double lr = lr_at_step(step, cfg);
        const auto ids = batch_indices(cfg.seed, step, cfg.batch_size, pool);
        Tensor xs, ys;
        stack_batch(data, ids, &xs, &ys);

        Rng step_rng = Rng(cfg.seed).split(kDropoutStreamBase + static_cast<std::uint64_t>(step));
        Tensor probs;
        try {
            probs = model.forward(xs, Mode::train, &step_rng);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("training diverged at step " + std::to_string(step) + " (last finite step " +
                                     std::to_string(last_finite_step) + ", loss " + std::to_string(last_finite_loss) +
                                     "): " + e.what());
        }
        auto loss = compute_loss(cfg.loss, probs, ys, meta.class_weights);
        if (!std::isfinite(loss.loss))
            throw std::runtime_error("training diverged at step " + std::to_string(step) + ": loss " +
                                     std::to_string(loss.loss) + " (last finite step " +
                                     std::to_string(last_finite_step) + ", loss " + std::to_string(last_finite_loss) +
                                     ")");
        last_finite_loss = loss.loss;
        last_finite_step = step;

        model.zero_grads();
        model.backward(loss.dprobs);
        for (std::size_t t = 0; t < trainable.size(); ++t) {
            auto& p = model.params()[trainable[t]];
            rmsprop_step<float>(p.value, p.grad, opt.accumulators[t], static_cast<float>(lr),
                                static_cast<float>(cfg.rmsprop_rho), static_cast<float>(cfg.rmsprop_eps));
        }
        if (cfg.loss == LossKind::smce_train) {
            for (int c = 0; c < 2; ++c) {
                double& s = opt.w_acc.data[static_cast<std::size_t>(c)];
                s = cfg.rmsprop_rho * s + (1.0 - cfg.rmsprop_rho) * loss.dw[c] * loss.dw[c];
                meta.class_weights.w[c] -= lr * loss.dw[c] / std::sqrt(s + cfg.rmsprop_eps);
                if (!std::isfinite(meta.class_weights.w[c]))
                    throw std::runtime_error("training diverged at step " + std::to_string(step) +
                                             ": class weight " + std::to_string(c) + " is non-finite");
            }
        }
        if (log) log->push_back({step, lr, loss.loss});
    }
    meta.step += steps;
}

void save_checkpoint(const std::string& dir, const PolarNet& model, const OptimizerState& opt,
                     const Checkpoint& meta) {
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = "polarseg-checkpoint";
    manifest["version"] = 1;
    manifest["step"] = meta.step;
    manifest["model_config"] = model_config_to_json(meta.model_config);
    manifest["train_config"] = train_config_to_json(meta.train_config);
    manifest["class_weights"] = {meta.class_weights.w[0], meta.class_weights.w[1]};

    json tensors = json::array();
    auto dump_tensor = [&](const std::string& name, const Tensor& t, bool trainable) {
        const std::string file = sanitize(name) + ".rten";
        rten_write((fs::path(dir) / file).string(), t);
        tensors.push_back(json{{"name", name},
                               {"file", file},
                               {"dtype", "f32"},
                               {"shape", t.shape},
                               {"trainable", trainable},
                               {"fnv1a64", hex64(fnv1a64_file((fs::path(dir) / file).string()))}});
    };
    for (const auto& p : model.params()) dump_tensor(p.name, p.value, p.trainable);
    std::size_t slot = 0;
    for (const auto& p : model.params()) {
        if (!p.trainable) continue;
        dump_tensor("opt." + p.name, opt.accumulators.at(slot++), false);
    }
    {
        const std::string file = "class_weights.rten";
        TensorD w(Shape{2});
        w.data = {meta.class_weights.w[0], meta.class_weights.w[1]};
        rten_write((fs::path(dir) / file).string(), w);
        tensors.push_back(json{{"name", "class_weights"},
                               {"file", file},
                               {"dtype", "f64"},
                               {"shape", w.shape},
                               {"trainable", true},
                               {"fnv1a64", hex64(fnv1a64_file((fs::path(dir) / file).string()))}});
        const std::string facc = "opt.class_weights.rten";
        rten_write((fs::path(dir) / facc).string(), opt.w_acc);
        tensors.push_back(json{{"name", "opt.class_weights"},
                               {"file", facc},
                               {"dtype", "f64"},
                               {"shape", opt.w_acc.shape},
                               {"trainable", false},
                               {"fnv1a64", hex64(fnv1a64_file((fs::path(dir) / facc).string()))}});
    }
    manifest["tensors"] = tensors;
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("save_checkpoint: cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& dir, std::optional<PolarNet>& model, OptimizerState& opt) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw std::runtime_error("load_checkpoint: cannot open manifest in " + dir);
    json manifest;
    in >> manifest;
    if (manifest.value("format", "") != "polarseg-checkpoint")
        throw std::runtime_error("load_checkpoint: " + dir + " is not a checkpoint directory");

    Checkpoint meta;
    meta.model_config = model_config_from_json(manifest.at("model_config"));
    meta.train_config = train_config_from_json(manifest.at("train_config"));
    meta.step = manifest.at("step");
    meta.class_weights.w[0] = manifest.at("class_weights")[0];
    meta.class_weights.w[1] = manifest.at("class_weights")[1];

    Rng dummy(0);
    model.emplace(meta.model_config, dummy);

    // Verify every listed tensor before touching the model.
    std::map<std::string, json> by_name;
    for (const auto& t : manifest.at("tensors")) {
        const std::string file = t.at("file");
        const std::string want = t.at("fnv1a64");
        const std::string got = hex64(fnv1a64_file((fs::path(dir) / file).string()));
        if (got != want)
            throw std::runtime_error("load_checkpoint: hash mismatch for " + file + " (expected " + want + ", got " +
                                     got + ")");
        by_name[t.at("name").get<std::string>()] = t;
    }

    auto read_f32 = [&](const std::string& name, const Shape& want_shape) {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw std::runtime_error("load_checkpoint: missing tensor " + name);
        Tensor t = rten_read_f32((fs::path(dir) / it->second.at("file").get<std::string>()).string());
        if (t.shape != want_shape)
            throw std::runtime_error("load_checkpoint: shape mismatch for " + name + ": " + shape_str(t.shape) +
                                     " vs " + shape_str(want_shape));
        return t;
    };

    for (auto& p : model->params()) p.value = read_f32(p.name, p.value.shape);
    opt.accumulators.clear();
    for (const auto& p : model->params()) {
        if (!p.trainable) continue;
        opt.accumulators.push_back(read_f32("opt." + p.name, p.value.shape));
    }
    {
        auto it = by_name.find("class_weights");
        if (it == by_name.end()) throw std::runtime_error("load_checkpoint: missing class_weights");
        RtenData d = rten_read((fs::path(dir) / it->second.at("file").get<std::string>()).string());
        meta.class_weights.w[0] = d.f64.at(0);
        meta.class_weights.w[1] = d.f64.at(1);
        auto it2 = by_name.find("opt.class_weights");
        if (it2 == by_name.end()) throw std::runtime_error("load_checkpoint: missing opt.class_weights");
        RtenData a = rten_read((fs::path(dir) / it2->second.at("file").get<std::string>()).string());
        opt.w_acc.data = a.f64;
    }
    return meta;
}

TrainResult train(const FrameSet& data, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::string& out_dir) {
    cfg.validate();
    model_cfg.validate();
    const std::int64_t want_ch = cfg.input == "RA" ? 1 : 64;
    if (model_cfg.input_channels != want_ch)
        throw std::invalid_argument("train: model input_channels=" + std::to_string(model_cfg.input_channels) +
                                    " does not match input kind " + cfg.input);
    if (!data.inputs.empty() && data.inputs[0].dim(2) != model_cfg.input_channels)
        throw std::invalid_argument("train: dataset channels do not match the model config");
    fs::create_directories(out_dir);

    Rng init_rng = Rng(cfg.seed).split(kInitStream);
    PolarNet model(model_cfg, init_rng);
    OptimizerState opt;
    for (const auto& p : model.params())
        if (p.trainable) opt.accumulators.emplace_back(p.value.shape);
    Checkpoint meta;
    meta.model_config = model_cfg;
    meta.train_config = cfg;

    std::ofstream log_out(fs::path(out_dir) / "train_log.jsonl", std::ios::trunc);
    if (!log_out) throw std::runtime_error("train: cannot write log in " + out_dir);

    TrainResult result;
    const bool have_test = !data.indices(1).empty();

    auto run_eval = [&](std::int64_t at_step) {
        if (!have_test) return;
        EvalReport rep = evaluate(model, data, 1);
        log_out << json{{"step", at_step}, {"eval_mean_iou", rep.global.mean_iou}, {"split", "test"}}.dump() << "\n";
        if (rep.global.mean_iou > result.best_eval_miou) {
            result.best_eval_miou = rep.global.mean_iou;
            result.best_eval_step = at_step;
            result.best_checkpoint_dir = (fs::path(out_dir) / "best").string();
            Checkpoint snap = meta;
            snap.step = at_step;
            save_checkpoint(result.best_checkpoint_dir, model, opt, snap);
        }
    };

    std::int64_t done = 0;
    while (done < cfg.total_steps) {
        const std::int64_t chunk = std::min<std::int64_t>(cfg.eval_every - (done % cfg.eval_every), cfg.total_steps - done);
        std::vector<StepRecord> records;
        train_steps(model, opt, meta, data, chunk, &records);
        for (const auto& r : records)
            log_out << json{{"step", r.step}, {"lr", r.lr}, {"loss", r.loss}}.dump() << "\n";
        result.steps.insert(result.steps.end(), records.begin(), records.end());
        done += chunk;
        if (done % cfg.eval_every == 0 || done == cfg.total_steps) run_eval(done);
    }
    if (cfg.total_steps == 0) run_eval(0);

    result.final_checkpoint_dir = (fs::path(out_dir) / "final").string();
    save_checkpoint(result.final_checkpoint_dir, model, opt, meta);
    result.class_weights = meta.class_weights;
    return result;
}

}  // namespace polarseg
