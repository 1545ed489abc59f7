// polarseg: radar open-space segmentation pipeline driver.
//
// Subcommands: synth, dsp, train, eval, infer, render, bench, gradcheck.
// Every subcommand accepts --config <json>; explicit flags override config
// values. eval/bench/gradcheck print machine-readable JSON on stdout.

#include <sys/resource.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "polarseg/gradcheck_suite.hpp"
#include "polarseg/image_io.hpp"
#include "polarseg/kernels/kernels.hpp"
#include "polarseg/model.hpp"
#include "polarseg/parallel.hpp"
#include "polarseg/radar.hpp"
#include "polarseg/resample.hpp"
#include "polarseg/rten.hpp"
#include "polarseg/scene.hpp"
#include "polarseg/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace polarseg;

namespace {

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    json j;
    in >> j;
    return j;
}

// Fills options the user left at their default from the config section.
class ConfigOverlay {
public:
    ConfigOverlay(CLI::App* app, json section) : app_(app), section_(std::move(section)) {}

    template <typename T>
    void apply(const std::string& flag, const std::string& key, T& var) const {
        if (section_.contains(key) && app_->count(flag) == 0) var = section_.at(key).get<T>();
    }

private:
    CLI::App* app_;
    json section_;
};

void write_resolved_config(const std::string& dir, const json& resolved) {
    std::ofstream out(fs::path(dir) / "resolved_config.json", std::ios::trunc);
    out << resolved.dump(2) << "\n";
}

RaMode ra_mode_from_string(const std::string& s) {
    if (s == "sum_log") return RaMode::sum_log;
    if (s == "max") return RaMode::max;
    throw std::runtime_error("unknown RA mode '" + s + "' (expected sum_log|max)");
}

ModelConfig model_config_for(const std::string& input_kind, double dropout) {
    ModelConfig cfg = input_kind == "RAD" ? ModelConfig::rad_default() : ModelConfig::ra_default();
    cfg.dropout_rate = dropout;
    return cfg;
}

Tensor load_input_tensor(const std::string& path) {
    Tensor t = rten_read_f32(path);
    if (t.rank() == 2) t.shape = {t.dim(0), t.dim(1), 1};
    if (t.rank() != 3) throw std::runtime_error("input tensor must be rank 2 or 3, got " + shape_str(t.shape));
    return standardize(t);
}

RadarCubeSCA read_sca(const std::string& path) {
    RtenData d = rten_read(path);
    if (d.dtype != RtenDtype::c64 || d.dims.size() != 3)
        throw std::runtime_error("dsp: expected a rank-3 c64 cube in " + path);
    RadarCubeSCA sca;
    sca.geom.n_samples = d.dims[0];
    sca.geom.n_chirps = d.dims[1];
    sca.geom.n_antennas = d.dims[2];
    sca.data.resize(d.c64.size());
    for (std::size_t i = 0; i < d.c64.size(); ++i) sca.data[i] = Complex(d.c64[i].real(), d.c64[i].imag());
    return sca;
}

int cmd_synth(const std::string& config_path, CLI::App* app, std::int64_t frames, std::uint64_t seed,
              std::string out_dir, double noise_sigma, bool empty, double train_frac, std::int64_t blocks,
              std::string outputs_csv, std::string ra_mode) {
    ConfigOverlay overlay(app, load_config_file(config_path).value("synth", json::object()));
    overlay.apply("--frames", "frames", frames);
    overlay.apply("--seed", "seed", seed);
    overlay.apply("--out", "out", out_dir);
    overlay.apply("--noise-sigma", "noise_sigma", noise_sigma);
    overlay.apply("--train-frac", "train_frac", train_frac);
    overlay.apply("--blocks", "blocks", blocks);
    overlay.apply("--outputs", "outputs", outputs_csv);
    overlay.apply("--ra-mode", "ra_mode", ra_mode);
    if (out_dir.empty()) throw std::runtime_error("synth: --out is required");

    DatasetParams p;
    p.n_frames = frames;
    p.base_seed = seed;
    p.scene.noise_sigma = noise_sigma;
    p.scene.empty = empty;
    p.ra_mode = ra_mode_from_string(ra_mode);
    p.train_fraction = train_frac;
    p.n_blocks = blocks;
    p.outputs = {false, false, false, false};
    std::stringstream ss(outputs_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "sca") p.outputs.sca = true;
        else if (tok == "ra") p.outputs.ra = true;
        else if (tok == "rad") p.outputs.rad = true;
        else if (tok == "mask") p.outputs.mask = true;
        else throw std::runtime_error("synth: unknown output kind '" + tok + "'");
    }

    const std::string manifest = generate_dataset(out_dir, p);
    write_resolved_config(out_dir, json{{"synth",
                                         {{"frames", frames},
                                          {"seed", seed},
                                          {"out", out_dir},
                                          {"noise_sigma", noise_sigma},
                                          {"empty", empty},
                                          {"train_frac", train_frac},
                                          {"blocks", blocks},
                                          {"outputs", outputs_csv},
                                          {"ra_mode", ra_mode}}}});
    std::cerr << "wrote " << manifest << "\n";
    return 0;
}

int cmd_dsp(const std::string& config_path, CLI::App* app, std::string in_path, std::string mode,
            std::string out_path, std::string rad_out, std::string cfar_out, std::int64_t cfar_guard,
            std::int64_t cfar_train, double cfar_alpha, double cfar_pfa, double crop_min, double crop_max) {
    ConfigOverlay overlay(app, load_config_file(config_path).value("dsp", json::object()));
    overlay.apply("--mode", "mode", mode);
    if (in_path.empty() || (out_path.empty() && rad_out.empty() && cfar_out.empty()))
        throw std::runtime_error("dsp: need --in and at least one output");

    const RadarCubeSCA sca = read_sca(in_path);
    const RadarCubeRDA rda = sca_to_rda(sca);
    RangeAzimuthMap ra = rda_to_ra(rda, ra_mode_from_string(mode));
    if (crop_min > -900.0 || crop_max < 900.0) ra = crop_fov(ra, crop_min, crop_max);

    if (!out_path.empty()) {
        Tensor f(Shape{ra.rows, ra.cols});
        for (std::size_t i = 0; i < ra.values.size(); ++i) f.data[i] = static_cast<float>(ra.values[i]);
        rten_write(out_path, f);
    }
    if (!rad_out.empty()) rten_write(rad_out, rda_to_rad_tensor(rda));
    if (!cfar_out.empty()) {
        // CFAR operates on linear power; shift before exponentiating so the
        // scale-invariant threshold comparison cannot overflow.
        RangeAzimuthMap linear = ra;
        const double peak = *std::max_element(linear.values.begin(), linear.values.end());
        for (auto& v : linear.values) v = std::exp(v - peak);
        CfarSpec spec;
        spec.guard_rows = spec.guard_cols = cfar_guard;
        spec.train_rows = spec.train_cols = cfar_train;
        if (cfar_pfa > 0.0) {
            const std::int64_t side = 2 * (cfar_guard + cfar_train) + 1;
            const std::int64_t guard_side = 2 * cfar_guard + 1;
            spec.scale_alpha = cfar_alpha_for_pfa(cfar_pfa, side * side - guard_side * guard_side);
        } else {
            spec.scale_alpha = cfar_alpha;
        }
        const auto det = ca_cfar_2d(linear, spec);
        std::vector<std::uint8_t> img(det.size());
        for (std::size_t i = 0; i < det.size(); ++i) img[i] = det[i] ? 255 : 0;
        write_pgm(cfar_out, img, ra.cols, ra.rows);
    }
    return 0;
}

int cmd_train(const std::string& config_path, CLI::App* app, std::string data_dir, std::string out_dir,
              TrainConfig cfg, std::string loss_name, double dropout) {
    const json file_cfg = load_config_file(config_path);
    ConfigOverlay overlay(app, file_cfg.value("train", json::object()));
    overlay.apply("--data", "data", data_dir);
    overlay.apply("--out", "out", out_dir);
    overlay.apply("--steps", "steps", cfg.total_steps);
    overlay.apply("--batch", "batch", cfg.batch_size);
    overlay.apply("--lr", "lr", cfg.lr0);
    overlay.apply("--lr-decay", "lr_decay", cfg.decay_factor);
    overlay.apply("--lr-decay-every", "lr_decay_every", cfg.decay_every_steps);
    overlay.apply("--loss", "loss", loss_name);
    overlay.apply("--input", "input", cfg.input);
    overlay.apply("--seed", "seed", cfg.seed);
    overlay.apply("--eval-every", "eval_every", cfg.eval_every);
    overlay.apply("--dropout", "dropout", dropout);
    if (data_dir.empty() || out_dir.empty()) throw std::runtime_error("train: --data and --out are required");
    cfg.loss = loss_kind_from_string(loss_name);

    ModelConfig model_cfg = model_config_for(cfg.input, dropout);
    if (file_cfg.contains("model")) {
        const auto& m = file_cfg.at("model");
        if (m.contains("encoder_channels")) model_cfg.encoder_channels = m.at("encoder_channels").get<std::vector<std::int64_t>>();
        if (m.contains("col_kernel")) model_cfg.col_kernel = m.at("col_kernel");
        if (m.contains("row_kernel")) model_cfg.row_kernel = m.at("row_kernel");
        if (m.contains("head")) model_cfg.head = m.at("head") == "softmax_2ch" ? HeadKind::softmax_2ch : HeadKind::sigmoid_1ch;
    }

    const FrameSet data = FrameSet::load(data_dir, cfg.input);
    fs::create_directories(out_dir);
    write_resolved_config(out_dir, json{{"train",
                                         {{"data", data_dir},
                                          {"out", out_dir},
                                          {"steps", cfg.total_steps},
                                          {"batch", cfg.batch_size},
                                          {"lr", cfg.lr0},
                                          {"lr_decay", cfg.decay_factor},
                                          {"lr_decay_every", cfg.decay_every_steps},
                                          {"loss", loss_name},
                                          {"input", cfg.input},
                                          {"seed", cfg.seed},
                                          {"eval_every", cfg.eval_every},
                                          {"dropout", dropout}}}});
    TrainResult result = train(data, model_cfg, cfg, out_dir);
    json summary{{"steps", cfg.total_steps},
                 {"final_checkpoint", result.final_checkpoint_dir},
                 {"final_loss", result.steps.empty() ? 0.0 : result.steps.back().loss},
                 {"class_weights", {result.class_weights.w[0], result.class_weights.w[1]}}};
    if (result.best_eval_step >= 0) {
        summary["best_eval_mean_iou"] = result.best_eval_miou;
        summary["best_eval_step"] = result.best_eval_step;
        summary["best_checkpoint"] = result.best_checkpoint_dir;
    }
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, CLI::App* app, std::string data_dir, std::string ckpt_dir,
             std::string split) {
    ConfigOverlay overlay(app, load_config_file(config_path).value("eval", json::object()));
    overlay.apply("--data", "data", data_dir);
    overlay.apply("--ckpt", "ckpt", ckpt_dir);
    overlay.apply("--split", "split", split);
    if (data_dir.empty() || ckpt_dir.empty()) throw std::runtime_error("eval: --data and --ckpt are required");

    std::optional<PolarNet> model;
    OptimizerState opt;
    Checkpoint meta = load_checkpoint(ckpt_dir, model, opt);
    const FrameSet data = FrameSet::load(data_dir, meta.train_config.input);
    EvalReport rep = evaluate(*model, data, split == "train" ? 0 : 1);
    std::cout << rep.to_json(split, loss_kind_to_string(meta.train_config.loss)) << "\n";
    return 0;
}

int cmd_infer(const std::string& config_path, CLI::App* app, std::string in_path, std::string ckpt_dir,
              std::string out_path, std::string cartesian_path, std::string prob_out) {
    ConfigOverlay overlay(app, load_config_file(config_path).value("infer", json::object()));
    overlay.apply("--ckpt", "ckpt", ckpt_dir);
    if (in_path.empty() || ckpt_dir.empty() || out_path.empty())
        throw std::runtime_error("infer: --in, --ckpt and --out are required");

    std::optional<PolarNet> model;
    OptimizerState opt;
    load_checkpoint(ckpt_dir, model, opt);

    Tensor x = load_input_tensor(in_path);
    Tensor batched(Shape{1, x.dim(0), x.dim(1), x.dim(2)}, x.data);
    Tensor probs = model->forward(batched, Mode::infer);
    Tensor frame(Shape{probs.dim(1), probs.dim(2)});
    std::copy(probs.data.begin(), probs.data.end(), frame.data.begin());
    Tensor mask = predict_mask(frame);
    write_mask_pgm(out_path, mask);
    if (!prob_out.empty()) rten_write(prob_out, frame);

    if (!cartesian_path.empty()) {
        PolarGrid pg;
        pg.rows = mask.dim(0);
        pg.cols = mask.dim(1);
        CartesianGrid cg;
        std::vector<double> polar(mask.data.begin(), mask.data.end());
        auto cart = polar_to_cartesian(polar, pg, cg, Interp::nearest, -1.0);
        std::vector<std::uint8_t> img(cart.size());
        for (std::size_t i = 0; i < cart.size(); ++i)
            img[i] = cart[i] < 0.0 ? 128 : (cart[i] >= 0.5 ? 255 : 0);
        write_pgm(cartesian_path, img, cg.cols, cg.rows);
    }
    return 0;
}

int cmd_render(const std::string& config_path, CLI::App* app, std::string mask_path, std::string out_path) {
    ConfigOverlay overlay(app, load_config_file(config_path).value("render", json::object()));
    overlay.apply("--mask", "mask", mask_path);
    overlay.apply("--out", "out", out_path);
    if (mask_path.empty() || out_path.empty()) throw std::runtime_error("render: --mask and --out are required");

    Tensor mask = read_mask_pgm(mask_path);
    PolarGrid pg;
    pg.rows = mask.dim(0);
    pg.cols = mask.dim(1);
    CartesianGrid cg;
    std::vector<double> polar(mask.data.begin(), mask.data.end());
    auto cart = polar_to_cartesian(polar, pg, cg, Interp::nearest, -1.0);

    // Green = open, red = occupied, gray = outside the wedge; far range on top.
    std::vector<std::uint8_t> rgb(cart.size() * 3);
    for (std::int64_t ix = 0; ix < cg.rows; ++ix) {
        for (std::int64_t iy = 0; iy < cg.cols; ++iy) {
            const double v = cart[static_cast<std::size_t>(ix * cg.cols + iy)];
            const std::int64_t row = cg.rows - 1 - ix;
            std::uint8_t* px = rgb.data() + (row * cg.cols + iy) * 3;
            if (v < 0.0) {
                px[0] = px[1] = px[2] = 90;
            } else if (v >= 0.5) {
                px[0] = 40;
                px[1] = 180;
                px[2] = 60;
            } else {
                px[0] = 200;
                px[1] = 40;
                px[2] = 40;
            }
        }
    }
    write_ppm(out_path, rgb, cg.cols, cg.rows);
    return 0;
}

int cmd_bench(const std::string& config_path, CLI::App* app, std::string ckpt_dir, std::string input_kind,
              std::int64_t iters, std::int64_t warmup, int threads) {
    ConfigOverlay overlay(app, load_config_file(config_path).value("bench", json::object()));
    overlay.apply("--iters", "iters", iters);
    overlay.apply("--warmup", "warmup", warmup);
    overlay.apply("--threads", "threads", threads);

    std::optional<PolarNet> model;
    if (!ckpt_dir.empty()) {
        OptimizerState opt;
        Checkpoint meta = load_checkpoint(ckpt_dir, model, opt);
        input_kind = meta.train_config.input;
    } else {
        Rng rng(1);
        model.emplace(model_config_for(input_kind, 0.5), rng);
    }
    const ModelConfig& cfg = model->config();

    Tensor x(Shape{1, cfg.input_hw, cfg.input_hw, cfg.input_channels});
    Rng rng(2);
    for (auto& v : x.data) v = static_cast<float>(rng.uniform(-1, 1));

    auto bench_loop = [&](std::vector<double>* latencies) {
        for (std::int64_t i = 0; i < warmup; ++i) model->forward(x, Mode::infer);
        for (std::int64_t i = 0; i < iters; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            model->forward(x, Mode::infer);
            const auto t1 = std::chrono::steady_clock::now();
            if (latencies) latencies->push_back(std::chrono::duration<double>(t1 - t0).count());
        }
    };

    std::vector<double> latencies;
    latencies.reserve(static_cast<std::size_t>(iters));
    const auto start = std::chrono::steady_clock::now();
    double elapsed = 0.0;
    if (threads <= 1) {
        bench_loop(&latencies);
        elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    } else {
        // Aggregate throughput mode: independent forward loops.
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back([&] { bench_loop(nullptr); });
        for (auto& t : pool) t.join();
        elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    json rep;
    rep["input"] = input_kind;
    rep["iters"] = iters;
    rep["warmup"] = warmup;
    rep["threads"] = threads;
    rep["param_count"] = model->param_count();
    rep["kernel_backend"] = kernels::active_backend_name();
    const double total_iters = static_cast<double>(iters) * std::max(1, threads);
    // Warmup runs inside the timed window only for threads>1 aggregate mode;
    // single-thread fps uses per-iteration latencies exclusive of warmup.
    if (threads <= 1) {
        double sum = 0.0;
        for (double v : latencies) sum += v;
        rep["fps"] = static_cast<double>(iters) / sum;
        std::sort(latencies.begin(), latencies.end());
        auto pct = [&](double q) {
            const std::size_t i = std::min(latencies.size() - 1, static_cast<std::size_t>(q * static_cast<double>(latencies.size())));
            return latencies[i] * 1e3;
        };
        rep["latency_ms"] = {{"p50", pct(0.50)}, {"p90", pct(0.90)}, {"p99", pct(0.99)}};
    } else {
        rep["fps"] = total_iters / elapsed;
    }
    struct rusage ru;
    getrusage(RUSAGE_SELF, &ru);
    rep["peak_rss_mb"] = static_cast<double>(ru.ru_maxrss) / 1024.0;
    std::cout << rep.dump() << "\n";
    return 0;
}

int cmd_gradcheck(const std::string& config_path, CLI::App* app, int seeds) {
    ConfigOverlay overlay(app, load_config_file(config_path).value("gradcheck", json::object()));
    overlay.apply("--seeds", "seeds", seeds);
    const auto results = gradcheck_suite(seeds);
    json rep;
    bool pass = true;
    for (const auto& [name, err] : results) {
        const double tol = name == "end_to_end" ? kEndToEndGradTol : kPerOpGradTol;
        rep["max_rel_err"][name] = err;
        rep["tolerance"][name] = tol;
        pass = pass && err < tol;
    }
    rep["seeds"] = seeds;
    rep["pass"] = pass;
    std::cout << rep.dump() << "\n";
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"polar-domain radar open-space segmentation pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; explicit flags override")->expected(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::int64_t frames = 10, blocks = 10;
    std::uint64_t seed = 1;
    std::string out_dir, outputs_csv = "sca,ra,rad,mask", ra_mode = "sum_log";
    double noise_sigma = 70.0, train_frac = 0.8;
    bool empty = false;
    synth->add_option("--frames", frames, "number of frames");
    synth->add_option("--seed", seed, "base seed");
    synth->add_option("--out", out_dir, "output directory");
    synth->add_option("--noise-sigma", noise_sigma, "complex noise std");
    synth->add_flag("--empty", empty, "generate empty scenes");
    synth->add_option("--train-frac", train_frac, "train fraction (block split)");
    synth->add_option("--blocks", blocks, "number of sequence blocks");
    synth->add_option("--outputs", outputs_csv, "comma list of sca,ra,rad,mask");
    synth->add_option("--ra-mode", ra_mode, "sum_log|max");

    // dsp
    auto* dsp = app.add_subcommand("dsp", "SCA cube -> RA/RAD maps (+ CFAR)");
    std::string dsp_in, dsp_mode = "sum_log", dsp_out, rad_out, cfar_out;
    std::int64_t cfar_guard = 2, cfar_train = 4;
    double cfar_alpha = 4.0, cfar_pfa = -1.0, crop_min = -1000.0, crop_max = 1000.0;
    dsp->add_option("--in", dsp_in, "input SCA .rten (c64)");
    dsp->add_option("--mode", dsp_mode, "sum_log|max");
    dsp->add_option("--out", dsp_out, "output RA .rten (f32)");
    dsp->add_option("--rad-out", rad_out, "output RAD .rten (f32)");
    dsp->add_option("--cfar-out", cfar_out, "CA-CFAR detection .pgm");
    dsp->add_option("--cfar-guard", cfar_guard, "guard cells per axis");
    dsp->add_option("--cfar-train", cfar_train, "training cells per axis");
    dsp->add_option("--cfar-alpha", cfar_alpha, "threshold multiplier");
    dsp->add_option("--cfar-pfa", cfar_pfa, "derive alpha from this PFA");
    dsp->add_option("--crop-min-deg", crop_min, "crop FOV lower angle");
    dsp->add_option("--crop-max-deg", crop_max, "crop FOV upper angle");

    // train
    auto* tr = app.add_subcommand("train", "train the segmentation model");
    std::string data_dir, train_out, loss_name = "smce_train";
    TrainConfig tcfg;
    double dropout = 0.5;
    tr->add_option("--data", data_dir, "dataset directory (manifest.json)");
    tr->add_option("--out", train_out, "output directory");
    tr->add_option("--steps", tcfg.total_steps, "training steps");
    tr->add_option("--batch", tcfg.batch_size, "batch size");
    tr->add_option("--lr", tcfg.lr0, "initial learning rate");
    tr->add_option("--lr-decay", tcfg.decay_factor, "decay factor");
    tr->add_option("--lr-decay-every", tcfg.decay_every_steps, "decay interval (steps)");
    tr->add_option("--loss", loss_name, "smce_train|smce|lovasz");
    tr->add_option("--input", tcfg.input, "RA|RAD");
    tr->add_option("--seed", tcfg.seed, "training seed");
    tr->add_option("--eval-every", tcfg.eval_every, "held-out eval cadence");
    tr->add_option("--dropout", dropout, "dropout rate");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint (JSON to stdout)");
    std::string eval_data, eval_ckpt, eval_split = "test";
    ev->add_option("--data", eval_data, "dataset directory");
    ev->add_option("--ckpt", eval_ckpt, "checkpoint directory");
    ev->add_option("--split", eval_split, "test|train");

    // infer
    auto* inf = app.add_subcommand("infer", "run one frame through a checkpoint");
    std::string infer_in, infer_ckpt, infer_out, infer_cart, infer_prob;
    inf->add_option("--in", infer_in, "input RA/RAD .rten");
    inf->add_option("--ckpt", infer_ckpt, "checkpoint directory");
    inf->add_option("--out", infer_out, "polar mask .pgm");
    inf->add_option("--cartesian", infer_cart, "Cartesian mask .pgm");
    inf->add_option("--prob-out", infer_prob, "probabilities .rten");

    // render
    auto* ren = app.add_subcommand("render", "render a polar mask as a Cartesian PPM");
    std::string render_mask, render_out;
    ren->add_option("--mask", render_mask, "polar mask .pgm");
    ren->add_option("--out", render_out, "output .ppm");

    // bench
    auto* be = app.add_subcommand("bench", "forward-pass throughput report (JSON)");
    std::string bench_ckpt, bench_input = "RA";
    std::int64_t bench_iters = 50, bench_warmup = 5;
    int bench_threads = 1;
    be->add_option("--ckpt", bench_ckpt, "checkpoint directory (else fresh model)");
    be->add_option("--input", bench_input, "RA|RAD when no checkpoint given");
    be->add_option("--iters", bench_iters, "timed iterations");
    be->add_option("--warmup", bench_warmup, "warmup iterations (untimed)");
    be->add_option("--threads", bench_threads, "independent forward loops");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite (JSON)");
    int gc_seeds = 10;
    gc->add_option("--seeds", gc_seeds, "random seeds per op");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed())
            return cmd_synth(config_path, synth, frames, seed, out_dir, noise_sigma, empty, train_frac, blocks,
                             outputs_csv, ra_mode);
        if (dsp->parsed())
            return cmd_dsp(config_path, dsp, dsp_in, dsp_mode, dsp_out, rad_out, cfar_out, cfar_guard, cfar_train,
                           cfar_alpha, cfar_pfa, crop_min, crop_max);
        if (tr->parsed()) return cmd_train(config_path, tr, data_dir, train_out, tcfg, loss_name, dropout);
        if (ev->parsed()) return cmd_eval(config_path, ev, eval_data, eval_ckpt, eval_split);
        if (inf->parsed()) return cmd_infer(config_path, inf, infer_in, infer_ckpt, infer_out, infer_cart, infer_prob);
        if (ren->parsed()) return cmd_render(config_path, ren, render_mask, render_out);
        if (be->parsed()) return cmd_bench(config_path, be, bench_ckpt, bench_input, bench_iters, bench_warmup,
                                           bench_threads);
        if (gc->parsed()) return cmd_gradcheck(config_path, gc, gc_seeds);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
