#include "polarseg/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "polarseg/conv.hpp"
#include "polarseg/gradcheck.hpp"
#include "polarseg/losses.hpp"
#include "polarseg/model.hpp"
#include "polarseg/nn_ops.hpp"
#include "polarseg/rng.hpp"

namespace polarseg {

namespace {

TensorD rand_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    TensorD t(s);
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

std::vector<double> concat_grads(std::initializer_list<const TensorD*> ts) {
    std::vector<double> out;
    for (const auto* t : ts) out.insert(out.end(), t->data.begin(), t->data.end());
    return out;
}

double check_conv(std::uint64_t seed) {
    Rng rng(seed);
    TensorD x = rand_tensor({8, 8, 2}, rng);
    TensorD w = rand_tensor({3, 3, 2, 4}, rng);
    TensorD b = rand_tensor({4}, rng);
    ConvSpec spec{3, 3, 2, 1, 2, 4, Padding::same};
    TensorD r = rand_tensor(conv2d(x, w, b, spec).shape, rng);
    auto grads = conv2d_backward(x, w, r, spec);

    std::vector<double> flat = concat_grads({&x, &w, &b});
    auto f = [&](const std::vector<double>& v) {
        TensorD xx = x, ww = w, bb = b;
        std::copy_n(v.begin(), xx.numel(), xx.data.begin());
        std::copy_n(v.begin() + xx.numel(), ww.numel(), ww.data.begin());
        std::copy_n(v.begin() + xx.numel() + ww.numel(), bb.numel(), bb.data.begin());
        return dot(conv2d(xx, ww, bb, spec), r);
    };
    return finite_diff_gradcheck(f, flat, concat_grads({&grads.dx, &grads.dw, &grads.db}), 1e-6).max_rel_err;
}

double check_tconv(std::uint64_t seed) {
    Rng rng(seed);
    TensorD x = rand_tensor({4, 4, 3}, rng);
    TensorD w = rand_tensor({1, 5, 2, 3}, rng);
    TensorD b = rand_tensor({2}, rng);
    ConvSpec spec{1, 5, 1, 2, 3, 2, Padding::same};
    TensorD r = rand_tensor(transposed_conv2d(x, w, b, spec).shape, rng);
    auto grads = transposed_conv2d_backward(x, w, r, spec);

    std::vector<double> flat = concat_grads({&x, &w, &b});
    auto f = [&](const std::vector<double>& v) {
        TensorD xx = x, ww = w, bb = b;
        std::copy_n(v.begin(), xx.numel(), xx.data.begin());
        std::copy_n(v.begin() + xx.numel(), ww.numel(), ww.data.begin());
        std::copy_n(v.begin() + xx.numel() + ww.numel(), bb.numel(), bb.data.begin());
        return dot(transposed_conv2d(xx, ww, bb, spec), r);
    };
    return finite_diff_gradcheck(f, flat, concat_grads({&grads.dx, &grads.dw, &grads.db}), 1e-6).max_rel_err;
}

double check_batchnorm(std::uint64_t seed) {
    Rng rng(seed);
    TensorD x = rand_tensor({2, 4, 4, 3}, rng);
    TensorD gamma = rand_tensor({3}, rng, 0.5, 1.5);
    TensorD beta = rand_tensor({3}, rng);
    TensorD r = rand_tensor(x.shape, rng);

    BatchNormCache<double> cache;
    TensorD rm(Shape{3}, 0.0), rv(Shape{3}, 1.0);
    batchnorm_forward<double>(x, gamma, beta, rm, rv, 1e-5, 0.9, Mode::train, &cache);
    auto grads = batchnorm_backward(cache, r);

    std::vector<double> flat = concat_grads({&x, &gamma, &beta});
    auto f = [&](const std::vector<double>& v) {
        TensorD xx = x, gg = gamma, bb = beta;
        std::copy_n(v.begin(), xx.numel(), xx.data.begin());
        std::copy_n(v.begin() + xx.numel(), gg.numel(), gg.data.begin());
        std::copy_n(v.begin() + xx.numel() + gg.numel(), bb.numel(), bb.data.begin());
        TensorD m(Shape{3}, 0.0), vv(Shape{3}, 1.0);
        return dot(batchnorm_forward<double>(xx, gg, bb, m, vv, 1e-5, 0.9, Mode::train, nullptr), r);
    };
    return finite_diff_gradcheck(f, flat, concat_grads({&grads.dx, &grads.dgamma, &grads.dbeta}), 1e-6).max_rel_err;
}

double check_relu(std::uint64_t seed) {
    Rng rng(seed);
    TensorD x = rand_tensor({6, 5, 2}, rng);
    for (auto& v : x.data)
        if (std::abs(v) < 1e-3) v = 0.2;  // stay off the kink
    TensorD r = rand_tensor(x.shape, rng);
    auto y = relu(x);
    auto g = relu_backward(y, r);
    auto f = [&](const std::vector<double>& v) {
        TensorD xx = x;
        xx.data = v;
        return dot(relu(xx), r);
    };
    return finite_diff_gradcheck(f, x.data, g.data, 1e-6).max_rel_err;
}

double check_sigmoid(std::uint64_t seed) {
    Rng rng(seed);
    TensorD x = rand_tensor({6, 5, 2}, rng, -3.0, 3.0);
    TensorD r = rand_tensor(x.shape, rng);
    auto y = sigmoid(x);
    auto g = sigmoid_backward(y, r);
    auto f = [&](const std::vector<double>& v) {
        TensorD xx = x;
        xx.data = v;
        return dot(sigmoid(xx), r);
    };
    return finite_diff_gradcheck(f, x.data, g.data, 1e-6).max_rel_err;
}

double check_dropout(std::uint64_t seed) {
    Rng rng(seed);
    TensorD x = rand_tensor({8, 8, 1}, rng);
    TensorD r = rand_tensor(x.shape, rng);
    // Fixed mask seed: the op is linear in x given the mask.
    auto apply = [&](const TensorD& in) {
        Rng mask_rng(seed + 17);
        return dropout_forward<double>(in, 0.4, Mode::train, mask_rng, nullptr);
    };
    TensorD mask;
    {
        Rng mask_rng(seed + 17);
        dropout_forward<double>(x, 0.4, Mode::train, mask_rng, &mask);
    }
    auto g = dropout_backward(mask, r);
    auto f = [&](const std::vector<double>& v) {
        TensorD xx = x;
        xx.data = v;
        return dot(apply(xx), r);
    };
    return finite_diff_gradcheck(f, x.data, g.data, 1e-6).max_rel_err;
}

double check_bilinear(std::uint64_t seed) {
    Rng rng(seed);
    TensorD x = rand_tensor({4, 5, 2}, rng);
    auto up = bilinear_upsample(x, 9, 11);
    TensorD r = rand_tensor(up.shape, rng);
    auto g = bilinear_upsample_backward(r, 4, 5);
    auto f = [&](const std::vector<double>& v) {
        TensorD xx = x;
        xx.data = v;
        return dot(bilinear_upsample(xx, 9, 11), r);
    };
    return finite_diff_gradcheck(f, x.data, g.data, 1e-6).max_rel_err;
}

double check_concat(std::uint64_t seed) {
    Rng rng(seed);
    TensorD a = rand_tensor({3, 4, 2}, rng);
    TensorD b = rand_tensor({3, 4, 3}, rng);
    TensorD r = rand_tensor({3, 4, 5}, rng);
    TensorD da, db;
    split_channels(r, 2, 3, &da, &db);
    std::vector<double> flat = concat_grads({&a, &b});
    auto f = [&](const std::vector<double>& v) {
        TensorD aa = a, bb = b;
        std::copy_n(v.begin(), aa.numel(), aa.data.begin());
        std::copy_n(v.begin() + aa.numel(), bb.numel(), bb.data.begin());
        return dot(concat_channels(aa, bb), r);
    };
    return finite_diff_gradcheck(f, flat, concat_grads({&da, &db}), 1e-6).max_rel_err;
}

double check_losses(std::uint64_t seed) {
    Rng rng(seed);
    TensorD probs = rand_tensor({2, 3, 4}, rng, 0.05, 0.95);
    TensorD labels(probs.shape);
    for (auto& v : labels.data) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
    ClassWeights w;
    w.w[0] = 0.25;
    w.w[1] = -0.3;
    double worst = 0.0;

    {
        auto base = smce_train_loss(probs, labels, w);
        auto f = [&](const std::vector<double>& v) {
            TensorD pp = probs;
            pp.data = v;
            return smce_train_loss(pp, labels, w).loss;
        };
        worst = std::max(worst, finite_diff_gradcheck(f, probs.data, base.dprobs.data, 1e-6).max_rel_err);
        auto fw = [&](const std::vector<double>& v) {
            ClassWeights ww;
            ww.w[0] = v[0];
            ww.w[1] = v[1];
            return smce_train_loss(probs, labels, ww).loss;
        };
        worst = std::max(worst, finite_diff_gradcheck(fw, {w.w[0], w.w[1]}, {base.dw[0], base.dw[1]}, 1e-6).max_rel_err);
    }
    {
        auto base = lovasz_loss(probs, labels);
        auto f = [&](const std::vector<double>& v) {
            TensorD pp = probs;
            pp.data = v;
            return lovasz_loss(pp, labels).loss;
        };
        worst = std::max(worst, finite_diff_gradcheck(f, probs.data, base.dprobs.data, 1e-7).max_rel_err);
    }
    return worst;
}

double check_end_to_end(std::uint64_t seed) {
    Rng rng(3000 + seed);
    PolarNetT<double> model(ModelConfig::reduced_gradcheck(), rng);
    Rng in_rng(4000 + seed);
    TensorD x(Shape{2, 16, 16, 1});
    for (auto& v : x.data) v = in_rng.uniform(-1.5, 1.5);
    TensorD labels(Shape{2, 16, 16});
    for (auto& v : labels.data) v = in_rng.uniform() < 0.6 ? 1.0 : 0.0;
    ClassWeights w;
    w.w[0] = 0.2;
    w.w[1] = -0.3;

    auto probs = model.forward(x, Mode::train);
    auto loss = smce_train_loss(probs, labels, w);
    model.zero_grads();
    TensorD dx = model.backward(loss.dprobs);

    double worst = 0.0;
    {
        std::vector<std::size_t> coords;
        for (int k = 0; k < 24; ++k) coords.push_back(in_rng.uniform_index(x.data.size()));
        auto f = [&](const std::vector<double>& v) {
            TensorD xx = x;
            xx.data = v;
            return smce_train_loss(model.forward(xx, Mode::train), labels, w).loss;
        };
        worst = std::max(worst, finite_diff_gradcheck(f, x.data, dx.data, 1e-5, &coords).max_rel_err);
    }
    for (auto& p : model.params()) {
        if (!p.trainable) continue;
        std::vector<std::size_t> coords;
        const std::size_t n_coords = std::min<std::size_t>(3, p.value.data.size());
        for (std::size_t k = 0; k < n_coords; ++k) coords.push_back(in_rng.uniform_index(p.value.data.size()));
        auto f = [&](const std::vector<double>& v) {
            auto saved = p.value.data;
            p.value.data = v;
            const double l = smce_train_loss(model.forward(x, Mode::train), labels, w).loss;
            p.value.data = saved;
            return l;
        };
        worst = std::max(worst, finite_diff_gradcheck(f, p.value.data, p.grad.data, 1e-5, &coords).max_rel_err);
    }
    return worst;
}

}  // namespace

std::map<std::string, double> gradcheck_suite(int seeds) {
    std::map<std::string, double> out;
    auto run = [&](const std::string& name, double (*fn)(std::uint64_t)) {
        double worst = 0.0;
        for (int s = 0; s < seeds; ++s) worst = std::max(worst, fn(static_cast<std::uint64_t>(s) * 131 + 7));
        out[name] = worst;
    };
    run("conv2d", &check_conv);
    run("transposed_conv2d", &check_tconv);
    run("batchnorm", &check_batchnorm);
    run("relu", &check_relu);
    run("sigmoid", &check_sigmoid);
    run("dropout", &check_dropout);
    run("bilinear_upsample", &check_bilinear);
    run("concat_channels", &check_concat);
    run("losses", &check_losses);
    run("end_to_end", &check_end_to_end);
    return out;
}

}  // namespace polarseg
