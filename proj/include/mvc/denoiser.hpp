#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mvc/autodiff.hpp"
#include "mvc/caption.hpp"
#include "mvc/params.hpp"
#include "mvc/schedule.hpp"
#include "mvc/tensor.hpp"

namespace mvc {

enum class ConditioningMode { cross_attention, pooled_additive };

// levels counts stride-2 downsamplings; 0 keeps the bottleneck at full
// resolution (used by the smallest test configs, where the latent is a
// single spatial cell).
struct DenoiserConfig {
    int latent_channels = 4;
    int base_width = 32;
    int levels = 2;
    int time_embed_dim = 32;
    int text_m = 16;
    int text_d = 32;
    ConditioningMode conditioning_mode = ConditioningMode::cross_attention;
};

struct Denoiser {
    DenoiserConfig config;
    nn::ParamStore params;
};

// Canonical registration order; parameter names and shapes depend on the
// config only. The final "head" conv stays zero-initialized so the first
// prediction is exactly zero.
nn::ParamStore register_denoiser_params(const DenoiserConfig& cfg);

Denoiser make_denoiser(const DenoiserConfig& cfg, std::uint64_t seed);

// Sinusoidal features: half = dim/2, arg_i = t * exp(-ln(10000) * i / half),
// output = [sin(arg_0..), cos(arg_0..)]. dim must be even.
std::vector<double> time_features(int t, int dim);

LatentTensor predict_noise(const Denoiser& model, const LatentTensor& z_t, int t,
                           const EmbeddingMatrix* e_T, const LatentTensor& e_I);

// Exact reverse-mode gradients of the single-sample noise-prediction loss
// mean((eps - eps_hat)^2), with z_t derived from (z0, t, eps) by the forward
// process. Gradient order matches the parameter registry.
std::vector<Tensor> denoiser_backward(const Denoiser& model, const LatentTensor& z0, int t,
                                      const LatentTensor& eps, const EmbeddingMatrix* e_T,
                                      const LatentTensor& e_I, const NoiseSchedule& schedule,
                                      double* loss_out = nullptr);

void save_denoiser(const std::string& path, const Denoiser& model);
Denoiser load_denoiser(const std::string& path);

nlohmann::json denoiser_config_json(const DenoiserConfig& cfg);
DenoiserConfig denoiser_config_from_json(const nlohmann::json& j);

namespace detail {

template <typename T>
TensorT<T> embedding_tensor(const EmbeddingMatrix& e) {
    TensorT<T> out({e.rows, e.cols});
    for (std::size_t i = 0; i < e.v.size(); ++i) out.v[i] = static_cast<T>(e.v[i]);
    return out;
}

template <typename T>
struct DenoiserGraph {
    ad::VarT<T> out;
    std::vector<std::pair<std::string, ad::VarT<T>>> taps;  // layer checkpoints, in order
};

// Builds the full forward graph on the given tape. `leafs` is aligned with
// the registry; e_T == nullptr selects the null-text branch (all zeros).
template <typename T>
DenoiserGraph<T> build_denoiser_graph(ad::TapeT<T>& tape, const DenoiserConfig& cfg,
                                      const nn::ParamStore& registry,
                                      const std::vector<ad::VarT<T>>& leafs,
                                      const TensorT<T>& z_t, int t, const EmbeddingMatrix* e_T,
                                      const TensorT<T>& e_I) {
    require(static_cast<int>(leafs.size()) == registry.count(), ErrorKind::invalid_argument,
            "leaf list does not match registry");
    auto P = [&](const std::string& name) -> const ad::VarT<T>& {
        const int i = registry.index_of(name);
        require(i >= 0, ErrorKind::invalid_argument, "unknown parameter: " + name);
        return leafs[static_cast<std::size_t>(i)];
    };

    DenoiserGraph<T> g;
    const int L = cfg.levels;

    // time path
    const std::vector<double> tf = time_features(t, cfg.time_embed_dim);
    TensorT<T> tft({cfg.time_embed_dim});
    for (std::size_t i = 0; i < tf.size(); ++i) tft.v[i] = static_cast<T>(tf[i]);
    auto te = tape.linear(tape.constant(std::move(tft)), P("time.fc1.w"), P("time.fc1.b"));
    te = tape.silu(te);
    te = tape.linear(te, P("time.fc2.w"), P("time.fc2.b"));

    // text conditioning input (null marker -> zero matrix)
    TensorT<T> et = e_T ? embedding_tensor<T>(*e_T)
                        : TensorT<T>({cfg.text_m, cfg.text_d});
    auto text = tape.constant(std::move(et));

    auto h = tape.concat_channels(tape.constant(z_t), tape.constant(e_I));
    h = tape.silu(tape.conv2d(h, P("stem.w"), P("stem.b"), 1, 1));
    g.taps.emplace_back("stem", h);

    std::vector<ad::VarT<T>> skips;
    for (int l = 0; l < L; ++l) {
        const std::string pre = "enc" + std::to_string(l);
        h = tape.conv2d(h, P(pre + ".conv.w"), P(pre + ".conv.b"), 1, 1);
        auto tb = tape.linear(te, P("time." + pre + ".w"), P("time." + pre + ".b"));
        h = tape.silu(tape.add_channel_bias(h, tb));
        skips.push_back(h);
        h = tape.silu(tape.conv2d(h, P(pre + ".down.w"), P(pre + ".down.b"), 2, 1));
        g.taps.emplace_back(pre, h);
    }

    h = tape.conv2d(h, P("mid.conv1.w"), P("mid.conv1.b"), 1, 1);
    auto tmid = tape.linear(te, P("time.mid.w"), P("time.mid.b"));
    h = tape.silu(tape.add_channel_bias(h, tmid));

    if (cfg.conditioning_mode == ConditioningMode::cross_attention) {
        const int C = h->val.c(), H = h->val.h(), W = h->val.w();
        auto xpc = tape.chw_to_pc(h);
        auto q = tape.matmul(xpc, P("attn.wq"));
        auto k = tape.matmul(text, P("attn.wk"));
        auto v = tape.matmul(text, P("attn.wv"));
        auto s = tape.scale(tape.matmul_nt(q, k),
                            static_cast<T>(1.0 / std::sqrt(static_cast<double>(C))));
        auto o = tape.matmul(tape.softmax_rows(s), v);
        auto y = tape.pc_to_chw(tape.matmul(o, P("attn.wo")), C, H, W);
        h = tape.add(h, y);
    } else {
        auto pooled = tape.mean_rows(text);
        auto tb = tape.linear(pooled, P("attn.pool.w"), nullptr);
        h = tape.add_channel_bias(h, tb);
    }
    h = tape.silu(tape.conv2d(h, P("mid.conv2.w"), P("mid.conv2.b"), 1, 1));
    g.taps.emplace_back("mid", h);

    for (int l = L - 1; l >= 0; --l) {
        const std::string pre = "dec" + std::to_string(l);
        h = tape.silu(tape.conv2d(tape.upsample2(h), P(pre + ".up.w"), P(pre + ".up.b"), 1, 1));
        h = tape.concat_channels(h, skips[static_cast<std::size_t>(l)]);
        h = tape.conv2d(h, P(pre + ".conv.w"), P(pre + ".conv.b"), 1, 1);
        auto tb = tape.linear(te, P("time." + pre + ".w"), P("time." + pre + ".b"));
        h = tape.silu(tape.add_channel_bias(h, tb));
        g.taps.emplace_back(pre, h);
    }

    g.out = tape.conv2d(h, P("head.w"), P("head.b"), 1, 1);
    g.taps.emplace_back("head", g.out);
    return g;
}

// Leaf helpers shared by training loops.
template <typename T>
std::vector<ad::VarT<T>> param_leafs(ad::TapeT<T>& tape, const nn::ParamStore& params,
                                     bool needs_grad) {
    std::vector<ad::VarT<T>> leafs;
    leafs.reserve(static_cast<std::size_t>(params.count()));
    for (int i = 0; i < params.count(); ++i)
        leafs.push_back(tape.leaf(params.at(i).template cast<T>(), needs_grad));
    return leafs;
}

template <typename T>
std::vector<Tensor> collect_grads(const std::vector<ad::VarT<T>>& leafs) {
    std::vector<Tensor> grads;
    grads.reserve(leafs.size());
    for (const auto& leaf : leafs) {
        TensorT<T> g = leaf->grad.v.empty() ? TensorT<T>(leaf->val.shape) : leaf->grad;
        grads.push_back(g.template cast<float>());
    }
    return grads;
}

void validate_denoiser_inputs(const DenoiserConfig& cfg, const LatentTensor& z_t, int t,
                              const EmbeddingMatrix* e_T, const LatentTensor& e_I);

}  // namespace detail

}  // namespace mvc
