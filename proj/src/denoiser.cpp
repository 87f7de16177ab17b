#include "mvc/denoiser.hpp"

#include "mvc/diffusion.hpp"

namespace mvc {

namespace {

void validate_config(const DenoiserConfig& cfg) {
    require(cfg.latent_channels >= 1 && cfg.base_width >= 1 && cfg.time_embed_dim >= 2 &&
                cfg.text_m >= 1 && cfg.text_d >= 1,
            ErrorKind::config, "denoiser config fields must be positive");
    require(cfg.levels >= 0, ErrorKind::config, "denoiser levels must be non-negative");
    require(cfg.time_embed_dim % 2 == 0, ErrorKind::config,
            "time_embed_dim must be even for sin/cos pairing");
}

int width_at(const DenoiserConfig& cfg, int level) { return cfg.base_width << level; }

}  // namespace

nn::ParamStore register_denoiser_params(const DenoiserConfig& cfg) {
    validate_config(cfg);
    nn::ParamStore ps;
    const int B = cfg.base_width, C = cfg.latent_channels, Dt = cfg.time_embed_dim;
    const int L = cfg.levels;
    const int WB = width_at(cfg, L);

    ps.add("stem.w", {B, 2 * C, 3, 3});
    ps.add("stem.b", {B});
    ps.add("time.fc1.w", {Dt, Dt});
    ps.add("time.fc1.b", {Dt});
    ps.add("time.fc2.w", {Dt, Dt});
    ps.add("time.fc2.b", {Dt});
    for (int l = 0; l < L; ++l) {
        const int w = width_at(cfg, l), wn = width_at(cfg, l + 1);
        const std::string pre = "enc" + std::to_string(l);
        ps.add(pre + ".conv.w", {w, w, 3, 3});
        ps.add(pre + ".conv.b", {w});
        ps.add(pre + ".down.w", {wn, w, 3, 3});
        ps.add(pre + ".down.b", {wn});
        ps.add("time." + pre + ".w", {w, Dt});
        ps.add("time." + pre + ".b", {w});
    }
    ps.add("mid.conv1.w", {WB, WB, 3, 3});
    ps.add("mid.conv1.b", {WB});
    ps.add("time.mid.w", {WB, Dt});
    ps.add("time.mid.b", {WB});
    if (cfg.conditioning_mode == ConditioningMode::cross_attention) {
        ps.add("attn.wq", {WB, WB});
        ps.add("attn.wk", {cfg.text_d, WB});
        ps.add("attn.wv", {cfg.text_d, WB});
        ps.add("attn.wo", {WB, WB});
    } else {
        ps.add("attn.pool.w", {WB, cfg.text_d});
    }
    ps.add("mid.conv2.w", {WB, WB, 3, 3});
    ps.add("mid.conv2.b", {WB});
    for (int l = L - 1; l >= 0; --l) {
        const int w = width_at(cfg, l), wn = width_at(cfg, l + 1);
        const std::string pre = "dec" + std::to_string(l);
        ps.add(pre + ".up.w", {w, wn, 3, 3});
        ps.add(pre + ".up.b", {w});
        ps.add(pre + ".conv.w", {w, 2 * w, 3, 3});
        ps.add(pre + ".conv.b", {w});
        ps.add("time." + pre + ".w", {w, Dt});
        ps.add("time." + pre + ".b", {w});
    }
    ps.add("head.w", {C, B, 3, 3});
    ps.add("head.b", {C});
    return ps;
}

Denoiser make_denoiser(const DenoiserConfig& cfg, std::uint64_t seed) {
    Denoiser model{cfg, register_denoiser_params(cfg)};
    const RngStream root = RngStream(seed).derive("denoiser-init");
    for (int i = 0; i < model.params.count(); ++i) {
        const std::string& name = model.params.name_of(i);
        if (name == "head.w" || name == "head.b") continue;  // stays zero
        const Tensor& t = model.params.at(i);
        int fan_in = 1;
        if (t.rank() == 4)
            fan_in = t.shape[1] * t.shape[2] * t.shape[3];
        else if (t.rank() == 2)
            fan_in = t.shape[1];
        else if (t.rank() == 1) {
            // biases share their layer's fan-in; recover it from the matching weight
            const std::string wname = name.substr(0, name.size() - 2) + ".w";
            const int wi = model.params.index_of(wname);
            require(wi >= 0, ErrorKind::config, "bias without matching weight: " + name);
            const Tensor& wt = model.params.at(wi);
            fan_in = wt.rank() == 4 ? wt.shape[1] * wt.shape[2] * wt.shape[3] : wt.shape[1];
        }
        nn::fan_in_uniform_init(model.params, i, fan_in, root);
    }
    return model;
}

std::vector<double> time_features(int t, int dim) {
    require(dim >= 2 && dim % 2 == 0, ErrorKind::invalid_argument,
            "time feature dimension must be even and >= 2");
    const int half = dim / 2;
    std::vector<double> out(static_cast<std::size_t>(dim));
    for (int i = 0; i < half; ++i) {
        const double arg =
            static_cast<double>(t) * std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                              static_cast<double>(half));
        out[static_cast<std::size_t>(i)] = std::sin(arg);
        out[static_cast<std::size_t>(half + i)] = std::cos(arg);
    }
    return out;
}

namespace detail {

void validate_denoiser_inputs(const DenoiserConfig& cfg, const LatentTensor& z_t, int t,
                              const EmbeddingMatrix* e_T, const LatentTensor& e_I) {
    require(z_t.rank() == 3, ErrorKind::shape, "z_t must be a CHW tensor");
    require(z_t.c() == cfg.latent_channels, ErrorKind::shape,
            "z_t channel count does not match the denoiser config");
    require_same_shape(z_t, e_I, "image conditioning");
    require(t >= 1, ErrorKind::invalid_argument, "timestep must be >= 1");
    const int div = 1 << cfg.levels;
    require(z_t.h() % div == 0 && z_t.w() % div == 0, ErrorKind::shape,
            "latent spatial dims must be divisible by 2^levels");
    if (e_T)
        require(e_T->rows == cfg.text_m && e_T->cols == cfg.text_d, ErrorKind::shape,
                "text embedding shape does not match the denoiser config");
}

}  // namespace detail

LatentTensor predict_noise(const Denoiser& model, const LatentTensor& z_t, int t,
                           const EmbeddingMatrix* e_T, const LatentTensor& e_I) {
    detail::validate_denoiser_inputs(model.config, z_t, t, e_T, e_I);
    ad::Tape tape(false);
    const auto leafs = detail::param_leafs(tape, model.params, false);
    const auto g = detail::build_denoiser_graph(tape, model.config, model.params, leafs, z_t, t,
                                                e_T, e_I);
    for (const auto& [name, var] : g.taps)
        require(var->val.all_finite(), ErrorKind::numeric,
                "non-finite activations after layer " + name);
    return g.out->val;
}

std::vector<Tensor> denoiser_backward(const Denoiser& model, const LatentTensor& z0, int t,
                                      const LatentTensor& eps, const EmbeddingMatrix* e_T,
                                      const LatentTensor& e_I, const NoiseSchedule& schedule,
                                      double* loss_out) {
    detail::validate_denoiser_inputs(model.config, z0, t, e_T, e_I);
    require_same_shape(z0, eps, "noise target");
    const LatentTensor z_t = forward_diffuse(z0, t, eps, schedule);
    ad::Tape tape(true);
    const auto leafs = detail::param_leafs(tape, model.params, true);
    const auto g = detail::build_denoiser_graph(tape, model.config, model.params, leafs, z_t, t,
                                                e_T, e_I);
    const auto loss = tape.mse_against(g.out, eps);
    require(std::isfinite(loss->val.v[0]), ErrorKind::numeric,
            "noise-prediction loss is non-finite");
    tape.backward(loss);
    if (loss_out) *loss_out = static_cast<double>(loss->val.v[0]);
    return detail::collect_grads(leafs);
}

nlohmann::json denoiser_config_json(const DenoiserConfig& cfg) {
    return {{"latent_channels", cfg.latent_channels},
            {"base_width", cfg.base_width},
            {"levels", cfg.levels},
            {"time_embed_dim", cfg.time_embed_dim},
            {"text_m", cfg.text_m},
            {"text_d", cfg.text_d},
            {"conditioning_mode", cfg.conditioning_mode == ConditioningMode::cross_attention
                                      ? "cross_attention"
                                      : "pooled_additive"}};
}

DenoiserConfig denoiser_config_from_json(const nlohmann::json& j) {
    require(j.is_object(), ErrorKind::parse, "denoiser config must be an object");
    DenoiserConfig cfg;
    cfg.latent_channels = j.value("latent_channels", cfg.latent_channels);
    cfg.base_width = j.value("base_width", cfg.base_width);
    cfg.levels = j.value("levels", cfg.levels);
    cfg.time_embed_dim = j.value("time_embed_dim", cfg.time_embed_dim);
    cfg.text_m = j.value("text_m", cfg.text_m);
    cfg.text_d = j.value("text_d", cfg.text_d);
    const std::string mode = j.value("conditioning_mode", "cross_attention");
    if (mode == "cross_attention")
        cfg.conditioning_mode = ConditioningMode::cross_attention;
    else if (mode == "pooled_additive")
        cfg.conditioning_mode = ConditioningMode::pooled_additive;
    else
        fail(ErrorKind::parse, "unknown conditioning_mode: " + mode);
    validate_config(cfg);
    return cfg;
}

void save_denoiser(const std::string& path, const Denoiser& model) {
    nn::save_params(path, "denoiser", denoiser_config_json(model.config), model.params);
}

Denoiser load_denoiser(const std::string& path) {
    nn::LoadedParams loaded = nn::load_params(path, "denoiser");
    Denoiser model;
    model.config = denoiser_config_from_json(loaded.config);
    const nn::ParamStore expected = register_denoiser_params(model.config);
    require(loaded.params.count() == expected.count(), ErrorKind::parse,
            "checkpoint tensor count does not match config: " + path);
    for (int i = 0; i < expected.count(); ++i) {
        require(loaded.params.name_of(i) == expected.name_of(i) &&
                    loaded.params.at(i).shape == expected.at(i).shape,
                ErrorKind::parse,
                "checkpoint tensor " + loaded.params.name_of(i) + " does not match config");
    }
    model.params = std::move(loaded.params);
    return model;
}

}  // namespace mvc
