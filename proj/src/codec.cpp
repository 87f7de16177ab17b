#include "mvc/codec.hpp"

#include <algorithm>
#include <cmath>

#include "mvc/autodiff.hpp"
#include "mvc/rng.hpp"

namespace mvc {

namespace {

int stage_count(int f) {
    require(f >= 1 && (f & (f - 1)) == 0, ErrorKind::config,
            "codec downsample factor must be a power of two");
    int k = 0;
    while ((1 << k) < f) ++k;
    return k;
}

void validate_config(const CodecConfig& cfg) {
    if (cfg.mode == CodecMode::identity) {
        require(cfg.f == 1, ErrorKind::config, "identity codec requires f = 1");
        require(cfg.latent_channels == cfg.image_channels, ErrorKind::config,
                "identity codec keeps the channel count");
        return;
    }
    require(cfg.latent_channels >= 1 && cfg.image_channels >= 1 && cfg.width >= 1,
            ErrorKind::config, "codec config fields must be positive");
    stage_count(cfg.f);
}

struct CodecGraph {
    ad::Var<float> latent;
    ad::Var<float> recon;
};

ad::Var<float> encoder_graph(ad::Tape& tape, const CodecConfig& cfg,
                             const nn::ParamStore& registry,
                             const std::vector<ad::Var<float>>& leafs, const Tensor& x) {
    auto P = [&](const std::string& name) -> const ad::Var<float>& {
        const int i = registry.index_of(name);
        require(i >= 0, ErrorKind::invalid_argument, "unknown codec parameter: " + name);
        return leafs[static_cast<std::size_t>(i)];
    };
    auto h = tape.silu(tape.conv2d(tape.constant(x), P("enc.stem.w"), P("enc.stem.b"), 1, 1));
    for (int i = 0; i < stage_count(cfg.f); ++i) {
        const std::string pre = "enc.down" + std::to_string(i);
        h = tape.silu(tape.conv2d(h, P(pre + ".w"), P(pre + ".b"), 2, 1));
    }
    return tape.tanh_op(tape.conv2d(h, P("enc.head.w"), P("enc.head.b"), 1, 1));
}

ad::Var<float> decoder_graph(ad::Tape& tape, const CodecConfig& cfg,
                             const nn::ParamStore& registry,
                             const std::vector<ad::Var<float>>& leafs, const ad::Var<float>& z) {
    auto P = [&](const std::string& name) -> const ad::Var<float>& {
        const int i = registry.index_of(name);
        require(i >= 0, ErrorKind::invalid_argument, "unknown codec parameter: " + name);
        return leafs[static_cast<std::size_t>(i)];
    };
    auto h = tape.silu(tape.conv2d(z, P("dec.stem.w"), P("dec.stem.b"), 1, 1));
    for (int i = 0; i < stage_count(cfg.f); ++i) {
        const std::string pre = "dec.up" + std::to_string(i);
        h = tape.silu(tape.conv2d(tape.upsample2(h), P(pre + ".w"), P(pre + ".b"), 1, 1));
    }
    return tape.sigmoid(tape.conv2d(h, P("dec.head.w"), P("dec.head.b"), 1, 1));
}

std::vector<ad::Var<float>> codec_leafs(ad::Tape& tape, const nn::ParamStore& params,
                                        bool needs_grad) {
    std::vector<ad::Var<float>> leafs;
    leafs.reserve(static_cast<std::size_t>(params.count()));
    for (int i = 0; i < params.count(); ++i) leafs.push_back(tape.leaf(params.at(i), needs_grad));
    return leafs;
}

}  // namespace

nn::ParamStore register_codec_params(const CodecConfig& cfg) {
    validate_config(cfg);
    nn::ParamStore ps;
    if (cfg.mode == CodecMode::identity) return ps;
    const int W = cfg.width, Ci = cfg.image_channels, Cl = cfg.latent_channels;
    const int k = stage_count(cfg.f);
    ps.add("enc.stem.w", {W, Ci, 3, 3});
    ps.add("enc.stem.b", {W});
    for (int i = 0; i < k; ++i) {
        ps.add("enc.down" + std::to_string(i) + ".w", {W, W, 3, 3});
        ps.add("enc.down" + std::to_string(i) + ".b", {W});
    }
    ps.add("enc.head.w", {Cl, W, 3, 3});
    ps.add("enc.head.b", {Cl});
    ps.add("dec.stem.w", {W, Cl, 3, 3});
    ps.add("dec.stem.b", {W});
    for (int i = 0; i < k; ++i) {
        ps.add("dec.up" + std::to_string(i) + ".w", {W, W, 3, 3});
        ps.add("dec.up" + std::to_string(i) + ".b", {W});
    }
    ps.add("dec.head.w", {Ci, W, 3, 3});
    ps.add("dec.head.b", {Ci});
    return ps;
}

Codec make_codec(const CodecConfig& cfg, std::uint64_t seed) {
    Codec codec{cfg, register_codec_params(cfg)};
    const RngStream root = RngStream(seed).derive("codec-init");
    for (int i = 0; i < codec.params.count(); ++i) {
        const Tensor& t = codec.params.at(i);
        int fan_in;
        if (t.rank() == 4) {
            fan_in = t.shape[1] * t.shape[2] * t.shape[3];
        } else {
            const std::string& name = codec.params.name_of(i);
            const int wi = codec.params.index_of(name.substr(0, name.size() - 2) + ".w");
            require(wi >= 0, ErrorKind::config, "bias without matching weight: " + name);
            const Tensor& wt = codec.params.at(wi);
            fan_in = wt.shape[1] * wt.shape[2] * wt.shape[3];
        }
        nn::fan_in_uniform_init(codec.params, i, fan_in, root);
    }
    return codec;
}

std::vector<int> latent_shape_of(const CodecConfig& cfg, const std::vector<int>& image_shape) {
    require(image_shape.size() == 3, ErrorKind::shape, "image shape must be CHW");
    require(image_shape[0] == cfg.image_channels, ErrorKind::shape,
            "image channel count does not match the codec");
    require(image_shape[1] % cfg.f == 0 && image_shape[2] % cfg.f == 0, ErrorKind::shape,
            "image dimensions must be divisible by the downsample factor");
    return {cfg.latent_channels, image_shape[1] / cfg.f, image_shape[2] / cfg.f};
}

LatentTensor encode(const Codec& codec, const ImageTensor& x) {
    const std::vector<int> zshape = latent_shape_of(codec.config, x.shape);
    if (codec.config.mode == CodecMode::identity) {
        LatentTensor z(x.shape);
        for (std::size_t i = 0; i < x.v.size(); ++i) z.v[i] = 2.0f * x.v[i] - 1.0f;
        return z;
    }
    ad::Tape tape(false);
    const auto leafs = codec_leafs(tape, codec.params, false);
    auto z = encoder_graph(tape, codec.config, codec.params, leafs, x);
    require(z->val.shape == zshape, ErrorKind::shape, "encoder produced unexpected latent shape");
    require(z->val.all_finite(), ErrorKind::numeric, "encoder produced non-finite values");
    return z->val;
}

ImageTensor decode(const Codec& codec, const LatentTensor& z) {
    require(z.rank() == 3 && z.c() == codec.config.latent_channels, ErrorKind::shape,
            "latent shape does not match the codec");
    if (codec.config.mode == CodecMode::identity) {
        ImageTensor x(z.shape);
        for (std::size_t i = 0; i < z.v.size(); ++i)
            x.v[i] = std::clamp((z.v[i] + 1.0f) / 2.0f, 0.0f, 1.0f);
        return x;
    }
    ad::Tape tape(false);
    const auto leafs = codec_leafs(tape, codec.params, false);
    auto x = decoder_graph(tape, codec.config, codec.params, leafs, tape.constant(z));
    require(x->val.all_finite(), ErrorKind::numeric, "decoder produced non-finite values");
    for (float& v : x->val.v) v = std::clamp(v, 0.0f, 1.0f);
    return x->val;
}

CodecTrainResult train_codec(const std::vector<ImageTensor>& dataset, const CodecConfig& cfg,
                             const CodecTrainConfig& train, std::uint64_t seed) {
    require(!dataset.empty(), ErrorKind::invalid_argument, "codec training needs a dataset");
    require(cfg.mode == CodecMode::learned, ErrorKind::config,
            "identity codec has nothing to train");
    require(train.steps >= 1 && train.batch_size >= 1, ErrorKind::config,
            "codec training needs positive steps and batch size");
    require(train.lr > 0.0, ErrorKind::invalid_argument, "learning rate must be positive");
    for (const ImageTensor& x : dataset) latent_shape_of(cfg, x.shape);

    CodecTrainResult result;
    result.codec = make_codec(cfg, seed);
    RngStream batch_rng = RngStream(seed).derive("codec-batch");
    nn::AdamState opt;
    nn::AdamConfig opt_cfg;
    opt_cfg.lr = train.lr;
    for (int step = 0; step < train.steps; ++step) {
        ad::Tape tape(true);
        const auto leafs = codec_leafs(tape, result.codec.params, true);
        std::vector<ad::Var<float>> losses;
        for (int b = 0; b < train.batch_size; ++b) {
            const std::size_t idx = batch_rng.below(dataset.size());
            const ImageTensor& x = dataset[idx];
            auto z = encoder_graph(tape, cfg, result.codec.params, leafs, x);
            auto recon = decoder_graph(tape, cfg, result.codec.params, leafs, z);
            losses.push_back(tape.mse_against(recon, x));
        }
        auto loss = tape.scale(tape.add_scalars(losses), 1.0f / train.batch_size);
        require(std::isfinite(loss->val.v[0]), ErrorKind::numeric,
                "codec training loss is non-finite at step " + std::to_string(step));
        tape.backward(loss);
        std::vector<Tensor> grads;
        grads.reserve(leafs.size());
        for (const auto& leaf : leafs)
            grads.push_back(leaf->grad.v.empty() ? Tensor(leaf->val.shape) : leaf->grad);
        nn::adam_step(result.codec.params, grads, opt, opt_cfg);
        result.loss_curve.push_back(static_cast<double>(loss->val.v[0]));
    }

    double err = 0.0;
    for (const ImageTensor& x : dataset) {
        const ImageTensor recon = decode(result.codec, encode(result.codec, x));
        double acc = 0.0;
        for (std::size_t i = 0; i < x.v.size(); ++i) {
            const double r = static_cast<double>(recon.v[i]) - static_cast<double>(x.v[i]);
            acc += r * r;
        }
        err += acc / static_cast<double>(x.v.size());
    }
    result.final_error = err / static_cast<double>(dataset.size());
    return result;
}

nlohmann::json codec_config_json(const CodecConfig& cfg) {
    return {{"mode", cfg.mode == CodecMode::identity ? "identity" : "learned"},
            {"f", cfg.f},
            {"latent_channels", cfg.latent_channels},
            {"image_channels", cfg.image_channels},
            {"width", cfg.width}};
}

CodecConfig codec_config_from_json(const nlohmann::json& j) {
    require(j.is_object(), ErrorKind::parse, "codec config must be an object");
    CodecConfig cfg;
    const std::string mode = j.value("mode", "identity");
    if (mode == "identity")
        cfg.mode = CodecMode::identity;
    else if (mode == "learned")
        cfg.mode = CodecMode::learned;
    else
        fail(ErrorKind::parse, "unknown codec mode: " + mode);
    cfg.f = j.value("f", cfg.f);
    cfg.latent_channels = j.value("latent_channels", cfg.latent_channels);
    cfg.image_channels = j.value("image_channels", cfg.image_channels);
    cfg.width = j.value("width", cfg.width);
    validate_config(cfg);
    return cfg;
}

void save_codec(const std::string& path, const Codec& codec) {
    nn::save_params(path, "codec", codec_config_json(codec.config), codec.params);
}

Codec load_codec(const std::string& path) {
    nn::LoadedParams loaded = nn::load_params(path, "codec");
    Codec codec;
    codec.config = codec_config_from_json(loaded.config);
    const nn::ParamStore expected = register_codec_params(codec.config);
    require(loaded.params.count() == expected.count(), ErrorKind::parse,
            "codec checkpoint tensor count does not match config: " + path);
    for (int i = 0; i < expected.count(); ++i)
        require(loaded.params.name_of(i) == expected.name_of(i) &&
                    loaded.params.at(i).shape == expected.at(i).shape,
                ErrorKind::parse, "codec checkpoint tensor mismatch: " + loaded.params.name_of(i));
    codec.params = std::move(loaded.params);
    return codec;
}

}  // namespace mvc
