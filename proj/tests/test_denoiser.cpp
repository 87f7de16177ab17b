#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mvc/denoiser.hpp"
#include "mvc/diffusion.hpp"

using namespace mvc;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "mvc-denoiser-tests";
    fs::create_directories(dir);
    return dir / name;
}

// Independent parameter count from the architecture description: stem conv,
// two-layer time MLP, per-level conv+down+time-bias, bottleneck convs with
// conditioning, mirrored decoder, head conv.
std::size_t expected_param_count(const DenoiserConfig& c) {
    const auto conv = [](int out, int in) { return static_cast<std::size_t>(out) * in * 9 + out; };
    const auto lin = [](int out, int in) { return static_cast<std::size_t>(out) * in + out; };
    std::size_t n = 0;
    n += conv(c.base_width, 2 * c.latent_channels);
    n += 2 * lin(c.time_embed_dim, c.time_embed_dim);
    for (int l = 0; l < c.levels; ++l) {
        const int wl = c.base_width << l;
        n += conv(wl, wl) + conv(wl * 2, wl) + lin(wl, c.time_embed_dim);
    }
    const int wb = c.base_width << c.levels;
    n += conv(wb, wb) + lin(wb, c.time_embed_dim);
    if (c.conditioning_mode == ConditioningMode::cross_attention)
        n += static_cast<std::size_t>(wb) * wb * 2 + static_cast<std::size_t>(c.text_d) * wb * 2;
    else
        n += static_cast<std::size_t>(wb) * c.text_d;
    n += conv(wb, wb);
    for (int l = c.levels - 1; l >= 0; --l) {
        const int wl = c.base_width << l;
        n += conv(wl, wl * 2) + conv(wl, 2 * wl) + lin(wl, c.time_embed_dim);
    }
    n += conv(c.latent_channels, c.base_width);
    return n;
}

DenoiserConfig tiny_config() {
    DenoiserConfig cfg;
    cfg.latent_channels = 1;
    cfg.base_width = 4;
    cfg.levels = 1;
    cfg.time_embed_dim = 4;
    cfg.text_m = 3;
    cfg.text_d = 4;
    return cfg;
}

LatentTensor filled(std::vector<int> shape, std::uint64_t seed, float scale = 1.0f) {
    LatentTensor t(std::move(shape));
    RngStream rng(seed);
    for (float& x : t.v) x = scale * static_cast<float>(2.0 * rng.unit_double() - 1.0);
    return t;
}

EmbeddingMatrix text_of(int m, int d, std::uint64_t seed) {
    EmbeddingMatrix e(m, d);
    RngStream rng(seed);
    for (float& x : e.v) x = static_cast<float>(2.0 * rng.unit_double() - 1.0);
    return e;
}

}  // namespace

TEST_CASE("parameter count is a pure function of the config") {
    for (const int levels : {0, 1, 2}) {
        for (const ConditioningMode mode :
             {ConditioningMode::cross_attention, ConditioningMode::pooled_additive}) {
            DenoiserConfig cfg = tiny_config();
            cfg.levels = levels;
            cfg.conditioning_mode = mode;
            const nn::ParamStore ps = register_denoiser_params(cfg);
            CHECK(ps.total_parameters() == expected_param_count(cfg));
        }
    }
    DenoiserConfig big;
    CHECK(register_denoiser_params(big).total_parameters() == expected_param_count(big));
}

TEST_CASE("two models from one config share names and shapes") {
    const DenoiserConfig cfg = tiny_config();
    const Denoiser a = make_denoiser(cfg, 1);
    const Denoiser b = make_denoiser(cfg, 2);
    REQUIRE(a.params.count() == b.params.count());
    bool any_diff = false;
    for (int i = 0; i < a.params.count(); ++i) {
        CHECK(a.params.name_of(i) == b.params.name_of(i));
        CHECK(a.params.at(i).shape == b.params.at(i).shape);
        any_diff |= a.params.at(i).v != b.params.at(i).v;
    }
    CHECK(any_diff);
    const Denoiser c = make_denoiser(cfg, 1);
    for (int i = 0; i < a.params.count(); ++i) CHECK(a.params.at(i).v == c.params.at(i).v);
}

TEST_CASE("time features follow the sinusoidal recipe") {
    const std::vector<double> f = time_features(3, 4);
    REQUIRE(f.size() == 4);
    const double arg1 = 3.0 * std::exp(-std::log(10000.0) / 2.0);
    CHECK(f[0] == doctest::Approx(std::sin(3.0)).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(std::sin(arg1)).epsilon(1e-12));
    CHECK(f[2] == doctest::Approx(std::cos(3.0)).epsilon(1e-12));
    CHECK(f[3] == doctest::Approx(std::cos(arg1)).epsilon(1e-12));
    CHECK_THROWS_AS(time_features(1, 3), Error);
}

TEST_CASE("fresh models predict exactly zero") {
    for (const ConditioningMode mode :
         {ConditioningMode::cross_attention, ConditioningMode::pooled_additive}) {
        DenoiserConfig cfg = tiny_config();
        cfg.conditioning_mode = mode;
        const Denoiser model = make_denoiser(cfg, 7);
        const LatentTensor z = filled({1, 4, 4}, 3);
        const EmbeddingMatrix text = text_of(3, 4, 5);
        const LatentTensor out = predict_noise(model, z, 2, &text, filled({1, 4, 4}, 9));
        for (const float v : out.v) CHECK(v == 0.0f);
    }
}

TEST_CASE("null text contributes exactly zero through the conditioning block") {
    for (const ConditioningMode mode :
         {ConditioningMode::cross_attention, ConditioningMode::pooled_additive}) {
        DenoiserConfig cfg = tiny_config();
        cfg.conditioning_mode = mode;
        Denoiser model = make_denoiser(cfg, 7);
        const int head = model.params.index_of("head.w");
        model.params.at(head) = filled(model.params.at(head).shape, 11, 0.1f);

        const LatentTensor z = filled({1, 4, 4}, 3);
        const LatentTensor e_I = filled({1, 4, 4}, 9);
        const LatentTensor base = predict_noise(model, z, 2, nullptr, e_I);

        for (int i = 0; i < model.params.count(); ++i)
            if (model.params.name_of(i).rfind("attn.", 0) == 0)
                model.params.at(i) = filled(model.params.at(i).shape, 13 + i, 2.0f);
        const LatentTensor scrambled = predict_noise(model, z, 2, nullptr, e_I);
        CHECK(base.v == scrambled.v);
    }
}

TEST_CASE("predictions are sensitive to the text conditioning") {
    DenoiserConfig cfg = tiny_config();
    Denoiser model = make_denoiser(cfg, 7);
    const int head = model.params.index_of("head.w");
    model.params.at(head) = filled(model.params.at(head).shape, 11, 0.1f);
    const LatentTensor z = filled({1, 4, 4}, 3);
    const LatentTensor e_I = filled({1, 4, 4}, 9);
    const EmbeddingMatrix a = text_of(3, 4, 5);
    const EmbeddingMatrix b = text_of(3, 4, 6);
    CHECK(predict_noise(model, z, 2, &a, e_I).v != predict_noise(model, z, 2, &b, e_I).v);
    CHECK(predict_noise(model, z, 2, &a, e_I).v != predict_noise(model, z, 2, nullptr, e_I).v);
}

TEST_CASE("levels=0 keeps the bottleneck at full resolution") {
    DenoiserConfig cfg = tiny_config();
    cfg.levels = 0;
    cfg.conditioning_mode = ConditioningMode::pooled_additive;
    const Denoiser model = make_denoiser(cfg, 1);
    const LatentTensor z = filled({1, 1, 2}, 3);
    const LatentTensor out = predict_noise(model, z, 1, nullptr, filled({1, 1, 2}, 4));
    CHECK(out.shape == std::vector<int>{1, 1, 2});
}

TEST_CASE("checkpoints round trip the exact model") {
    DenoiserConfig cfg = tiny_config();
    Denoiser model = make_denoiser(cfg, 21);
    const int head = model.params.index_of("head.w");
    model.params.at(head) = filled(model.params.at(head).shape, 2, 0.05f);

    const fs::path path = temp_file("denoiser.ckpt");
    save_denoiser(path.string(), model);
    const Denoiser loaded = load_denoiser(path.string());
    CHECK(loaded.config.base_width == cfg.base_width);
    CHECK(loaded.config.conditioning_mode == cfg.conditioning_mode);
    REQUIRE(loaded.params.count() == model.params.count());
    for (int i = 0; i < model.params.count(); ++i)
        CHECK(loaded.params.at(i).v == model.params.at(i).v);

    const LatentTensor z = filled({1, 4, 4}, 3);
    const EmbeddingMatrix text = text_of(3, 4, 5);
    CHECK(predict_noise(model, z, 2, &text, filled({1, 4, 4}, 9)).v ==
          predict_noise(loaded, z, 2, &text, filled({1, 4, 4}, 9)).v);
}

TEST_CASE("loading rejects the wrong checkpoint kind") {
    nn::ParamStore ps;
    ps.add("w", {1});
    const fs::path path = temp_file("other.ckpt");
    nn::save_params(path.string(), "codec", {{"mode", "identity"}}, ps);
    CHECK_THROWS_AS(load_denoiser(path.string()), Error);
}

TEST_CASE("double-precision graph gradients match finite differences") {
    DenoiserConfig cfg = tiny_config();
    Denoiser model = make_denoiser(cfg, 17);
    const int head = model.params.index_of("head.w");
    model.params.at(head) = filled(model.params.at(head).shape, 4, 0.2f);

    const LatentTensor z_t = filled({1, 4, 4}, 31);
    const LatentTensor e_I = filled({1, 4, 4}, 32);
    const EmbeddingMatrix text = text_of(3, 4, 33);
    const Tensor eps = filled({1, 4, 4}, 34);
    const TensorT<double> eps_d = eps.cast<double>();
    const int t = 2;

    const auto loss_at = [&](const nn::ParamStore& params) {
        ad::TapeT<double> tape(false);
        const auto leafs = detail::param_leafs<double>(tape, params, false);
        const auto graph = detail::build_denoiser_graph<double>(
            tape, cfg, model.params, leafs, z_t.cast<double>(), t, &text, e_I.cast<double>());
        return tape.mse_against(graph.out, eps_d)->val.v[0];
    };

    ad::TapeT<double> tape(true);
    const auto leafs = detail::param_leafs<double>(tape, model.params, true);
    const auto graph = detail::build_denoiser_graph<double>(
        tape, cfg, model.params, leafs, z_t.cast<double>(), t, &text, e_I.cast<double>());
    tape.backward(tape.mse_against(graph.out, eps_d));

    // Parameters live in float storage, so the requested step gets rounded;
    // divide by the step that actually landed.
    const float h = 1e-4f;
    int checked = 0;
    for (int i = 0; i < model.params.count(); ++i) {
        const std::size_t n = model.params.at(i).v.size();
        for (std::size_t k = 0; k < n; k += 7) {
            nn::ParamStore plus = model.params;
            nn::ParamStore minus = model.params;
            plus.at(i).v[k] += h;
            minus.at(i).v[k] -= h;
            const double step =
                static_cast<double>(plus.at(i).v[k]) - static_cast<double>(minus.at(i).v[k]);
            const double fd = (loss_at(plus) - loss_at(minus)) / step;
            const double got = leafs[static_cast<std::size_t>(i)]->grad.v.empty()
                                   ? 0.0
                                   : leafs[static_cast<std::size_t>(i)]->grad.v[k];
            CHECK(got == doctest::Approx(fd).epsilon(1e-5));
            ++checked;
        }
    }
    CHECK(checked >= 200);
}

TEST_CASE("float backward agrees with the double graph") {
    DenoiserConfig cfg = tiny_config();
    Denoiser model = make_denoiser(cfg, 23);
    const int head = model.params.index_of("head.w");
    model.params.at(head) = filled(model.params.at(head).shape, 6, 0.2f);

    const NoiseSchedule schedule = make_schedule(8, 0.01, 0.05);
    const LatentTensor z0 = filled({1, 4, 4}, 41);
    const LatentTensor e_I = filled({1, 4, 4}, 42);
    const EmbeddingMatrix text = text_of(3, 4, 43);
    const LatentTensor eps = filled({1, 4, 4}, 44);
    const int t = 5;

    double loss = 0.0;
    const std::vector<Tensor> grads =
        denoiser_backward(model, z0, t, eps, &text, e_I, schedule, &loss);
    REQUIRE(static_cast<int>(grads.size()) == model.params.count());
    CHECK(loss > 0.0);

    const LatentTensor z_t = forward_diffuse(z0, t, eps, schedule);
    ad::TapeT<double> tape(true);
    const auto leafs = detail::param_leafs<double>(tape, model.params, true);
    const auto graph = detail::build_denoiser_graph<double>(
        tape, cfg, model.params, leafs, z_t.cast<double>(), t, &text, e_I.cast<double>());
    const auto dloss = tape.mse_against(graph.out, eps.cast<double>());
    tape.backward(dloss);
    CHECK(loss == doctest::Approx(dloss->val.v[0]).epsilon(1e-5));

    for (int i = 0; i < model.params.count(); ++i) {
        const auto& ref = leafs[static_cast<std::size_t>(i)]->grad;
        for (std::size_t k = 0; k < grads[static_cast<std::size_t>(i)].v.size(); k += 5) {
            const double want = ref.v.empty() ? 0.0 : ref.v[k];
            CHECK(grads[static_cast<std::size_t>(i)].v[k] ==
                  doctest::Approx(want).epsilon(2e-3));
        }
    }
}
