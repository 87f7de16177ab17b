#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "mvc/codec.hpp"
#include "mvc/rng.hpp"

using namespace mvc;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "mvc-codec-tests";
    fs::create_directories(dir);
    return dir / name;
}

ImageTensor image_of(std::vector<int> shape, std::uint64_t seed) {
    ImageTensor x(std::move(shape));
    RngStream rng(seed);
    for (float& v : x.v) v = static_cast<float>(rng.unit_double());
    return x;
}

CodecConfig learned_config() {
    CodecConfig cfg;
    cfg.mode = CodecMode::learned;
    cfg.f = 4;
    cfg.latent_channels = 2;
    cfg.image_channels = 1;
    cfg.width = 8;
    return cfg;
}

ImageTensor smooth_image(int h, int w) {
    ImageTensor x({1, h, w});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            x.v[static_cast<std::size_t>(i) * w + j] =
                0.5f + 0.35f * std::sin(0.5f * i) * std::cos(0.4f * j);
    return x;
}

}  // namespace

TEST_CASE("identity codec maps pixels to [-1,1] and back exactly") {
    const Codec codec = make_codec(CodecConfig{}, 0);
    CHECK(codec.params.count() == 0);

    ImageTensor x({1, 2, 2});
    x.v = {0.0f, 0.25f, 0.5f, 1.0f};
    const LatentTensor z = encode(codec, x);
    CHECK(z.shape == x.shape);
    CHECK(z.v == std::vector<float>{-1.0f, -0.5f, 0.0f, 1.0f});

    const ImageTensor back = decode(codec, z);
    CHECK(back.v == x.v);

    LatentTensor wild({1, 1, 2});
    wild.v = {-3.0f, 5.0f};
    const ImageTensor clamped = decode(codec, wild);
    CHECK(clamped.v == std::vector<float>{0.0f, 1.0f});
}

TEST_CASE("identity config validation") {
    CodecConfig bad;
    bad.f = 2;
    CHECK_THROWS_AS(make_codec(bad, 0), Error);
    CodecConfig mismatched;
    mismatched.latent_channels = 3;
    mismatched.image_channels = 1;
    CHECK_THROWS_AS(make_codec(mismatched, 0), Error);
    CodecConfig odd = learned_config();
    odd.f = 3;
    CHECK_THROWS_AS(make_codec(odd, 0), Error);
}

TEST_CASE("latent shapes divide the image by f") {
    const CodecConfig cfg = learned_config();
    CHECK(latent_shape_of(cfg, {1, 32, 32}) == std::vector<int>{2, 8, 8});
    CHECK(latent_shape_of(CodecConfig{}, {1, 5, 7}) == std::vector<int>{1, 5, 7});
    CHECK_THROWS_AS(latent_shape_of(cfg, {1, 30, 32}), Error);
    CHECK_THROWS_AS(latent_shape_of(cfg, {2, 32, 32}), Error);
    CHECK_THROWS_AS(latent_shape_of(cfg, {32, 32}), Error);
}

TEST_CASE("learned codec round trips shapes and stays in range") {
    const Codec codec = make_codec(learned_config(), 3);
    const ImageTensor x = image_of({1, 16, 16}, 5);
    const LatentTensor z = encode(codec, x);
    CHECK(z.shape == std::vector<int>{2, 4, 4});
    for (const float v : z.v) {
        CHECK(v >= -1.0f);
        CHECK(v <= 1.0f);
    }
    const ImageTensor back = decode(codec, z);
    CHECK(back.shape == x.shape);
    for (const float v : back.v) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("a one-image dataset overfits to near-zero error") {
    const std::vector<ImageTensor> data = {smooth_image(16, 16)};
    CodecTrainConfig tc;
    tc.steps = 1500;
    tc.batch_size = 1;
    tc.lr = 5e-3;
    const CodecTrainResult r = train_codec(data, learned_config(), tc, 1);
    REQUIRE(r.loss_curve.size() == 1500);
    CHECK(r.loss_curve.front() > r.final_error);
    CHECK(r.final_error < 1e-3);

    const ImageTensor back = decode(r.codec, encode(r.codec, data[0]));
    double mse = 0.0;
    for (std::size_t i = 0; i < back.v.size(); ++i) {
        const double d = static_cast<double>(back.v[i]) - data[0].v[i];
        mse += d * d;
    }
    mse /= static_cast<double>(back.v.size());
    CHECK(mse == doctest::Approx(r.final_error).epsilon(1e-9));
}

TEST_CASE("training is deterministic in the seed") {
    const std::vector<ImageTensor> data = {image_of({1, 16, 16}, 11), image_of({1, 16, 16}, 12)};
    CodecTrainConfig tc;
    tc.steps = 30;
    tc.batch_size = 2;
    const CodecTrainResult a = train_codec(data, learned_config(), tc, 9);
    const CodecTrainResult b = train_codec(data, learned_config(), tc, 9);
    const CodecTrainResult c = train_codec(data, learned_config(), tc, 10);
    REQUIRE(a.codec.params.count() == b.codec.params.count());
    bool differs_from_c = false;
    for (int i = 0; i < a.codec.params.count(); ++i) {
        CHECK(a.codec.params.at(i).v == b.codec.params.at(i).v);
        differs_from_c |= a.codec.params.at(i).v != c.codec.params.at(i).v;
    }
    CHECK(a.loss_curve == b.loss_curve);
    CHECK(differs_from_c);
}

TEST_CASE("training rejects bad setups") {
    CHECK_THROWS_AS(train_codec({}, learned_config(), CodecTrainConfig{}, 1), Error);
    CHECK_THROWS_AS(train_codec({image_of({1, 16, 16}, 1)}, CodecConfig{}, CodecTrainConfig{}, 1),
                    Error);
    CodecTrainConfig bad;
    bad.steps = 0;
    CHECK_THROWS_AS(train_codec({image_of({1, 16, 16}, 1)}, learned_config(), bad, 1), Error);
    CHECK_THROWS_AS(train_codec({image_of({1, 15, 16}, 1)}, learned_config(), CodecTrainConfig{}, 1),
                    Error);
}

TEST_CASE("checkpoints round trip both modes") {
    const fs::path ident = temp_file("ident.ckpt");
    save_codec(ident.string(), make_codec(CodecConfig{}, 0));
    const Codec loaded_ident = load_codec(ident.string());
    CHECK(loaded_ident.config.mode == CodecMode::identity);
    CHECK(loaded_ident.params.count() == 0);

    const Codec codec = make_codec(learned_config(), 3);
    const fs::path path = temp_file("learned.ckpt");
    save_codec(path.string(), codec);
    const Codec loaded = load_codec(path.string());
    CHECK(loaded.config.f == 4);
    CHECK(loaded.config.latent_channels == 2);
    CHECK(loaded.config.width == 8);
    REQUIRE(loaded.params.count() == codec.params.count());
    for (int i = 0; i < codec.params.count(); ++i)
        CHECK(loaded.params.at(i).v == codec.params.at(i).v);

    const ImageTensor x = image_of({1, 16, 16}, 5);
    CHECK(encode(loaded, x).v == encode(codec, x).v);
}

TEST_CASE("config json round trips") {
    const CodecConfig cfg = learned_config();
    const CodecConfig back = codec_config_from_json(codec_config_json(cfg));
    CHECK(back.mode == CodecMode::learned);
    CHECK(back.f == cfg.f);
    CHECK(back.latent_channels == cfg.latent_channels);
    CHECK(back.image_channels == cfg.image_channels);
    CHECK(back.width == cfg.width);
    CHECK_THROWS_AS(codec_config_from_json(nlohmann::json::array()), Error);
    nlohmann::json j = codec_config_json(cfg);
    j["mode"] = "fancy";
    CHECK_THROWS_AS(codec_config_from_json(j), Error);
}
