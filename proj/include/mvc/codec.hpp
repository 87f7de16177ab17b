#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvc/params.hpp"
#include "mvc/tensor.hpp"

namespace mvc {

enum class CodecMode { identity, learned };

// Identity mode maps pixels [0,1] -> latents [-1,1] by z = 2x - 1 and back by
// x = clamp((z + 1) / 2). Learned mode is a small conv autoencoder with
// stride-2 stages (f must be a power of two), tanh on the latent head and
// sigmoid on the reconstruction head.
struct CodecConfig {
    CodecMode mode = CodecMode::identity;
    int f = 1;
    int latent_channels = 1;
    int image_channels = 1;
    int width = 16;
};

struct Codec {
    CodecConfig config;
    nn::ParamStore params;  // empty in identity mode
};

struct CodecTrainConfig {
    int steps = 500;
    int batch_size = 8;
    double lr = 2e-3;
};

struct CodecTrainResult {
    Codec codec;
    double final_error = 0.0;
    std::vector<double> loss_curve;
};

nn::ParamStore register_codec_params(const CodecConfig& cfg);
Codec make_codec(const CodecConfig& cfg, std::uint64_t seed);

LatentTensor encode(const Codec& codec, const ImageTensor& x);
ImageTensor decode(const Codec& codec, const LatentTensor& z);

std::vector<int> latent_shape_of(const CodecConfig& cfg, const std::vector<int>& image_shape);

CodecTrainResult train_codec(const std::vector<ImageTensor>& dataset, const CodecConfig& cfg,
                             const CodecTrainConfig& train, std::uint64_t seed);

void save_codec(const std::string& path, const Codec& codec);
Codec load_codec(const std::string& path);

nlohmann::json codec_config_json(const CodecConfig& cfg);
CodecConfig codec_config_from_json(const nlohmann::json& j);

}  // namespace mvc
