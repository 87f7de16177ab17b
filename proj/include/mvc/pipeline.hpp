#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvc/codec.hpp"
#include "mvc/dataset.hpp"
#include "mvc/denoiser.hpp"
#include "mvc/diffusion.hpp"
#include "mvc/mixer.hpp"

namespace mvc {

struct TrainingPair {
    ImageTensor x;
    ImageTensor x_prime;
    std::size_t x_index = 0;        // record indices into the manifest
    std::size_t x_prime_index = 0;
};

// Uniform same-class pair from the real records. Draw order: i = below(n),
// then for n > 1 j = below(n-1) with j incremented when j >= i (distinct);
// a singleton class returns its image twice.
TrainingPair sample_training_pair(const DatasetManifest& manifest, const std::string& class_label,
                                  RngStream& rng);

struct FinetuneConfig {
    int steps = 2000;
    int batch_size = 4;
    double lr = 1e-3;
    int refresh_every = 500;  // mixed-pool refresh cadence R
    // Fraction of samples trained against the null text embedding so the
    // guidance combiner's unconditional branch is learned; drawn per sample.
    double p_uncond = 0.1;
};

struct FinetuneResult {
    Denoiser model;
    std::vector<double> loss_curve;  // one batch loss per step
};

// Training loop: per step and batch item, on RngStream(seed).derive("finetune"):
// class = below(n_classes), (x, x') = sample_training_pair, t = below(T)+1,
// eps ~ N(0,I), pool pick = below(N_y), null-text draw = unit_double() <
// p_uncond. z0 = encode(x), e_I = encode(x'). The per-class mixed pools are
// rebuilt every refresh_every steps with mixer seed
// RngStream(mixer.seed).derive("refresh").derive(refresh_index).
FinetuneResult finetune_diffusion(const DatasetManifest& manifest, const TokenEmbedder& embedder,
                                  const Codec& codec, const DenoiserConfig& dcfg,
                                  const MixerConfig& mixer, const NoiseSchedule& schedule,
                                  const FinetuneConfig& train, std::uint64_t seed);

struct GenerationRequest {
    std::string class_label;
    int count = 1;  // N_y
    GuidanceConfig guidance;
    MixerConfig mixer;  // P and Q; seed and outputs come from the request
    std::uint64_t seed = 0;
};

struct GeneratedImage {
    ImageTensor image;
    nlohmann::json meta;  // everything needed to regenerate bit-exactly
};

// Per output k, on stream = RngStream(seed).derive("generate").derive(label):
// the conditional image index comes from stream.derive("conditional")
// (sequential below(n) draws), the N_y mixed conditionings from one
// mix_embeddings call with seed stream.derive("mix").seed(), and the sampler
// noise from seed stream.derive("sample").derive(k).seed().
std::vector<GeneratedImage> generate_images(const GenerationRequest& request,
                                            const DatasetManifest& manifest,
                                            const TokenEmbedder& embedder, const Codec& codec,
                                            const Denoiser& model, const NoiseSchedule& schedule);

// Rebuilds one image from a generated record's metadata; bit-identical to the
// original. `manifest` must be the manifest the image was generated against
// (paths are matched verbatim).
ImageTensor regenerate_image(const nlohmann::json& meta, const DatasetManifest& manifest,
                             const TokenEmbedder& embedder, const Codec& codec,
                             const Denoiser& model, const NoiseSchedule& schedule);

struct AugmentConfig {
    double ratio = 3.0;  // synthetic per class = ceil(ratio * real per class)
    GuidanceConfig guidance;
    MixerConfig mixer;
    std::uint64_t seed = 0;
};

// Generates the per-class synthetic sets, writes them under
// out_dir/synthetic/<label>/, and returns the merged manifest written to
// out_dir/manifest.json (real record paths are re-based onto out_dir).
DatasetManifest build_augmented_dataset(const DatasetManifest& real, const AugmentConfig& cfg,
                                        const TokenEmbedder& embedder, const Codec& codec,
                                        const Denoiser& model, const NoiseSchedule& schedule,
                                        const std::filesystem::path& out_dir);

}  // namespace mvc
