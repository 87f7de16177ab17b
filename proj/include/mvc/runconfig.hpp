#pragma once

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvc/caption.hpp"
#include "mvc/classifier.hpp"
#include "mvc/codec.hpp"
#include "mvc/denoiser.hpp"
#include "mvc/diffusion.hpp"
#include "mvc/mixer.hpp"
#include "mvc/pipeline.hpp"
#include "mvc/schedule.hpp"

namespace mvc {

// One run-config file drives every subcommand. JSON, versioned, strict:
// unknown keys anywhere in the tree are rejected, every value is validated,
// and load -> dump -> load round-trips to an identical config.
struct RunConfig {
    struct Embedder {
        int m = 16;  // token rows per embedding
        int d = 32;  // embedding dims
        std::uint64_t seed = 1;
    } embedder;

    struct Mixer {
        int coarse_passes = 1;      // P
        int fine_passes = 2;        // Q
        int outputs_per_class = 8;  // N_y
    } mixer;

    struct Schedule {
        int steps = 200;  // T
        double beta_start = 1e-4;
        double beta_end = 0.02;
    } schedule;

    struct Guidance {
        double w = 7.5;
    } guidance;

    struct DenoiserSec {
        int base_width = 32;
        int levels = 2;
        int time_embed_dim = 32;
        std::string conditioning = "cross_attention";  // or "pooled_additive"
    } denoiser;

    struct CodecSec {
        std::string mode = "identity";  // or "learned"
        int f = 4;                      // spatial downsampling, power of two
        int latent_channels = 4;
        int width = 16;
        int train_steps = 500;
        int batch_size = 8;
        double lr = 2e-3;
    } codec;

    struct Pipeline {
        double ratio = 3.0;  // synthetic per class = ceil(ratio * real)
        int steps = 2000;    // diffusion finetune steps
        int batch_size = 4;
        double lr = 1e-3;
        int refresh_every = 500;
        double p_uncond = 0.1;
    } pipeline;

    struct ClassifierSec {
        std::string strategy = "two_phase";
        std::vector<std::uint64_t> seeds = {1, 2, 3};
        double p = 0.8;  // RSP admission probability
        int width = 16;
        int steps = 600;
        double lr = 1e-3;
        int batch_size = 8;
        int phase2_steps = 200;  // two-phase refinement, < steps
        double phase2_lr = 1e-4;  // < lr
    } classifier;

    struct Paths {
        std::string data_dir = "data";
        std::string run_root;  // empty -> $MVCAUG_RUN_DIR, else "runs"
    } paths;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& c);

// fnv1a64 over the canonical dump (sorted keys), as 16 hex digits.
std::string config_hash(const RunConfig& c);

// "<UTC timestamp>-<config hash>", collision-free across configs.
std::string run_dir_name(const RunConfig& c, std::time_t now);

// paths.run_root if set, else $MVCAUG_RUN_DIR, else "runs".
std::filesystem::path run_root(const RunConfig& c);

// Materialize module configs from the aggregate.
TokenEmbedder embedder_of(const RunConfig& c);
MixerConfig mixer_of(const RunConfig& c, std::uint64_t seed);
NoiseSchedule schedule_of(const RunConfig& c);
GuidanceConfig guidance_of(const RunConfig& c);
DenoiserConfig denoiser_of(const RunConfig& c, int latent_channels);
CodecConfig codec_of(const RunConfig& c, int image_channels);
CodecTrainConfig codec_train_of(const RunConfig& c);
FinetuneConfig finetune_of(const RunConfig& c);
AugmentConfig augment_of(const RunConfig& c, std::uint64_t seed);
ClassifierConfig classifier_of(const RunConfig& c, int image_channels, int n_classes);

// Builds the named strategy ("baseline" | "combined" | "rsp" | "two_phase")
// from the classifier section.
TrainingStrategy strategy_of(const RunConfig& c, const std::string& name);

}  // namespace mvc
