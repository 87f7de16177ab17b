#include "mvc/runconfig.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

namespace mvc {

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& where) {
    require(j.is_object(), ErrorKind::config, where + " must be a JSON object");
    for (const auto& [key, value] : j.items())
        require(allowed.count(key) > 0, ErrorKind::config,
                "unknown key \"" + key + "\" in " + where);
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void validate(const RunConfig& c) {
    require(c.embedder.m >= 2 && c.embedder.d >= 2, ErrorKind::config,
            "embedder needs m >= 2 and d >= 2");
    require(c.mixer.coarse_passes >= 0 && c.mixer.fine_passes >= 0, ErrorKind::config,
            "mixer pass counts must be >= 0");
    require(c.mixer.outputs_per_class >= 1, ErrorKind::config,
            "mixer.outputs_per_class must be >= 1");
    require(c.schedule.steps >= 2, ErrorKind::config, "schedule.steps must be >= 2");
    require(0.0 < c.schedule.beta_start && c.schedule.beta_start < c.schedule.beta_end &&
                c.schedule.beta_end < 1.0,
            ErrorKind::config, "schedule needs 0 < beta_start < beta_end < 1");
    require(c.guidance.w >= 0.0, ErrorKind::config, "guidance.w must be >= 0");
    require(c.denoiser.base_width >= 1 && c.denoiser.levels >= 0, ErrorKind::config,
            "denoiser needs base_width >= 1 and levels >= 0");
    require(c.denoiser.time_embed_dim >= 2 && c.denoiser.time_embed_dim % 2 == 0,
            ErrorKind::config, "denoiser.time_embed_dim must be even and >= 2");
    require(c.denoiser.conditioning == "cross_attention" ||
                c.denoiser.conditioning == "pooled_additive",
            ErrorKind::config, "denoiser.conditioning must be cross_attention or pooled_additive");
    require(c.codec.mode == "identity" || c.codec.mode == "learned", ErrorKind::config,
            "codec.mode must be identity or learned");
    require(c.codec.f >= 1 && (c.codec.f & (c.codec.f - 1)) == 0, ErrorKind::config,
            "codec.f must be a power of two");
    require(c.codec.latent_channels >= 1 && c.codec.width >= 1, ErrorKind::config,
            "codec needs latent_channels >= 1 and width >= 1");
    require(c.codec.train_steps >= 0 && c.codec.batch_size >= 1 && c.codec.lr > 0.0,
            ErrorKind::config, "codec training needs steps >= 0, batch >= 1, lr > 0");
    require(c.pipeline.ratio > 0.0, ErrorKind::config, "pipeline.ratio must be > 0");
    require(c.pipeline.steps >= 0 && c.pipeline.batch_size >= 1 && c.pipeline.lr > 0.0,
            ErrorKind::config, "pipeline training needs steps >= 0, batch >= 1, lr > 0");
    require(c.pipeline.refresh_every >= 1, ErrorKind::config,
            "pipeline.refresh_every must be >= 1");
    require(0.0 <= c.pipeline.p_uncond && c.pipeline.p_uncond < 1.0, ErrorKind::config,
            "pipeline.p_uncond must lie in [0,1)");
    require(c.classifier.strategy == "baseline" || c.classifier.strategy == "combined" ||
                c.classifier.strategy == "rsp" || c.classifier.strategy == "two_phase",
            ErrorKind::config, "classifier.strategy must name a known strategy");
    require(!c.classifier.seeds.empty(), ErrorKind::config, "classifier.seeds must be nonempty");
    require(c.classifier.p > 0.0 && c.classifier.p <= 1.0, ErrorKind::config,
            "classifier.p must lie in (0,1]");
    require(c.classifier.width >= 1 && c.classifier.steps >= 1 && c.classifier.batch_size >= 1 &&
                c.classifier.lr > 0.0,
            ErrorKind::config, "classifier training needs width/steps/batch >= 1, lr > 0");
    require(c.classifier.phase2_steps < c.classifier.steps, ErrorKind::config,
            "classifier.phase2_steps must be < classifier.steps");
    require(c.classifier.phase2_lr > 0.0 && c.classifier.phase2_lr < c.classifier.lr,
            ErrorKind::config, "classifier.phase2_lr must lie in (0, classifier.lr)");
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
    check_keys(j, {"version", "embedder", "mixer", "schedule", "guidance", "denoiser", "codec",
                   "pipeline", "classifier", "paths"},
               "run config");
    if (j.contains("version"))
        require(j.at("version").get<int>() == 1, ErrorKind::config,
                "unsupported run config version");

    RunConfig c;
    if (j.contains("embedder")) {
        const auto& s = j.at("embedder");
        check_keys(s, {"m", "d", "seed"}, "embedder");
        read_field(s, "m", c.embedder.m);
        read_field(s, "d", c.embedder.d);
        read_field(s, "seed", c.embedder.seed);
    }
    if (j.contains("mixer")) {
        const auto& s = j.at("mixer");
        check_keys(s, {"coarse_passes", "fine_passes", "outputs_per_class"}, "mixer");
        read_field(s, "coarse_passes", c.mixer.coarse_passes);
        read_field(s, "fine_passes", c.mixer.fine_passes);
        read_field(s, "outputs_per_class", c.mixer.outputs_per_class);
    }
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        check_keys(s, {"steps", "beta_start", "beta_end"}, "schedule");
        read_field(s, "steps", c.schedule.steps);
        read_field(s, "beta_start", c.schedule.beta_start);
        read_field(s, "beta_end", c.schedule.beta_end);
    }
    if (j.contains("guidance")) {
        const auto& s = j.at("guidance");
        check_keys(s, {"w"}, "guidance");
        read_field(s, "w", c.guidance.w);
    }
    if (j.contains("denoiser")) {
        const auto& s = j.at("denoiser");
        check_keys(s, {"base_width", "levels", "time_embed_dim", "conditioning"}, "denoiser");
        read_field(s, "base_width", c.denoiser.base_width);
        read_field(s, "levels", c.denoiser.levels);
        read_field(s, "time_embed_dim", c.denoiser.time_embed_dim);
        read_field(s, "conditioning", c.denoiser.conditioning);
    }
    if (j.contains("codec")) {
        const auto& s = j.at("codec");
        check_keys(s, {"mode", "f", "latent_channels", "width", "train_steps", "batch_size", "lr"},
                   "codec");
        read_field(s, "mode", c.codec.mode);
        read_field(s, "f", c.codec.f);
        read_field(s, "latent_channels", c.codec.latent_channels);
        read_field(s, "width", c.codec.width);
        read_field(s, "train_steps", c.codec.train_steps);
        read_field(s, "batch_size", c.codec.batch_size);
        read_field(s, "lr", c.codec.lr);
    }
    if (j.contains("pipeline")) {
        const auto& s = j.at("pipeline");
        check_keys(s, {"ratio", "steps", "batch_size", "lr", "refresh_every", "p_uncond"},
                   "pipeline");
        read_field(s, "ratio", c.pipeline.ratio);
        read_field(s, "steps", c.pipeline.steps);
        read_field(s, "batch_size", c.pipeline.batch_size);
        read_field(s, "lr", c.pipeline.lr);
        read_field(s, "refresh_every", c.pipeline.refresh_every);
        read_field(s, "p_uncond", c.pipeline.p_uncond);
    }
    if (j.contains("classifier")) {
        const auto& s = j.at("classifier");
        check_keys(s, {"strategy", "seeds", "p", "width", "steps", "lr", "batch_size",
                       "phase2_steps", "phase2_lr"},
                   "classifier");
        read_field(s, "strategy", c.classifier.strategy);
        read_field(s, "seeds", c.classifier.seeds);
        read_field(s, "p", c.classifier.p);
        read_field(s, "width", c.classifier.width);
        read_field(s, "steps", c.classifier.steps);
        read_field(s, "lr", c.classifier.lr);
        read_field(s, "batch_size", c.classifier.batch_size);
        read_field(s, "phase2_steps", c.classifier.phase2_steps);
        read_field(s, "phase2_lr", c.classifier.phase2_lr);
    }
    if (j.contains("paths")) {
        const auto& s = j.at("paths");
        check_keys(s, {"data_dir", "run_root"}, "paths");
        read_field(s, "data_dir", c.paths.data_dir);
        read_field(s, "run_root", c.paths.run_root);
    }
    validate(c);
    return c;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
    return nlohmann::json{
        {"version", 1},
        {"embedder", {{"m", c.embedder.m}, {"d", c.embedder.d}, {"seed", c.embedder.seed}}},
        {"mixer",
         {{"coarse_passes", c.mixer.coarse_passes},
          {"fine_passes", c.mixer.fine_passes},
          {"outputs_per_class", c.mixer.outputs_per_class}}},
        {"schedule",
         {{"steps", c.schedule.steps},
          {"beta_start", c.schedule.beta_start},
          {"beta_end", c.schedule.beta_end}}},
        {"guidance", {{"w", c.guidance.w}}},
        {"denoiser",
         {{"base_width", c.denoiser.base_width},
          {"levels", c.denoiser.levels},
          {"time_embed_dim", c.denoiser.time_embed_dim},
          {"conditioning", c.denoiser.conditioning}}},
        {"codec",
         {{"mode", c.codec.mode},
          {"f", c.codec.f},
          {"latent_channels", c.codec.latent_channels},
          {"width", c.codec.width},
          {"train_steps", c.codec.train_steps},
          {"batch_size", c.codec.batch_size},
          {"lr", c.codec.lr}}},
        {"pipeline",
         {{"ratio", c.pipeline.ratio},
          {"steps", c.pipeline.steps},
          {"batch_size", c.pipeline.batch_size},
          {"lr", c.pipeline.lr},
          {"refresh_every", c.pipeline.refresh_every},
          {"p_uncond", c.pipeline.p_uncond}}},
        {"classifier",
         {{"strategy", c.classifier.strategy},
          {"seeds", c.classifier.seeds},
          {"p", c.classifier.p},
          {"width", c.classifier.width},
          {"steps", c.classifier.steps},
          {"lr", c.classifier.lr},
          {"batch_size", c.classifier.batch_size},
          {"phase2_steps", c.classifier.phase2_steps},
          {"phase2_lr", c.classifier.phase2_lr}}},
        {"paths", {{"data_dir", c.paths.data_dir}, {"run_root", c.paths.run_root}}}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::storage, "cannot open config: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse, "config is not valid JSON: " + std::string(e.what()));
    }
    return run_config_from_json(j);
}

void save_run_config(const std::filesystem::path& path, const RunConfig& c) {
    std::ofstream out(path);
    require(out.good(), ErrorKind::storage, "cannot write config: " + path.string());
    out << run_config_to_json(c).dump(2) << "\n";
    require(out.good(), ErrorKind::storage, "short write: " + path.string());
}

std::string config_hash(const RunConfig& c) {
    const std::uint64_t h = fnv1a64(run_config_to_json(c).dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string run_dir_name(const RunConfig& c, std::time_t now) {
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
    return std::string(stamp) + "-" + config_hash(c);
}

std::filesystem::path run_root(const RunConfig& c) {
    if (!c.paths.run_root.empty()) return c.paths.run_root;
    if (const char* env = std::getenv("MVCAUG_RUN_DIR"); env && *env) return env;
    return "runs";
}

TokenEmbedder embedder_of(const RunConfig& c) {
    return TokenEmbedder(c.embedder.m, c.embedder.d, c.embedder.seed);
}

MixerConfig mixer_of(const RunConfig& c, std::uint64_t seed) {
    MixerConfig m;
    m.coarse_passes = c.mixer.coarse_passes;
    m.fine_passes = c.mixer.fine_passes;
    m.outputs_per_class = c.mixer.outputs_per_class;
    m.seed = seed;
    return m;
}

NoiseSchedule schedule_of(const RunConfig& c) {
    return make_schedule(c.schedule.steps, c.schedule.beta_start, c.schedule.beta_end);
}

GuidanceConfig guidance_of(const RunConfig& c) {
    GuidanceConfig g;
    g.w = c.guidance.w;
    return g;
}

DenoiserConfig denoiser_of(const RunConfig& c, int latent_channels) {
    DenoiserConfig d;
    d.latent_channels = latent_channels;
    d.base_width = c.denoiser.base_width;
    d.levels = c.denoiser.levels;
    d.time_embed_dim = c.denoiser.time_embed_dim;
    d.text_m = c.embedder.m;
    d.text_d = c.embedder.d;
    d.conditioning_mode = c.denoiser.conditioning == "pooled_additive"
                              ? ConditioningMode::pooled_additive
                              : ConditioningMode::cross_attention;
    return d;
}

CodecConfig codec_of(const RunConfig& c, int image_channels) {
    CodecConfig k;
    if (c.codec.mode == "identity") {
        k.mode = CodecMode::identity;
        k.f = 1;
        k.latent_channels = image_channels;
    } else {
        k.mode = CodecMode::learned;
        k.f = c.codec.f;
        k.latent_channels = c.codec.latent_channels;
    }
    k.image_channels = image_channels;
    k.width = c.codec.width;
    return k;
}

CodecTrainConfig codec_train_of(const RunConfig& c) {
    CodecTrainConfig t;
    t.steps = c.codec.train_steps;
    t.batch_size = c.codec.batch_size;
    t.lr = c.codec.lr;
    return t;
}

FinetuneConfig finetune_of(const RunConfig& c) {
    FinetuneConfig f;
    f.steps = c.pipeline.steps;
    f.batch_size = c.pipeline.batch_size;
    f.lr = c.pipeline.lr;
    f.refresh_every = c.pipeline.refresh_every;
    f.p_uncond = c.pipeline.p_uncond;
    return f;
}

AugmentConfig augment_of(const RunConfig& c, std::uint64_t seed) {
    AugmentConfig a;
    a.ratio = c.pipeline.ratio;
    a.guidance = guidance_of(c);
    a.mixer = mixer_of(c, seed);
    a.seed = seed;
    return a;
}

ClassifierConfig classifier_of(const RunConfig& c, int image_channels, int n_classes) {
    ClassifierConfig k;
    k.image_channels = image_channels;
    k.width = c.classifier.width;
    k.n_classes = n_classes;
    return k;
}

TrainingStrategy strategy_of(const RunConfig& c, const std::string& name) {
    PhaseConfig phase1{c.classifier.steps, c.classifier.lr};
    PhaseConfig phase2{c.classifier.phase2_steps, c.classifier.phase2_lr};
    TrainingStrategy s;
    if (name == "baseline")
        s = TrainingStrategy::baseline(phase1);
    else if (name == "combined")
        s = TrainingStrategy::combined(phase1);
    else if (name == "rsp")
        s = TrainingStrategy::rsp(phase1, c.classifier.p);
    else if (name == "two_phase")
        s = TrainingStrategy::two_phase(phase1, phase2);
    else
        throw Error(ErrorKind::config, "unknown strategy: " + name);
    s.batch_size = c.classifier.batch_size;
    return s;
}

}  // namespace mvc
