// Command-line surface: every subcommand wraps one library operation, echoes
// the exact config + seed it runs with, and keeps its artifacts under a
// per-run directory so any run can be replayed bit-exactly.

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvc/classifier.hpp"
#include "mvc/codec.hpp"
#include "mvc/dataset.hpp"
#include "mvc/denoiser.hpp"
#include "mvc/image_io.hpp"
#include "mvc/pipeline.hpp"
#include "mvc/runconfig.hpp"
#include "mvc/shapes.hpp"

namespace fs = std::filesystem;
using namespace mvc;

namespace {

int exit_code_of(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return 2;
        case ErrorKind::config: return 3;
        case ErrorKind::shape: return 4;
        case ErrorKind::numeric: return 5;
        case ErrorKind::storage: return 6;
        case ErrorKind::parse: return 7;
        case ErrorKind::leakage: return 8;
    }
    return 1;
}

struct Common {
    std::string config_path;
    std::string run_dir_override;
    std::uint64_t seed = 1;
};

void add_common(CLI::App* sub, Common& common) {
    sub->add_option("--config", common.config_path, "run config JSON (defaults when omitted)");
    sub->add_option("--run-dir", common.run_dir_override,
                    "run directory root (overrides config and MVCAUG_RUN_DIR)");
    sub->add_option("--seed", common.seed, "root seed for all randomness");
}

struct Run {
    RunConfig cfg;
    fs::path dir;
    std::uint64_t seed = 0;
};

Run prepare_run(const Common& common, const std::string& command) {
    Run run;
    run.cfg = common.config_path.empty() ? RunConfig{} : load_run_config(common.config_path);
    if (!common.run_dir_override.empty()) run.cfg.paths.run_root = common.run_dir_override;
    run.seed = common.seed;

    const fs::path root = run_root(run.cfg);
    fs::path dir = root / run_dir_name(run.cfg, std::time(nullptr));
    for (int k = 2; fs::exists(dir); ++k)
        dir = root / (run_dir_name(run.cfg, std::time(nullptr)) + "-" + std::to_string(k));
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::storage, "cannot create run directory: " + dir.string());
    run.dir = dir;
    save_run_config(dir / "config.json", run.cfg);

    std::printf("command: %s\n", command.c_str());
    std::printf("config: %s\n", run_config_to_json(run.cfg).dump().c_str());
    std::printf("seed: %llu\n", static_cast<unsigned long long>(run.seed));
    std::printf("run-dir: %s\n", dir.string().c_str());
    return run;
}

std::string default_out(const Run& run, const std::string& name, const std::string& explicit_out) {
    return explicit_out.empty() ? (run.dir / name).string() : explicit_out;
}

Codec codec_for(const Run& run, const std::string& codec_path, int image_channels) {
    if (!codec_path.empty()) return load_codec(codec_path);
    require(run.cfg.codec.mode == "identity", ErrorKind::config,
            "learned codec mode needs --codec with a trained checkpoint");
    return make_codec(codec_of(run.cfg, image_channels), run.seed);
}

std::vector<ImageTensor> real_images_of(const DatasetManifest& manifest) {
    std::vector<ImageTensor> images;
    for (const DatasetRecord& r : manifest.records)
        if (r.provenance == Provenance::real) images.push_back(load_record_image(manifest, r));
    require(!images.empty(), ErrorKind::invalid_argument, "manifest has no real records");
    return images;
}

int cmd_gen_shapes(const Common& common, const std::string& out, const std::string& classes_csv,
                   int count, int size) {
    Run run = prepare_run(common, "gen-shapes");
    std::vector<ShapeSpec> specs;
    std::string label;
    for (std::stringstream ss(classes_csv); std::getline(ss, label, ',');)
        if (!label.empty()) specs.push_back(ShapeSpec{label, count});
    require(!specs.empty(), ErrorKind::invalid_argument, "no classes given");
    const fs::path dir = default_out(run, "shapes", out);
    const DatasetManifest manifest = make_shapes_dataset(dir, specs, size, run.seed);
    std::printf("wrote %zu records to %s\n", manifest.records.size(), dir.string().c_str());
    return 0;
}

int cmd_train_codec(const Common& common, const std::string& data, const std::string& out) {
    Run run = prepare_run(common, "train-codec");
    const DatasetManifest manifest = load_manifest(data);
    const std::vector<int> shape = validate_manifest(manifest);
    const CodecConfig cfg = codec_of(run.cfg, shape[0]);
    const std::string path = default_out(run, "codec.ckpt", out);
    if (cfg.mode == CodecMode::identity) {
        save_codec(path, make_codec(cfg, run.seed));
        std::printf("identity codec written to %s\n", path.c_str());
        return 0;
    }
    const CodecTrainResult result =
        train_codec(real_images_of(manifest), cfg, codec_train_of(run.cfg), run.seed);
    save_codec(path, result.codec);
    std::printf("trained codec written to %s (reconstruction mse %.6f)\n", path.c_str(),
                result.final_error);
    return 0;
}

int cmd_train_diffusion(const Common& common, const std::string& data,
                        const std::string& codec_path, const std::string& out) {
    Run run = prepare_run(common, "train-diffusion");
    const DatasetManifest manifest = load_manifest(data);
    const std::vector<int> shape = validate_manifest(manifest);
    const TokenEmbedder embedder = embedder_of(run.cfg);
    const Codec codec = codec_for(run, codec_path, shape[0]);
    const std::vector<int> latent = latent_shape_of(codec.config, shape);
    const DenoiserConfig dcfg = denoiser_of(run.cfg, latent[0]);
    const FinetuneResult result = finetune_diffusion(
        manifest, embedder, codec, dcfg, mixer_of(run.cfg, run.seed), schedule_of(run.cfg),
        finetune_of(run.cfg), run.seed);
    const std::string path = default_out(run, "denoiser.ckpt", out);
    save_denoiser(path, result.model);
    std::printf("trained denoiser written to %s (loss %.4f -> %.4f over %zu steps)\n",
                path.c_str(), result.loss_curve.empty() ? 0.0 : result.loss_curve.front(),
                result.loss_curve.empty() ? 0.0 : result.loss_curve.back(),
                result.loss_curve.size());
    return 0;
}

int cmd_mix(const Common& common, const std::string& data, const std::string& class_label,
            const std::string& out) {
    Run run = prepare_run(common, "mix");
    const DatasetManifest manifest = load_manifest(data);
    const TokenEmbedder embedder = embedder_of(run.cfg);
    const auto pools = caption_pools(manifest, Provenance::real);
    const auto it = pools.find(class_label);
    require(it != pools.end(), ErrorKind::invalid_argument,
            "class not in the manifest: " + class_label);
    const std::vector<EmbeddingMatrix> pool = embed_pool(embedder, it->second);
    const std::vector<MixedConditioning> mixed = mix_embeddings(
        pool, mixer_of(run.cfg, run.seed), null_embedding(embedder), class_label);
    std::vector<std::pair<std::string, EmbeddingMatrix>> entries;
    for (std::size_t k = 0; k < mixed.size(); ++k)
        entries.emplace_back(class_label + "/" + std::to_string(k), mixed[k].cond);
    const std::string path = default_out(run, "mixed-" + class_label + ".emb", out);
    write_embedding_archive(path, entries);
    std::printf("wrote archive of %zu conditionings to %s\n", entries.size(), path.c_str());
    return 0;
}

int cmd_generate(const Common& common, const std::string& data, const std::string& codec_path,
                 const std::string& model_path, const std::string& class_label, int count,
                 const std::string& out) {
    Run run = prepare_run(common, "generate");
    const DatasetManifest manifest = load_manifest(data);
    const std::vector<int> shape = validate_manifest(manifest);
    const TokenEmbedder embedder = embedder_of(run.cfg);
    const Codec codec = codec_for(run, codec_path, shape[0]);
    const Denoiser model = load_denoiser(model_path);
    GenerationRequest request;
    request.class_label = class_label;
    request.count = count > 0 ? count : run.cfg.mixer.outputs_per_class;
    request.guidance = guidance_of(run.cfg);
    request.mixer = mixer_of(run.cfg, run.seed);
    request.seed = run.seed;
    const NoiseSchedule schedule = schedule_of(run.cfg);
    const std::vector<GeneratedImage> images =
        generate_images(request, manifest, embedder, codec, model, schedule);

    const fs::path dir = default_out(run, "generated", out);
    std::error_code ec;
    fs::create_directories(dir / class_label, ec);
    require(!ec, ErrorKind::storage, "cannot create output directory: " + dir.string());
    nlohmann::json meta = nlohmann::json::array();
    for (std::size_t k = 0; k < images.size(); ++k) {
        char name[64];
        std::snprintf(name, sizeof(name), "%04zu.png", k);
        const fs::path path = dir / class_label / name;
        save_gray_image(path, tensor_to_image(images[k].image));
        meta.push_back({{"path", (fs::path(class_label) / name).generic_string()},
                        {"meta", images[k].meta}});
    }
    std::ofstream meta_out(dir / "meta.json");
    require(meta_out.good(), ErrorKind::storage, "cannot write meta.json");
    meta_out << meta.dump(2) << "\n";
    std::printf("wrote %zu images to %s\n", images.size(), dir.string().c_str());
    return 0;
}

int cmd_augment(const Common& common, const std::string& data, const std::string& codec_path,
                const std::string& model_path, const std::string& out) {
    Run run = prepare_run(common, "augment");
    const DatasetManifest manifest = load_manifest(data);
    const std::vector<int> shape = validate_manifest(manifest);
    const TokenEmbedder embedder = embedder_of(run.cfg);
    const Codec codec = codec_for(run, codec_path, shape[0]);
    const Denoiser model = load_denoiser(model_path);
    const fs::path dir = default_out(run, "augmented", out);
    const DatasetManifest merged =
        build_augmented_dataset(manifest, augment_of(run.cfg, run.seed), embedder, codec, model,
                                schedule_of(run.cfg), dir);
    std::printf("wrote %zu records (real + synthetic) to %s\n", merged.records.size(),
                (dir / "manifest.json").string().c_str());
    return 0;
}

int cmd_train_classifier(const Common& common, const std::string& train_path,
                         const std::string& out) {
    Run run = prepare_run(common, "train-classifier");
    const DatasetManifest manifest = load_manifest(train_path);
    const std::vector<int> shape = validate_manifest(manifest);
    const TrainingStrategy strategy = strategy_of(run.cfg, run.cfg.classifier.strategy);
    const ClassifierConfig cfg =
        classifier_of(run.cfg, shape[0], static_cast<int>(manifest.classes.size()));
    const ClassifierTrainResult result = train_classifier(manifest, strategy, cfg, run.seed);
    const std::string path = default_out(run, "classifier.ckpt", out);
    save_classifier(path, result.model);
    std::printf("trained %s classifier written to %s (final loss %.4f)\n",
                run.cfg.classifier.strategy.c_str(), path.c_str(),
                result.loss_curve.empty() ? 0.0 : result.loss_curve.back());
    if (result.synthetic_candidates > 0)
        std::printf("rsp admission: %lld of %lld candidates\n", result.synthetic_admitted,
                    result.synthetic_candidates);
    return 0;
}

int cmd_compare(const Common& common, const std::string& train_path, const std::string& test_path,
                const std::string& out) {
    Run run = prepare_run(common, "compare");
    const DatasetManifest train = load_manifest(train_path);
    const DatasetManifest test = load_manifest(test_path);
    const std::vector<int> shape = validate_manifest(train);
    const ClassifierConfig cfg =
        classifier_of(run.cfg, shape[0], static_cast<int>(train.classes.size()));
    const std::vector<std::pair<std::string, TrainingStrategy>> strategies = {
        {"baseline", strategy_of(run.cfg, "baseline")},
        {"combined", strategy_of(run.cfg, "combined")},
        {"rsp", strategy_of(run.cfg, "rsp")},
        {"two_phase", strategy_of(run.cfg, "two_phase")},
    };
    const CompareReport report =
        compare_strategies(train, test, strategies, run.cfg.classifier.seeds, cfg);

    const std::string path = default_out(run, "compare.json", out);
    std::ofstream json_out(path);
    require(json_out.good(), ErrorKind::storage, "cannot write report: " + path);
    json_out << report.to_json().dump(2) << "\n";
    const std::string text = report.to_text();
    std::ofstream text_out(fs::path(path).replace_extension(".txt"));
    text_out << text;
    std::fputs(text.c_str(), stdout);
    std::printf("report written to %s\n", path.c_str());
    return 0;
}

int cmd_render_grid(const Common& common, const std::string& data, int per_class,
                    const std::string& out) {
    Run run = prepare_run(common, "render-grid");
    const DatasetManifest manifest = load_manifest(data);
    require(per_class >= 1, ErrorKind::invalid_argument, "--per-class must be >= 1");

    // One row per class: first column a real image, remaining columns
    // synthetic. Missing cells stay blank.
    std::vector<std::vector<GrayImage>> rows;
    int w = 0, h = 0;
    for (const std::string& label : manifest.classes) {
        std::vector<GrayImage> row;
        for (const std::size_t i : manifest.indices_of(label)) {
            if (manifest.records[i].provenance != Provenance::real) continue;
            row.push_back(load_gray_image(manifest.resolve(manifest.records[i])));
            break;
        }
        require(!row.empty(), ErrorKind::invalid_argument, "class has no real image: " + label);
        for (const std::size_t i : manifest.indices_of(label)) {
            if (static_cast<int>(row.size()) >= per_class) break;
            if (manifest.records[i].provenance == Provenance::real) continue;
            row.push_back(load_gray_image(manifest.resolve(manifest.records[i])));
        }
        for (const GrayImage& img : row) {
            require((w == 0 || img.width == w) && (h == 0 || img.height == h), ErrorKind::shape,
                    "grid images must share one size");
            w = img.width;
            h = img.height;
        }
        rows.push_back(std::move(row));
    }

    const int sep = 2;
    GrayImage grid;
    grid.width = per_class * w + (per_class - 1) * sep;
    grid.height = static_cast<int>(rows.size()) * h + (static_cast<int>(rows.size()) - 1) * sep;
    grid.pixels.assign(static_cast<std::size_t>(grid.width) * grid.height, 255);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            const GrayImage& img = rows[r][c];
            const int y0 = static_cast<int>(r) * (h + sep);
            const int x0 = static_cast<int>(c) * (w + sep);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    grid.pixels[static_cast<std::size_t>(y0 + y) * grid.width + x0 + x] =
                        img.pixels[static_cast<std::size_t>(y) * w + x];
        }
    const std::string path = default_out(run, "grid.png", out);
    save_gray_image(path, grid);
    std::printf("wrote %zux%d grid to %s\n", rows.size(), per_class, path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent-diffusion dataset augmentation toolkit"};
    app.require_subcommand(1);

    Common common;
    std::string data, test_path, codec_path, model_path, out, classes_csv, class_label;
    int count = 20, size = 32, per_class = 4, gen_count = 0;

    auto* gen_shapes = app.add_subcommand("gen-shapes", "render a labeled shapes dataset");
    add_common(gen_shapes, common);
    gen_shapes->add_option("--out", out, "dataset directory");
    gen_shapes->add_option("--classes", classes_csv, "comma-separated labels")
        ->default_val("circle,square,cross");
    gen_shapes->add_option("--count", count, "images per class")->default_val(20);
    gen_shapes->add_option("--size", size, "image side in pixels, >= 16")->default_val(32);

    auto* train_codec_cmd = app.add_subcommand("train-codec", "train the image-latent codec");
    add_common(train_codec_cmd, common);
    train_codec_cmd->add_option("--data", data, "training manifest")->required();
    train_codec_cmd->add_option("--out", out, "checkpoint path");

    auto* train_diff = app.add_subcommand("train-diffusion", "finetune the latent denoiser");
    add_common(train_diff, common);
    train_diff->add_option("--data", data, "training manifest")->required();
    train_diff->add_option("--codec", codec_path, "codec checkpoint (identity when omitted)");
    train_diff->add_option("--out", out, "checkpoint path");

    auto* mix = app.add_subcommand("mix", "mix caption embeddings for one class");
    add_common(mix, common);
    mix->add_option("--data", data, "manifest supplying the caption pool")->required();
    mix->add_option("--class", class_label, "class label")->required();
    mix->add_option("--out", out, "embedding archive path");

    auto* generate = app.add_subcommand("generate", "sample images for one class");
    add_common(generate, common);
    generate->add_option("--data", data, "manifest supplying captions and conditioning images")
        ->required();
    generate->add_option("--codec", codec_path, "codec checkpoint (identity when omitted)");
    generate->add_option("--model", model_path, "denoiser checkpoint")->required();
    generate->add_option("--class", class_label, "class label")->required();
    generate->add_option("--count", gen_count, "images to sample (default: mixer outputs)");
    generate->add_option("--out", out, "output directory");

    auto* augment = app.add_subcommand("augment", "build the merged real+synthetic dataset");
    add_common(augment, common);
    augment->add_option("--data", data, "real-data manifest")->required();
    augment->add_option("--codec", codec_path, "codec checkpoint (identity when omitted)");
    augment->add_option("--model", model_path, "denoiser checkpoint")->required();
    augment->add_option("--out", out, "output directory");

    auto* train_cls = app.add_subcommand("train-classifier", "train one classifier");
    add_common(train_cls, common);
    train_cls->add_option("--train", data, "training manifest")->required();
    train_cls->add_option("--out", out, "checkpoint path");

    auto* compare = app.add_subcommand("compare", "run every training strategy and report");
    add_common(compare, common);
    compare->add_option("--train", data, "training manifest")->required();
    compare->add_option("--test", test_path, "held-out test manifest")->required();
    compare->add_option("--out", out, "JSON report path");

    auto* render = app.add_subcommand("render-grid", "compose a real-vs-synthetic image grid");
    add_common(render, common);
    render->add_option("--data", data, "manifest to draw from")->required();
    render->add_option("--per-class", per_class, "columns per row")->default_val(4);
    render->add_option("--out", out, "grid PNG path");

    try {
        app.parse(argc, argv);
        if (gen_shapes->parsed()) return cmd_gen_shapes(common, out, classes_csv, count, size);
        if (train_codec_cmd->parsed()) return cmd_train_codec(common, data, out);
        if (train_diff->parsed()) return cmd_train_diffusion(common, data, codec_path, out);
        if (mix->parsed()) return cmd_mix(common, data, class_label, out);
        if (generate->parsed())
            return cmd_generate(common, data, codec_path, model_path, class_label, gen_count, out);
        if (augment->parsed()) return cmd_augment(common, data, codec_path, model_path, out);
        if (train_cls->parsed()) return cmd_train_classifier(common, data, out);
        if (compare->parsed()) return cmd_compare(common, data, test_path, out);
        if (render->parsed()) return cmd_render_grid(common, data, per_class, out);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_of(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
