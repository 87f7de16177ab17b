#include "mvc/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include "mvc/autodiff.hpp"
#include "mvc/image_io.hpp"

namespace mvc {

namespace {

std::vector<std::size_t> real_indices_of_class(const DatasetManifest& manifest,
                                               const std::string& label) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
        if (manifest.records[i].label == label &&
            manifest.records[i].provenance == Provenance::real)
            out.push_back(i);
    return out;
}

nlohmann::json edits_to_json(const std::vector<MixEdit>& edits) {
    nlohmann::json out = nlohmann::json::array();
    for (const MixEdit& e : edits)
        out.push_back({{"donor", e.donor_index},
                       {"kind", e.kind == MixKind::coarse ? "coarse" : "fine"},
                       {"row", e.row},
                       {"lo", e.lo},
                       {"hi", e.hi}});
    return out;
}

std::vector<MixEdit> edits_from_json(const nlohmann::json& j) {
    require(j.is_array(), ErrorKind::parse, "edit list must be an array");
    std::vector<MixEdit> out;
    for (const auto& e : j) {
        MixEdit edit;
        edit.donor_index = e.at("donor").get<int>();
        const std::string kind = e.at("kind").get<std::string>();
        require(kind == "coarse" || kind == "fine", ErrorKind::parse,
                "unknown edit kind: " + kind);
        edit.kind = kind == "coarse" ? MixKind::coarse : MixKind::fine;
        edit.row = e.at("row").get<int>();
        edit.lo = e.at("lo").get<int>();
        edit.hi = e.at("hi").get<int>();
        out.push_back(edit);
    }
    return out;
}

void check_model_compatibility(const Denoiser& model, const TokenEmbedder& embedder,
                               const Codec& codec) {
    require(model.config.text_m == embedder.m() && model.config.text_d == embedder.d(),
            ErrorKind::config, "denoiser text shape does not match the embedder");
    require(model.config.latent_channels == codec.config.latent_channels, ErrorKind::config,
            "denoiser latent channels do not match the codec");
}

NoisePredictor predictor_of(const Denoiser& model) {
    return [&model](const LatentTensor& z, int t, const EmbeddingMatrix* text,
                    const LatentTensor& image_cond) {
        return predict_noise(model, z, t, text, image_cond);
    };
}

}  // namespace

TrainingPair sample_training_pair(const DatasetManifest& manifest, const std::string& class_label,
                                  RngStream& rng) {
    require(manifest.class_index(class_label) >= 0, ErrorKind::invalid_argument,
            "unknown class: " + class_label);
    const std::vector<std::size_t> idx = real_indices_of_class(manifest, class_label);
    require(!idx.empty(), ErrorKind::invalid_argument,
            "class has no real images: " + class_label);
    const std::size_t n = idx.size();
    const std::size_t i = rng.below(n);
    std::size_t j = i;
    if (n > 1) {
        j = rng.below(n - 1);
        if (j >= i) ++j;
    }
    TrainingPair pair;
    pair.x_index = idx[i];
    pair.x_prime_index = idx[j];
    pair.x = load_record_image(manifest, manifest.records[pair.x_index]);
    pair.x_prime = load_record_image(manifest, manifest.records[pair.x_prime_index]);
    return pair;
}

FinetuneResult finetune_diffusion(const DatasetManifest& manifest, const TokenEmbedder& embedder,
                                  const Codec& codec, const DenoiserConfig& dcfg,
                                  const MixerConfig& mixer, const NoiseSchedule& schedule,
                                  const FinetuneConfig& train, std::uint64_t seed) {
    require(!manifest.records.empty(), ErrorKind::invalid_argument, "manifest has no records");
    require(dcfg.text_m == embedder.m() && dcfg.text_d == embedder.d(), ErrorKind::config,
            "denoiser text shape does not match the embedder");
    require(dcfg.latent_channels == codec.config.latent_channels, ErrorKind::config,
            "denoiser latent channels do not match the codec");
    require(train.steps >= 0 && train.batch_size >= 1, ErrorKind::config,
            "training needs non-negative steps and a positive batch size");
    require(train.lr > 0.0, ErrorKind::invalid_argument, "learning rate must be positive");
    require(train.refresh_every >= 1, ErrorKind::config, "refresh cadence must be >= 1");
    require(train.p_uncond >= 0.0 && train.p_uncond <= 1.0, ErrorKind::config,
            "p_uncond must lie in [0,1]");

    const std::vector<std::string>& classes = manifest.classes;
    require(!classes.empty(), ErrorKind::invalid_argument, "manifest declares no classes");

    // caption pools (real records) and their embeddings
    const auto pools = caption_pools(manifest, Provenance::real);
    std::vector<std::vector<EmbeddingMatrix>> pool_embeddings(classes.size());
    std::vector<std::vector<std::size_t>> class_records(classes.size());
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const auto it = pools.find(classes[c]);
        require(it != pools.end(), ErrorKind::invalid_argument,
                "class has no captions: " + classes[c]);
        pool_embeddings[c] = embed_pool(embedder, it->second);
        class_records[c] = real_indices_of_class(manifest, classes[c]);
    }
    const EmbeddingMatrix null_emb = null_embedding(embedder);

    // latent cache: encode every real image once
    std::map<std::size_t, LatentTensor> latents;
    for (std::size_t c = 0; c < classes.size(); ++c)
        for (std::size_t ri : class_records[c])
            latents.emplace(ri, encode(codec, load_record_image(manifest, manifest.records[ri])));

    FinetuneResult result;
    result.model = make_denoiser(dcfg, seed);
    const std::vector<int> zshape = latents.begin()->second.shape;
    require(zshape[1] % (1 << dcfg.levels) == 0 && zshape[2] % (1 << dcfg.levels) == 0,
            ErrorKind::shape, "latent spatial dims must be divisible by 2^levels");

    std::vector<std::vector<MixedConditioning>> mixed(classes.size());
    auto refresh_pools = [&](int refresh_index) {
        MixerConfig cfg = mixer;
        cfg.seed = RngStream(mixer.seed)
                       .derive("refresh")
                       .derive(static_cast<std::uint64_t>(refresh_index))
                       .seed();
        for (std::size_t c = 0; c < classes.size(); ++c)
            mixed[c] = mix_embeddings(pool_embeddings[c], cfg, null_emb, classes[c]);
    };

    RngStream stream = RngStream(seed).derive("finetune");
    nn::AdamState opt;
    nn::AdamConfig opt_cfg;
    opt_cfg.lr = train.lr;
    for (int step = 0; step < train.steps; ++step) {
        if (step % train.refresh_every == 0) refresh_pools(step / train.refresh_every);
        ad::Tape tape(true);
        const auto leafs = detail::param_leafs(tape, result.model.params, true);
        std::vector<ad::Var<float>> losses;
        for (int b = 0; b < train.batch_size; ++b) {
            const std::size_t c = stream.below(classes.size());
            const std::vector<std::size_t>& recs = class_records[c];
            require(!recs.empty(), ErrorKind::invalid_argument,
                    "class has no real images: " + classes[c]);
            const std::size_t i = stream.below(recs.size());
            std::size_t j = i;
            if (recs.size() > 1) {
                j = stream.below(recs.size() - 1);
                if (j >= i) ++j;
            }
            const LatentTensor& z0 = latents.at(recs[i]);
            const LatentTensor& e_I = latents.at(recs[j]);
            const int t = static_cast<int>(stream.below(static_cast<std::uint64_t>(schedule.T))) + 1;
            const LatentTensor eps = gaussian_latent(zshape, stream);
            const std::size_t pick = stream.below(mixed[c].size());
            const bool drop_text = stream.unit_double() < train.p_uncond;
            const EmbeddingMatrix* e_T = drop_text ? nullptr : &mixed[c][pick].cond;

            const LatentTensor z_t = forward_diffuse(z0, t, eps, schedule);
            auto graph = detail::build_denoiser_graph(tape, dcfg, result.model.params, leafs, z_t,
                                                      t, e_T, e_I);
            losses.push_back(tape.mse_against(graph.out, eps));
        }
        auto loss = tape.scale(tape.add_scalars(losses), 1.0f / train.batch_size);
        require(std::isfinite(loss->val.v[0]), ErrorKind::numeric,
                "training diverged at step " + std::to_string(step));
        tape.backward(loss);
        nn::adam_step(result.model.params, detail::collect_grads(leafs), opt, opt_cfg);
        result.loss_curve.push_back(static_cast<double>(loss->val.v[0]));
    }
    return result;
}

std::vector<GeneratedImage> generate_images(const GenerationRequest& request,
                                            const DatasetManifest& manifest,
                                            const TokenEmbedder& embedder, const Codec& codec,
                                            const Denoiser& model, const NoiseSchedule& schedule) {
    require(request.count >= 1, ErrorKind::invalid_argument, "generation count must be >= 1");
    check_model_compatibility(model, embedder, codec);
    const std::vector<std::size_t> recs = real_indices_of_class(manifest, request.class_label);
    require(!recs.empty(), ErrorKind::invalid_argument,
            "class has no real images: " + request.class_label);

    const auto pools = caption_pools(manifest, Provenance::real);
    const auto pool_it = pools.find(request.class_label);
    require(pool_it != pools.end(), ErrorKind::invalid_argument,
            "class has no captions: " + request.class_label);
    const std::vector<EmbeddingMatrix> pool = embed_pool(embedder, pool_it->second);
    const EmbeddingMatrix null_emb = null_embedding(embedder);

    const RngStream stream = RngStream(request.seed).derive("generate").derive(request.class_label);
    MixerConfig mix_cfg = request.mixer;
    mix_cfg.outputs_per_class = request.count;
    mix_cfg.seed = stream.derive("mix").seed();
    const std::vector<MixedConditioning> conditionings =
        mix_embeddings(pool, mix_cfg, null_emb, request.class_label);

    RngStream conditional_stream = stream.derive("conditional");
    const NoisePredictor predictor = predictor_of(model);

    std::vector<GeneratedImage> out;
    out.reserve(static_cast<std::size_t>(request.count));
    for (int k = 0; k < request.count; ++k) {
        const std::size_t pick = conditional_stream.below(recs.size());
        const DatasetRecord& cond_rec = manifest.records[recs[pick]];
        const LatentTensor e_I = encode(codec, load_record_image(manifest, cond_rec));
        const std::uint64_t sample_seed =
            stream.derive("sample").derive(static_cast<std::uint64_t>(k)).seed();
        const MixedConditioning& mc = conditionings[static_cast<std::size_t>(k)];
        const LatentTensor z0 =
            sample(predictor, schedule, mc, e_I, request.guidance, sample_seed);
        GeneratedImage gen;
        gen.image = decode(codec, z0);
        gen.meta = {{"class", request.class_label},
                    {"conditional_path", cond_rec.path},
                    {"sample_seed", sample_seed},
                    {"guidance_w", request.guidance.w},
                    {"T", schedule.T},
                    {"mixer", {{"P", request.mixer.coarse_passes},
                               {"Q", request.mixer.fine_passes}}},
                    {"base_index", mc.base_index},
                    {"edits", edits_to_json(mc.edits)}};
        out.push_back(std::move(gen));
    }
    return out;
}

ImageTensor regenerate_image(const nlohmann::json& meta, const DatasetManifest& manifest,
                             const TokenEmbedder& embedder, const Codec& codec,
                             const Denoiser& model, const NoiseSchedule& schedule) {
    require(meta.is_object(), ErrorKind::parse, "generator metadata must be an object");
    const std::string label = meta.at("class").get<std::string>();
    require(meta.at("T").get<int>() == schedule.T, ErrorKind::config,
            "schedule length does not match the recorded T");
    check_model_compatibility(model, embedder, codec);

    const auto pools = caption_pools(manifest, Provenance::real);
    const auto pool_it = pools.find(label);
    require(pool_it != pools.end(), ErrorKind::invalid_argument, "class has no captions: " + label);
    const std::vector<EmbeddingMatrix> pool = embed_pool(embedder, pool_it->second);

    MixedConditioning mc;
    mc.class_label = label;
    mc.base_index = meta.at("base_index").get<int>();
    mc.edits = edits_from_json(meta.at("edits"));
    mc.cond = replay_mix(pool, mc.base_index, mc.edits);
    mc.null_cond = null_embedding(embedder);

    const std::string cond_path = meta.at("conditional_path").get<std::string>();
    const DatasetRecord* cond_rec = nullptr;
    for (const DatasetRecord& r : manifest.records)
        if (r.path == cond_path) {
            cond_rec = &r;
            break;
        }
    require(cond_rec != nullptr, ErrorKind::invalid_argument,
            "conditional image not in manifest: " + cond_path);
    const LatentTensor e_I = encode(codec, load_record_image(manifest, *cond_rec));

    GuidanceConfig guidance;
    guidance.w = meta.at("guidance_w").get<double>();
    const std::uint64_t sample_seed = meta.at("sample_seed").get<std::uint64_t>();
    const LatentTensor z0 =
        sample(predictor_of(model), schedule, mc, e_I, guidance, sample_seed);
    return decode(codec, z0);
}

DatasetManifest build_augmented_dataset(const DatasetManifest& real, const AugmentConfig& cfg,
                                        const TokenEmbedder& embedder, const Codec& codec,
                                        const Denoiser& model, const NoiseSchedule& schedule,
                                        const std::filesystem::path& out_dir) {
    require(cfg.ratio > 0.0, ErrorKind::invalid_argument, "synthetic ratio must be positive");
    check_model_compatibility(model, embedder, codec);

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    require(!ec, ErrorKind::storage, "cannot create " + out_dir.string());

    DatasetManifest merged;
    merged.base_dir = out_dir;
    merged.classes = real.classes;
    for (const DatasetRecord& r : real.records) {
        DatasetRecord copy = r;
        const std::filesystem::path abs = std::filesystem::absolute(real.resolve(r));
        copy.path = std::filesystem::proximate(abs, std::filesystem::absolute(out_dir))
                        .generic_string();
        merged.records.push_back(std::move(copy));
    }

    for (const std::string& label : real.classes) {
        const std::size_t n_real = real_indices_of_class(real, label).size();
        require(n_real >= 1, ErrorKind::invalid_argument, "class has no real images: " + label);
        const int n_y =
            static_cast<int>(std::ceil(cfg.ratio * static_cast<double>(n_real)));
        GenerationRequest request;
        request.class_label = label;
        request.count = n_y;
        request.guidance = cfg.guidance;
        request.mixer = cfg.mixer;
        request.seed = cfg.seed;
        const std::vector<GeneratedImage> generated =
            generate_images(request, real, embedder, codec, model, schedule);

        const std::filesystem::path class_dir = out_dir / "synthetic" / label;
        std::filesystem::create_directories(class_dir, ec);
        require(!ec, ErrorKind::storage, "cannot create " + class_dir.string());
        for (int k = 0; k < n_y; ++k) {
            char name[32];
            std::snprintf(name, sizeof(name), "%04d.png", k);
            const std::filesystem::path rel = std::filesystem::path("synthetic") / label / name;
            write_png_gray8(out_dir / rel, tensor_to_image(generated[static_cast<std::size_t>(k)].image));
            DatasetRecord rec;
            rec.path = rel.generic_string();
            rec.label = label;
            rec.caption = "";
            rec.provenance = Provenance::synthetic;
            rec.meta = generated[static_cast<std::size_t>(k)].meta;
            merged.records.push_back(std::move(rec));
        }
    }
    write_manifest(out_dir / "manifest.json", merged);
    return merged;
}

}  // namespace mvc
