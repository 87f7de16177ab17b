#include "mvc/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "mvc/autodiff.hpp"

namespace mvc {

namespace {

void validate_config(const ClassifierConfig& cfg) {
    require(cfg.image_channels >= 1 && cfg.width >= 1 && cfg.n_classes >= 2, ErrorKind::config,
            "classifier needs positive channels/width and at least 2 classes");
}

ad::Var<float> classifier_graph(ad::Tape& tape, const nn::ParamStore& registry,
                                const std::vector<ad::Var<float>>& leafs, const Tensor& image) {
    auto P = [&](const std::string& name) -> const ad::Var<float>& {
        const int i = registry.index_of(name);
        require(i >= 0, ErrorKind::invalid_argument, "unknown classifier parameter: " + name);
        return leafs[static_cast<std::size_t>(i)];
    };
    auto h = tape.silu(tape.conv2d(tape.constant(image), P("conv1.w"), P("conv1.b"), 2, 1));
    h = tape.silu(tape.conv2d(h, P("conv2.w"), P("conv2.b"), 2, 1));
    return tape.linear(tape.mean_spatial(h), P("head.w"), P("head.b"));
}

std::vector<ad::Var<float>> classifier_leafs(ad::Tape& tape, const nn::ParamStore& params,
                                             bool needs_grad) {
    std::vector<ad::Var<float>> leafs;
    leafs.reserve(static_cast<std::size_t>(params.count()));
    for (int i = 0; i < params.count(); ++i) leafs.push_back(tape.leaf(params.at(i), needs_grad));
    return leafs;
}

struct LoadedDataset {
    std::vector<ImageTensor> images;  // aligned with manifest.records
    std::vector<int> labels;
};

LoadedDataset load_all(const DatasetManifest& manifest) {
    LoadedDataset data;
    data.images.reserve(manifest.records.size());
    data.labels.reserve(manifest.records.size());
    for (const DatasetRecord& r : manifest.records) {
        const int label = manifest.class_index(r.label);
        require(label >= 0, ErrorKind::parse, "record label not in class list: " + r.label);
        data.images.push_back(load_record_image(manifest, r));
        data.labels.push_back(label);
    }
    return data;
}

void run_phase(Classifier& model, const LoadedDataset& data,
               const std::vector<std::size_t>& real_idx,
               const std::vector<std::size_t>& synth_idx, const TrainingStrategy& strategy,
               StrategyKind composition, const PhaseConfig& phase, RngStream& stream,
               ClassifierTrainResult& result) {
    require(phase.lr > 0.0, ErrorKind::invalid_argument, "learning rate must be positive");
    std::vector<std::size_t> all_idx(data.images.size());
    for (std::size_t i = 0; i < all_idx.size(); ++i) all_idx[i] = i;

    nn::AdamState opt;
    nn::AdamConfig opt_cfg;
    opt_cfg.lr = phase.lr;
    for (int step = 0; step < phase.steps; ++step) {
        std::vector<std::size_t> batch;
        if (composition == StrategyKind::baseline) {
            for (int b = 0; b < strategy.batch_size; ++b)
                batch.push_back(real_idx[stream.below(real_idx.size())]);
        } else if (composition == StrategyKind::combined) {
            for (int b = 0; b < strategy.batch_size; ++b)
                batch.push_back(all_idx[stream.below(all_idx.size())]);
        } else {  // rsp
            const RspBatch rsp =
                rsp_compose_batch(real_idx, synth_idx, strategy.batch_size, strategy.p, stream);
            batch = rsp.samples;
            result.synthetic_candidates += rsp.synthetic_candidates;
            result.synthetic_admitted += rsp.synthetic_admitted;
        }

        ad::Tape tape(true);
        const auto leafs = classifier_leafs(tape, model.params, true);
        std::vector<ad::Var<float>> losses;
        for (const std::size_t idx : batch) {
            auto logits = classifier_graph(tape, model.params, leafs, data.images[idx]);
            losses.push_back(tape.cross_entropy_logits(logits, data.labels[idx]));
        }
        auto loss = tape.scale(tape.add_scalars(losses),
                               1.0f / static_cast<float>(losses.size()));
        require(std::isfinite(loss->val.v[0]), ErrorKind::numeric,
                "classifier training diverged at step " + std::to_string(step));
        tape.backward(loss);
        std::vector<Tensor> grads;
        grads.reserve(leafs.size());
        for (const auto& leaf : leafs)
            grads.push_back(leaf->grad.v.empty() ? Tensor(leaf->val.shape) : leaf->grad);
        nn::adam_step(model.params, grads, opt, opt_cfg);
        result.loss_curve.push_back(static_cast<double>(loss->val.v[0]));
    }
}

}  // namespace

nn::ParamStore register_classifier_params(const ClassifierConfig& cfg) {
    validate_config(cfg);
    nn::ParamStore ps;
    ps.add("conv1.w", {cfg.width, cfg.image_channels, 3, 3});
    ps.add("conv1.b", {cfg.width});
    ps.add("conv2.w", {2 * cfg.width, cfg.width, 3, 3});
    ps.add("conv2.b", {2 * cfg.width});
    ps.add("head.w", {cfg.n_classes, 2 * cfg.width});
    ps.add("head.b", {cfg.n_classes});
    return ps;
}

Classifier make_classifier(const ClassifierConfig& cfg, std::uint64_t seed) {
    Classifier model{cfg, register_classifier_params(cfg)};
    const RngStream root = RngStream(seed).derive("classifier-init");
    for (int i = 0; i < model.params.count(); ++i) {
        const Tensor& t = model.params.at(i);
        int fan_in;
        if (t.rank() == 4)
            fan_in = t.shape[1] * t.shape[2] * t.shape[3];
        else if (t.rank() == 2)
            fan_in = t.shape[1];
        else {
            const std::string& name = model.params.name_of(i);
            const int wi = model.params.index_of(name.substr(0, name.size() - 2) + ".w");
            require(wi >= 0, ErrorKind::config, "bias without matching weight: " + name);
            const Tensor& wt = model.params.at(wi);
            fan_in = wt.rank() == 4 ? wt.shape[1] * wt.shape[2] * wt.shape[3] : wt.shape[1];
        }
        nn::fan_in_uniform_init(model.params, i, fan_in, root);
    }
    return model;
}

std::vector<float> classifier_logits(const Classifier& model, const ImageTensor& image) {
    require(image.rank() == 3 && image.c() == model.config.image_channels, ErrorKind::shape,
            "image shape does not match the classifier");
    ad::Tape tape(false);
    const auto leafs = classifier_leafs(tape, model.params, false);
    auto logits = classifier_graph(tape, model.params, leafs, image);
    require(logits->val.all_finite(), ErrorKind::numeric, "classifier produced non-finite logits");
    return logits->val.v;
}

int classify(const Classifier& model, const ImageTensor& image) {
    const std::vector<float> logits = classifier_logits(model, image);
    return static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
}

void save_classifier(const std::string& path, const Classifier& model) {
    const nlohmann::json cfg = {{"image_channels", model.config.image_channels},
                                {"width", model.config.width},
                                {"n_classes", model.config.n_classes}};
    nn::save_params(path, "classifier", cfg, model.params);
}

Classifier load_classifier(const std::string& path) {
    nn::LoadedParams loaded = nn::load_params(path, "classifier");
    Classifier model;
    model.config.image_channels = loaded.config.value("image_channels", 1);
    model.config.width = loaded.config.value("width", 16);
    model.config.n_classes = loaded.config.value("n_classes", 0);
    validate_config(model.config);
    const nn::ParamStore expected = register_classifier_params(model.config);
    require(loaded.params.count() == expected.count(), ErrorKind::parse,
            "classifier checkpoint tensor count mismatch: " + path);
    for (int i = 0; i < expected.count(); ++i)
        require(loaded.params.name_of(i) == expected.name_of(i) &&
                    loaded.params.at(i).shape == expected.at(i).shape,
                ErrorKind::parse,
                "classifier checkpoint tensor mismatch: " + loaded.params.name_of(i));
    model.params = std::move(loaded.params);
    return model;
}

const char* to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::baseline: return "baseline";
        case StrategyKind::combined: return "combined";
        case StrategyKind::rsp: return "rsp";
        case StrategyKind::two_phase: return "two_phase";
    }
    return "unknown";
}

TrainingStrategy TrainingStrategy::baseline(PhaseConfig phase) {
    TrainingStrategy s;
    s.kind = StrategyKind::baseline;
    s.phase1 = phase;
    return s;
}

TrainingStrategy TrainingStrategy::combined(PhaseConfig phase) {
    TrainingStrategy s;
    s.kind = StrategyKind::combined;
    s.phase1 = phase;
    return s;
}

TrainingStrategy TrainingStrategy::rsp(PhaseConfig phase, double p) {
    require(p > 0.0 && p <= 1.0, ErrorKind::config, "RSP probability must lie in (0,1]");
    TrainingStrategy s;
    s.kind = StrategyKind::rsp;
    s.p = p;
    s.phase1 = phase;
    return s;
}

TrainingStrategy TrainingStrategy::two_phase(PhaseConfig phase1, PhaseConfig phase2) {
    require(phase2.lr < phase1.lr, ErrorKind::config,
            "two-phase requires phase2.lr < phase1.lr");
    require(phase2.steps < phase1.steps, ErrorKind::config,
            "two-phase requires phase2.steps < phase1.steps");
    TrainingStrategy s;
    s.kind = StrategyKind::two_phase;
    s.phase1 = phase1;
    s.phase2 = phase2;
    return s;
}

RspBatch rsp_compose_batch(const std::vector<std::size_t>& real_idx,
                           const std::vector<std::size_t>& synth_idx, int batch_size, double p,
                           RngStream& rng) {
    require(!real_idx.empty() && !synth_idx.empty(), ErrorKind::invalid_argument,
            "RSP needs both real and synthetic records");
    require(batch_size >= 1, ErrorKind::invalid_argument, "batch size must be >= 1");
    require(p > 0.0 && p <= 1.0, ErrorKind::config, "RSP probability must lie in (0,1]");
    RspBatch batch;
    for (int b = 0; b < batch_size; ++b)
        batch.samples.push_back(real_idx[rng.below(real_idx.size())]);
    for (int b = 0; b < batch_size; ++b) {
        const std::size_t candidate = synth_idx[rng.below(synth_idx.size())];
        ++batch.synthetic_candidates;
        if (rng.unit_double() < p) {
            batch.samples.push_back(candidate);
            ++batch.synthetic_admitted;
        }
    }
    return batch;
}

ClassifierTrainResult train_classifier(const DatasetManifest& manifest,
                                       const TrainingStrategy& strategy,
                                       const ClassifierConfig& cfg, std::uint64_t seed) {
    validate_config(cfg);
    require(cfg.n_classes == static_cast<int>(manifest.classes.size()), ErrorKind::config,
            "classifier class count does not match the manifest");
    require(strategy.batch_size >= 1, ErrorKind::config, "batch size must be >= 1");
    if (strategy.kind == StrategyKind::two_phase) {
        require(strategy.phase2.lr < strategy.phase1.lr, ErrorKind::config,
                "two-phase requires phase2.lr < phase1.lr");
        require(strategy.phase2.steps < strategy.phase1.steps, ErrorKind::config,
                "two-phase requires phase2.steps < phase1.steps");
    }

    const LoadedDataset data = load_all(manifest);
    std::vector<std::size_t> real_idx, synth_idx;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        if (manifest.records[i].provenance == Provenance::real)
            real_idx.push_back(i);
        else
            synth_idx.push_back(i);
    }
    require(!real_idx.empty(), ErrorKind::invalid_argument, "manifest has no real records");
    if (strategy.kind != StrategyKind::baseline)
        require(!synth_idx.empty(), ErrorKind::config,
                "strategy needs synthetic records in the manifest");

    ClassifierTrainResult result;
    result.model = make_classifier(cfg, seed);
    RngStream stream = RngStream(seed).derive("classifier-train");

    switch (strategy.kind) {
        case StrategyKind::baseline:
            run_phase(result.model, data, real_idx, synth_idx, strategy, StrategyKind::baseline,
                      strategy.phase1, stream, result);
            break;
        case StrategyKind::combined:
            run_phase(result.model, data, real_idx, synth_idx, strategy, StrategyKind::combined,
                      strategy.phase1, stream, result);
            break;
        case StrategyKind::rsp:
            run_phase(result.model, data, real_idx, synth_idx, strategy, StrategyKind::rsp,
                      strategy.phase1, stream, result);
            break;
        case StrategyKind::two_phase:
            run_phase(result.model, data, real_idx, synth_idx, strategy, StrategyKind::combined,
                      strategy.phase1, stream, result);
            run_phase(result.model, data, real_idx, synth_idx, strategy, StrategyKind::baseline,
                      strategy.phase2, stream, result);
            break;
    }
    return result;
}

EvalReport evaluate(const Classifier& model, const DatasetManifest& test,
                    const DatasetManifest* train_for_leakage) {
    require(!test.records.empty(), ErrorKind::invalid_argument, "test manifest has no records");
    require(model.config.n_classes == static_cast<int>(test.classes.size()), ErrorKind::config,
            "classifier class count does not match the test manifest");
    if (train_for_leakage) {
        std::set<std::string> train_paths;
        for (const DatasetRecord& r : train_for_leakage->records)
            train_paths.insert(
                std::filesystem::weakly_canonical(train_for_leakage->resolve(r)).string());
        for (const DatasetRecord& r : test.records)
            require(!train_paths.count(std::filesystem::weakly_canonical(test.resolve(r)).string()),
                    ErrorKind::leakage, "test image also appears in the training set: " + r.path);
    }

    EvalReport report;
    const int n = model.config.n_classes;
    report.confusion.assign(static_cast<std::size_t>(n), std::vector<int>(n, 0));
    for (const DatasetRecord& r : test.records) {
        const int truth = test.class_index(r.label);
        require(truth >= 0, ErrorKind::parse, "record label not in class list: " + r.label);
        const int pred = classify(model, load_record_image(test, r));
        report.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)] += 1;
        if (pred == truth) ++report.correct;
        ++report.total;
    }
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);
    return report;
}

CompareReport compare_strategies(
    const DatasetManifest& train, const DatasetManifest& test,
    const std::vector<std::pair<std::string, TrainingStrategy>>& strategies,
    const std::vector<std::uint64_t>& seeds, const ClassifierConfig& cfg) {
    require(!strategies.empty(), ErrorKind::invalid_argument, "no strategies given");
    require(!seeds.empty(), ErrorKind::invalid_argument, "need at least one seed");
    bool has_baseline = false;
    for (const auto& [name, strategy] : strategies) has_baseline |= name == "baseline";
    require(has_baseline, ErrorKind::config, "strategy list must include baseline for deltas");

    CompareReport report;
    for (const auto& [name, strategy] : strategies) {
        report.strategy_names.push_back(name);
        for (const std::uint64_t seed : seeds) {
            const ClassifierTrainResult trained = train_classifier(train, strategy, cfg, seed);
            const EvalReport eval = evaluate(trained.model, test, &train);
            report.runs.push_back(StrategyRun{name, seed, eval.accuracy});
        }
    }
    return report;
}

double CompareReport::mean_of(const std::string& name) const {
    double sum = 0.0;
    int count = 0;
    for (const StrategyRun& run : runs)
        if (run.name == name) {
            sum += run.accuracy;
            ++count;
        }
    require(count > 0, ErrorKind::invalid_argument, "unknown strategy: " + name);
    return sum / count;
}

double CompareReport::spread_of(const std::string& name) const {
    double lo = 1.0, hi = 0.0;
    int count = 0;
    for (const StrategyRun& run : runs)
        if (run.name == name) {
            lo = std::min(lo, run.accuracy);
            hi = std::max(hi, run.accuracy);
            ++count;
        }
    require(count > 0, ErrorKind::invalid_argument, "unknown strategy: " + name);
    return hi - lo;
}

double CompareReport::delta_vs_baseline(const std::string& name) const {
    return mean_of(name) - mean_of("baseline");
}

nlohmann::json CompareReport::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    nlohmann::json rows = nlohmann::json::array();
    for (const std::string& name : strategy_names) {
        nlohmann::json row;
        row["strategy"] = name;
        row["mean_accuracy"] = mean_of(name);
        row["spread"] = spread_of(name);
        row["delta_vs_baseline"] = delta_vs_baseline(name);
        nlohmann::json accs = nlohmann::json::array();
        for (const StrategyRun& run : runs)
            if (run.name == name)
                accs.push_back({{"seed", run.seed}, {"accuracy", run.accuracy}});
        row["runs"] = std::move(accs);
        rows.push_back(std::move(row));
    }
    j["strategies"] = std::move(rows);
    return j;
}

std::string CompareReport::to_text() const {
    std::string out = "strategy    mean_acc  spread    delta_vs_baseline\n";
    for (const std::string& name : strategy_names) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-11s %8.4f  %8.4f  %+17.4f\n", name.c_str(),
                      mean_of(name), spread_of(name), delta_vs_baseline(name));
        out += line;
    }
    return out;
}

}  // namespace mvc
