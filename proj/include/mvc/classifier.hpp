#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvc/dataset.hpp"
#include "mvc/params.hpp"
#include "mvc/tensor.hpp"

namespace mvc {

// Two stride-2 conv blocks, global average pooling, linear head.
struct ClassifierConfig {
    int image_channels = 1;
    int width = 16;
    int n_classes = 0;
};

struct Classifier {
    ClassifierConfig config;
    nn::ParamStore params;
};

nn::ParamStore register_classifier_params(const ClassifierConfig& cfg);
Classifier make_classifier(const ClassifierConfig& cfg, std::uint64_t seed);

std::vector<float> classifier_logits(const Classifier& model, const ImageTensor& image);
int classify(const Classifier& model, const ImageTensor& image);

void save_classifier(const std::string& path, const Classifier& model);
Classifier load_classifier(const std::string& path);

enum class StrategyKind { baseline, combined, rsp, two_phase };

const char* to_string(StrategyKind kind);

struct PhaseConfig {
    int steps = 600;
    double lr = 1e-3;
};

// Constructed through the factories so the two-phase ordering invariant
// (phase2.lr < phase1.lr, phase2.steps < phase1.steps) holds from creation.
struct TrainingStrategy {
    StrategyKind kind = StrategyKind::baseline;
    double p = 0.8;  // RSP admission probability, in (0,1]
    PhaseConfig phase1;
    PhaseConfig phase2;
    int batch_size = 8;

    static TrainingStrategy baseline(PhaseConfig phase = {});
    static TrainingStrategy combined(PhaseConfig phase = {});
    static TrainingStrategy rsp(PhaseConfig phase = {}, double p = 0.8);
    static TrainingStrategy two_phase(PhaseConfig phase1, PhaseConfig phase2);
};

// One RSP batch: batch_size real picks, then batch_size synthetic candidates,
// each drawn (candidate index, then admission by unit_double() < p).
struct RspBatch {
    std::vector<std::size_t> samples;  // record indices, real then admitted synthetic
    int synthetic_candidates = 0;
    int synthetic_admitted = 0;
};

RspBatch rsp_compose_batch(const std::vector<std::size_t>& real_idx,
                           const std::vector<std::size_t>& synth_idx, int batch_size, double p,
                           RngStream& rng);

struct ClassifierTrainResult {
    Classifier model;
    std::vector<double> loss_curve;
    long long synthetic_candidates = 0;  // RSP bookkeeping
    long long synthetic_admitted = 0;
};

ClassifierTrainResult train_classifier(const DatasetManifest& manifest,
                                       const TrainingStrategy& strategy,
                                       const ClassifierConfig& cfg, std::uint64_t seed);

struct EvalReport {
    double accuracy = 0.0;
    int correct = 0;
    int total = 0;
    std::vector<std::vector<int>> confusion;  // [true class][predicted class]
};

// train_for_leakage, when given, rejects any path overlap between the two
// manifests (resolved to canonical absolute paths).
EvalReport evaluate(const Classifier& model, const DatasetManifest& test,
                    const DatasetManifest* train_for_leakage = nullptr);

struct StrategyRun {
    std::string name;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
};

struct CompareReport {
    std::vector<std::string> strategy_names;  // row order
    std::vector<StrategyRun> runs;
    nlohmann::json to_json() const;
    std::string to_text() const;  // aligned table

    double mean_of(const std::string& name) const;
    double spread_of(const std::string& name) const;  // max - min over seeds
    double delta_vs_baseline(const std::string& name) const;
};

// Runs every (strategy, seed) pair; requires a "baseline" entry for deltas.
CompareReport compare_strategies(
    const DatasetManifest& train, const DatasetManifest& test,
    const std::vector<std::pair<std::string, TrainingStrategy>>& strategies,
    const std::vector<std::uint64_t>& seeds, const ClassifierConfig& cfg);

}  // namespace mvc
