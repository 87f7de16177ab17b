#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvc/rng.hpp"
#include "mvc/tensor.hpp"

namespace mvc::nn {

// Named tensors in fixed registration order. Registration order is the
// contract for gradient alignment, checkpoint payload layout, and
// deterministic init.
class ParamStore {
  public:
    int add(std::string name, std::vector<int> shape);
    int index_of(const std::string& name) const;  // -1 when absent

    Tensor& at(int index) { return tensors_.at(static_cast<std::size_t>(index)); }
    const Tensor& at(int index) const { return tensors_.at(static_cast<std::size_t>(index)); }
    const std::string& name_of(int index) const {
        return names_.at(static_cast<std::size_t>(index));
    }

    int count() const { return static_cast<int>(tensors_.size()); }
    std::size_t total_parameters() const;

    std::vector<Tensor> zeros_like() const;  // one grad slot per tensor

  private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
};

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), one derived stream per tensor name so
// values do not shift when unrelated tensors are added.
void fan_in_uniform_init(ParamStore& params, int index, int fan_in, const RngStream& root);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    long long step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

// Bias-corrected Adam, elementwise, moments held and updated in float32 with
// the per-element arithmetic done in double before narrowing.
void adam_step(ParamStore& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& cfg);

// Model checkpoints share the float-container layout: one JSON header line
// {"version":1,"kind":...,"config":...,"tensors":[{"name","shape"},...]}
// followed by every tensor's float32 payload in registration order.
void save_params(const std::string& path, const std::string& kind, const nlohmann::json& config,
                 const ParamStore& params);

struct LoadedParams {
    std::string kind;
    nlohmann::json config;
    ParamStore params;
};

LoadedParams load_params(const std::string& path, const std::string& expected_kind);

}  // namespace mvc::nn
