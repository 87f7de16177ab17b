#include "mvc/params.hpp"

#include <cmath>

#include "mvc/container.hpp"
#include "mvc/errors.hpp"

namespace mvc::nn {

int ParamStore::add(std::string name, std::vector<int> shape) {
    require(!name.empty(), ErrorKind::invalid_argument, "parameter name must not be empty");
    require(index_of(name) < 0, ErrorKind::invalid_argument,
            "duplicate parameter name: " + name);
    names_.push_back(std::move(name));
    tensors_.emplace_back(std::move(shape));
    return count() - 1;
}

int ParamStore::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return static_cast<int>(i);
    return -1;
}

std::size_t ParamStore::total_parameters() const {
    std::size_t total = 0;
    for (const Tensor& t : tensors_) total += t.numel();
    return total;
}

std::vector<Tensor> ParamStore::zeros_like() const {
    std::vector<Tensor> out;
    out.reserve(tensors_.size());
    for (const Tensor& t : tensors_) out.emplace_back(t.shape);
    return out;
}

void fan_in_uniform_init(ParamStore& params, int index, int fan_in, const RngStream& root) {
    require(fan_in > 0, ErrorKind::invalid_argument, "fan_in must be positive");
    Tensor& t = params.at(index);
    RngStream stream = root.derive(params.name_of(index));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (float& x : t.v) x = static_cast<float>((2.0 * stream.unit_double() - 1.0) * bound);
}

void adam_step(ParamStore& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& cfg) {
    require(static_cast<int>(grads.size()) == params.count(), ErrorKind::invalid_argument,
            "gradient list does not match parameter store");
    if (state.m.empty()) {
        state.m = params.zeros_like();
        state.v = params.zeros_like();
    }
    require(static_cast<int>(state.m.size()) == params.count(), ErrorKind::invalid_argument,
            "optimizer state does not match parameter store");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (int i = 0; i < params.count(); ++i) {
        Tensor& p = params.at(i);
        const Tensor& g = grads[static_cast<std::size_t>(i)];
        require_same_shape(p, g, "adam_step gradient for " + params.name_of(i));
        Tensor& m = state.m[static_cast<std::size_t>(i)];
        Tensor& v = state.v[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < p.v.size(); ++j) {
            const double gj = static_cast<double>(g.v[j]);
            const double mj = cfg.beta1 * static_cast<double>(m.v[j]) + (1.0 - cfg.beta1) * gj;
            const double vj =
                cfg.beta2 * static_cast<double>(v.v[j]) + (1.0 - cfg.beta2) * gj * gj;
            m.v[j] = static_cast<float>(mj);
            v.v[j] = static_cast<float>(vj);
            const double update = cfg.lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg.eps);
            p.v[j] = static_cast<float>(static_cast<double>(p.v[j]) - update);
        }
    }
}

void save_params(const std::string& path, const std::string& kind, const nlohmann::json& config,
                 const ParamStore& params) {
    nlohmann::json header;
    header["version"] = 1;
    header["kind"] = kind;
    header["config"] = config;
    nlohmann::json tensors = nlohmann::json::array();
    std::vector<float> payload;
    payload.reserve(params.total_parameters());
    for (int i = 0; i < params.count(); ++i) {
        const Tensor& t = params.at(i);
        tensors.push_back({{"name", params.name_of(i)},
                           {"shape", t.shape},
                           {"offset", payload.size()}});
        payload.insert(payload.end(), t.v.begin(), t.v.end());
    }
    header["tensors"] = tensors;
    write_float_container(path, header, payload);
}

LoadedParams load_params(const std::string& path, const std::string& expected_kind) {
    auto [header, payload] = read_float_container(path);
    require(header.is_object() && header.value("version", 0) == 1, ErrorKind::parse,
            "unsupported checkpoint version in " + path);
    LoadedParams out;
    out.kind = header.value("kind", "");
    require(out.kind == expected_kind, ErrorKind::parse,
            "checkpoint kind mismatch in " + path + ": expected " + expected_kind + ", found " +
                out.kind);
    require(header.contains("config"), ErrorKind::parse, "checkpoint missing config: " + path);
    out.config = header["config"];
    require(header.contains("tensors") && header["tensors"].is_array(), ErrorKind::parse,
            "checkpoint missing tensor table: " + path);
    std::size_t offset = 0;
    for (const auto& entry : header["tensors"]) {
        require(entry.is_object() && entry.contains("name") && entry.contains("shape"),
                ErrorKind::parse, "malformed tensor entry in " + path);
        const std::string name = entry["name"].get<std::string>();
        const std::vector<int> shape = entry["shape"].get<std::vector<int>>();
        const std::size_t n = Tensor::numel_of(shape);
        if (entry.contains("offset"))
            require(entry["offset"].get<std::size_t>() == offset, ErrorKind::parse,
                    "tensor offset mismatch in " + path + " for " + name);
        require(offset + n <= payload.size(), ErrorKind::parse,
                "checkpoint payload too short in " + path);
        const int idx = out.params.add(name, shape);
        Tensor& t = out.params.at(idx);
        std::copy(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                  payload.begin() + static_cast<std::ptrdiff_t>(offset + n), t.v.begin());
        offset += n;
    }
    require(offset == payload.size(), ErrorKind::parse,
            "checkpoint payload size mismatch in " + path);
    return out;
}

}  // namespace mvc::nn
