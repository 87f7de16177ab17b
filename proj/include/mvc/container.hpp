#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include <json.hpp>

namespace mvc {

// Shared on-disk container: one compact JSON header line ending in '\n',
// followed by a raw little-endian float32 payload. Used by the embedding
// archive and the model checkpoints.
void write_float_container(const std::filesystem::path& path, const nlohmann::json& header,
                           const std::vector<float>& payload);

std::pair<nlohmann::json, std::vector<float>> read_float_container(
    const std::filesystem::path& path);

}  // namespace mvc
