#include "mvc/container.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "mvc/errors.hpp"

namespace mvc {

static_assert(sizeof(float) == 4, "float must be IEEE-754 binary32");

void write_float_container(const std::filesystem::path& path, const nlohmann::json& header,
                           const std::vector<float>& payload) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::storage, "cannot open for writing: " + path.string());
    const std::string head = header.dump();
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.put('\n');
    std::vector<unsigned char> bytes(payload.size() * 4);
    for (std::size_t i = 0; i < payload.size(); ++i) {
        const auto u = std::bit_cast<std::uint32_t>(payload[i]);
        bytes[4 * i + 0] = static_cast<unsigned char>(u & 0xFF);
        bytes[4 * i + 1] = static_cast<unsigned char>((u >> 8) & 0xFF);
        bytes[4 * i + 2] = static_cast<unsigned char>((u >> 16) & 0xFF);
        bytes[4 * i + 3] = static_cast<unsigned char>((u >> 24) & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), ErrorKind::storage, "write failed: " + path.string());
}

std::pair<nlohmann::json, std::vector<float>> read_float_container(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::storage, "cannot open: " + path.string());
    std::string head;
    if (!std::getline(in, head))
        fail(ErrorKind::parse, "missing container header: " + path.string());
    nlohmann::json header = nlohmann::json::parse(head, nullptr, false);
    if (header.is_discarded())
        fail(ErrorKind::parse, "malformed container header: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() % 4 != 0)
        fail(ErrorKind::parse, "truncated float payload: " + path.string());
    std::vector<float> payload(bytes.size() / 4);
    for (std::size_t i = 0; i < payload.size(); ++i) {
        std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * i + 0]) |
                          (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                          (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                          (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
        payload[i] = std::bit_cast<float>(u);
    }
    return {std::move(header), std::move(payload)};
}

}  // namespace mvc
