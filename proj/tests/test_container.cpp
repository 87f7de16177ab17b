#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mvc/container.hpp"
#include "mvc/errors.hpp"

using namespace mvc;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "mvc-container-tests";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("container round trips header and payload bit-exactly") {
    const fs::path path = temp_file("roundtrip.bin");
    const nlohmann::json header = {{"version", 1}, {"kind", "demo"}, {"n", 3}};
    const std::vector<float> payload = {0.0f, -1.5f, 3.25e-12f, 1.0f / 3.0f,
                                        std::nextafter(1.0f, 2.0f)};
    write_float_container(path, header, payload);
    const auto [h, p] = read_float_container(path);
    CHECK(h == header);
    REQUIRE(p.size() == payload.size());
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == payload[i]);
}

TEST_CASE("header is one compact JSON line") {
    const fs::path path = temp_file("layout.bin");
    write_float_container(path, {{"version", 1}}, {1.0f});
    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::getline(in, line);
    CHECK(line == "{\"version\":1}");
    char bytes[4];
    in.read(bytes, 4);
    CHECK(in.gcount() == 4);
    CHECK(in.peek() == std::ifstream::traits_type::eof());
}

TEST_CASE("payload floats are little-endian") {
    const fs::path path = temp_file("endian.bin");
    write_float_container(path, {{"v", 1}}, {1.0f});
    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::getline(in, line);
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    CHECK(bytes[0] == 0x00);
    CHECK(bytes[1] == 0x00);
    CHECK(bytes[2] == 0x80);
    CHECK(bytes[3] == 0x3F);
}

TEST_CASE("empty payload is valid") {
    const fs::path path = temp_file("empty.bin");
    write_float_container(path, {{"version", 1}}, {});
    const auto [h, p] = read_float_container(path);
    CHECK(p.empty());
}

TEST_CASE("malformed files are rejected with parse errors") {
    const fs::path missing = temp_file("missing-header.bin");
    std::ofstream(missing, std::ios::binary | std::ios::trunc).put('\0');
    CHECK_THROWS_AS(read_float_container(missing), Error);

    const fs::path truncated = temp_file("truncated.bin");
    {
        std::ofstream out(truncated, std::ios::binary | std::ios::trunc);
        out << "{\"version\":1}\n";
        out.write("\x01\x02\x03", 3);
    }
    CHECK_THROWS_AS(read_float_container(truncated), Error);

    CHECK_THROWS_AS(read_float_container(temp_file("absent.bin")), Error);
}
