#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "mvc/caption.hpp"
#include "mvc/dataset.hpp"
#include "mvc/image_io.hpp"

using namespace mvc;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + MVCAUG_CLI_PATH " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult r;
    std::array<char, 512> buf;
    while (fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) r.output += buf.data();
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "mvc-cli-tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::string run_dir_of(const CliResult& r) {
    const std::string key = "run-dir: ";
    const std::size_t at = r.output.find(key);
    REQUIRE(at != std::string::npos);
    const std::size_t end = r.output.find('\n', at);
    return r.output.substr(at + key.size(), end - at - key.size());
}

}  // namespace

TEST_CASE("help exits clean and bad invocations exit 2") {
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("gen-shapes --help").exit_code == 0);
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli("summon-dragons").exit_code == 2);
    CHECK(run_cli("gen-shapes --no-such-flag").exit_code == 2);
    CHECK(run_cli("mix --class circle").exit_code == 2);  // missing required --data
}

TEST_CASE("gen-shapes writes a balanced dataset and echoes the run header") {
    const fs::path dir = fresh_dir("gen");
    const CliResult r = run_cli("gen-shapes --out " + (dir / "data").string() + " --count 5" +
                                " --size 16 --seed 9 --run-dir " + (dir / "runs").string());
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("command: gen-shapes\n") != std::string::npos);
    CHECK(r.output.find("seed: 9\n") != std::string::npos);
    CHECK(r.output.find("config: {") != std::string::npos);

    const fs::path run_dir = run_dir_of(r);
    CHECK(fs::exists(run_dir / "config.json"));

    const DatasetManifest m = load_manifest(dir / "data" / "manifest.json");
    CHECK(m.classes == std::vector<std::string>{"circle", "square", "cross"});
    CHECK(m.records.size() == 15);
    CHECK(validate_manifest(m) == std::vector<int>{1, 16, 16});
    for (const DatasetRecord& rec : m.records) CHECK(!rec.caption.empty());
}

TEST_CASE("gen-shapes output is a pure function of the seed") {
    const fs::path dir = fresh_dir("gen-seeded");
    const std::string common = " --count 2 --size 16 --run-dir " + (dir / "runs").string();
    REQUIRE(run_cli("gen-shapes --out " + (dir / "a").string() + common + " --seed 4").exit_code ==
            0);
    REQUIRE(run_cli("gen-shapes --out " + (dir / "b").string() + common + " --seed 4").exit_code ==
            0);
    REQUIRE(run_cli("gen-shapes --out " + (dir / "c").string() + common + " --seed 5").exit_code ==
            0);
    const std::string rel = "images/circle/0001.png";
    CHECK(slurp(dir / "a" / rel) == slurp(dir / "b" / rel));
    CHECK(slurp(dir / "a" / rel) != slurp(dir / "c" / rel));
    CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
}

TEST_CASE("failures map to categorized exit codes") {
    const fs::path dir = fresh_dir("exit-codes");
    const std::string rd = " --run-dir " + (dir / "runs").string();

    // storage: manifest file does not exist
    CHECK(run_cli("mix --data " + (dir / "absent.json").string() + " --class circle" + rd)
              .exit_code == 6);

    // parse: malformed config JSON
    std::ofstream(dir / "broken.json") << "{nope";
    CHECK(run_cli("gen-shapes --out " + (dir / "x").string() + rd + " --config " +
                  (dir / "broken.json").string())
              .exit_code == 7);

    // config: well-formed config with an out-of-range value
    std::ofstream(dir / "bad-value.json") << R"({"guidance":{"w":-1.0}})";
    CHECK(run_cli("gen-shapes --out " + (dir / "y").string() + rd + " --config " +
                  (dir / "bad-value.json").string())
              .exit_code == 3);

    // config: unknown key
    std::ofstream(dir / "unknown-key.json") << R"({"guidance":{"warp":9}})";
    CHECK(run_cli("gen-shapes --out " + (dir / "z").string() + rd + " --config " +
                  (dir / "unknown-key.json").string())
              .exit_code == 3);

    // invalid argument: size below the floor
    CHECK(run_cli("gen-shapes --out " + (dir / "small").string() + " --size 8" + rd).exit_code ==
          2);

    // config: unsupported class label
    CHECK(run_cli("gen-shapes --out " + (dir / "shapes").string() +
                  " --classes circle,hexagon --size 16" + rd)
              .exit_code == 3);
}

TEST_CASE("mix writes one archive entry per requested output") {
    const fs::path dir = fresh_dir("mix");
    const std::string rd = " --run-dir " + (dir / "runs").string();
    REQUIRE(run_cli("gen-shapes --out " + (dir / "data").string() + " --count 2 --size 16" + rd)
                .exit_code == 0);

    std::ofstream(dir / "config.json")
        << R"({"embedder":{"m":4,"d":6,"seed":7},"mixer":{"outputs_per_class":4}})";
    const fs::path archive = dir / "mixed.emb";
    const CliResult r = run_cli("mix --data " + (dir / "data" / "manifest.json").string() +
                                " --class circle --out " + archive.string() + " --config " +
                                (dir / "config.json").string() + " --seed 11" + rd);
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);

    const auto entries = import_embeddings(archive, 4, 6);
    REQUIRE(entries.size() == 4);
    for (std::size_t k = 0; k < entries.size(); ++k) {
        CHECK(entries[k].first == "circle/" + std::to_string(k));
        CHECK(entries[k].second.rows == 4);
        CHECK(entries[k].second.cols == 6);
    }

    // unknown class -> invalid argument
    CHECK(run_cli("mix --data " + (dir / "data" / "manifest.json").string() +
                  " --class hexagon --config " + (dir / "config.json").string() + rd)
              .exit_code == 2);
}

TEST_CASE("render-grid puts a real image first in every row") {
    const fs::path dir = fresh_dir("grid");
    const std::string rd = " --run-dir " + (dir / "runs").string();
    REQUIRE(run_cli("gen-shapes --out " + (dir / "data").string() +
                    " --classes circle,square --count 1 --size 16 --seed 3" + rd)
                .exit_code == 0);

    // extend the manifest with synthetic copies so the grid has columns 2..3
    DatasetManifest m = load_manifest(dir / "data" / "manifest.json");
    const std::size_t n_real = m.records.size();
    for (std::size_t i = 0; i < n_real; ++i) {
        DatasetRecord copy = m.records[i];
        copy.provenance = Provenance::synthetic;
        const fs::path rel = fs::path("synthetic") / (std::to_string(i) + ".png");
        fs::create_directories(dir / "data" / "synthetic");
        fs::copy_file(m.resolve(m.records[i]), dir / "data" / rel);
        copy.path = rel.generic_string();
        m.records.push_back(std::move(copy));
    }
    write_manifest(dir / "data" / "manifest.json", m);

    const fs::path grid_path = dir / "grid.png";
    const CliResult r = run_cli("render-grid --data " + (dir / "data" / "manifest.json").string() +
                                " --per-class 3 --out " + grid_path.string() + rd);
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);

    const GrayImage grid = read_png_gray8(grid_path);
    CHECK(grid.width == 3 * 16 + 2 * 2);
    CHECK(grid.height == 2 * 16 + 2);

    const GrayImage real0 = read_png_gray8(dir / "data" / "images/circle/0000.png");
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            CHECK(grid.pixels[static_cast<std::size_t>(y) * grid.width + x] ==
                  real0.pixels[static_cast<std::size_t>(y) * 16 + x]);
    // separator column between cells stays white
    for (int y = 0; y < 16; ++y)
        CHECK(grid.pixels[static_cast<std::size_t>(y) * grid.width + 16] == 255);
}

TEST_CASE("the environment variable supplies the default run root") {
    const fs::path dir = fresh_dir("env-root");
    const CliResult r =
        run_cli("gen-shapes --out " + (dir / "data").string() + " --count 1 --size 16",
                "MVCAUG_RUN_DIR=" + (dir / "env-runs").string());
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    const fs::path run_dir = run_dir_of(r);
    CHECK(run_dir.string().rfind((dir / "env-runs").string(), 0) == 0);
    CHECK(fs::exists(run_dir / "config.json"));
}
