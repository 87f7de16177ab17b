#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "mvc/shapes.hpp"

using namespace mvc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "mvc-shapes-tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::vector<ShapeSpec> three_classes(int count) {
    return {{"circle", count}, {"square", count}, {"cross", count}};
}

}  // namespace

TEST_CASE("attribute draws are derived per class and index") {
    RngStream a = RngStream(5).derive("circle").derive(std::uint64_t{0});
    RngStream b = RngStream(5).derive("circle").derive(std::uint64_t{0});
    const ShapeAttributes x = draw_shape_attributes(a);
    const ShapeAttributes y = draw_shape_attributes(b);
    CHECK(x.scale == y.scale);
    CHECK(x.cx == y.cx);

    CHECK(x.scale >= 0.12);
    CHECK(x.scale <= 0.34);
    CHECK(x.intensity >= 0.55);
    CHECK(x.intensity <= 1.0);
    CHECK(x.background <= 0.15);
    CHECK(x.cx - x.scale >= 0.0);
    CHECK(x.cx + x.scale <= 1.0);
    CHECK(x.cy - x.scale >= 0.0);
    CHECK(x.cy + x.scale <= 1.0);
}

TEST_CASE("rendering is deterministic and respects the size floor") {
    ShapeAttributes attrs;
    attrs.scale = 0.25;
    attrs.intensity = 0.9;
    attrs.background = 0.05;
    attrs.cx = 0.5;
    attrs.cy = 0.5;
    const GrayImage a = render_shape("circle", attrs, 16);
    const GrayImage b = render_shape("circle", attrs, 16);
    CHECK(a.pixels == b.pixels);
    CHECK(a.width == 16);
    CHECK_THROWS_AS(render_shape("circle", attrs, 15), Error);

    // center pixel fully covered, corner pixel pure background
    CHECK(a.pixels[8 * 16 + 8] == static_cast<std::uint8_t>(std::lround(0.9 * 255.0)));
    CHECK(a.pixels[0] == static_cast<std::uint8_t>(std::lround(0.05 * 255.0)));

    const GrayImage sq = render_shape("square", attrs, 16);
    const GrayImage cr = render_shape("cross", attrs, 16);
    CHECK(sq.pixels != a.pixels);
    CHECK(cr.pixels != sq.pixels);
}

TEST_CASE("descriptors name the sampled attribute buckets") {
    ShapeAttributes attrs;
    attrs.scale = 0.13;
    attrs.intensity = 0.6;
    attrs.cx = 0.2;
    attrs.cy = 0.2;
    CHECK(describe_shape("circle", attrs) == "a small dim circle near the top left");
    attrs.scale = 0.33;
    attrs.intensity = 0.95;
    attrs.cx = 0.5;
    attrs.cy = 0.5;
    CHECK(describe_shape("square", attrs) == "a large bright square near the center");
    attrs.cx = 0.9;
    attrs.cy = 0.9;
    CHECK(describe_shape("cross", attrs) == "a large bright cross near the bottom right");
}

TEST_CASE("dataset generation is balanced and complete") {
    const fs::path dir = fresh_dir("balanced");
    const DatasetManifest m = make_shapes_dataset(dir, three_classes(20), 32, 1);
    CHECK(m.classes == std::vector<std::string>{"circle", "square", "cross"});
    CHECK(m.records.size() == 60);
    for (const std::string& label : m.classes)
        CHECK(m.indices_of(label).size() == 20);
    CHECK(m.indices_with(Provenance::real).size() == 60);
    CHECK(validate_manifest(m) == std::vector<int>{1, 32, 32});
    CHECK(fs::exists(dir / "manifest.json"));

    const DatasetManifest loaded = load_manifest(dir / "manifest.json");
    CHECK(loaded.records.size() == 60);
    for (const DatasetRecord& r : loaded.records) {
        CHECK(!r.caption.empty());
        CHECK(r.caption.rfind("a ", 0) == 0);
        CHECK(r.caption.find(r.label) != std::string::npos);
    }
}

TEST_CASE("generation is bit-identical per seed") {
    const fs::path a = fresh_dir("seed-a");
    const fs::path b = fresh_dir("seed-b");
    const fs::path c = fresh_dir("seed-c");
    const DatasetManifest ma = make_shapes_dataset(a, three_classes(3), 16, 9);
    const DatasetManifest mb = make_shapes_dataset(b, three_classes(3), 16, 9);
    const DatasetManifest mc = make_shapes_dataset(c, three_classes(3), 16, 10);

    bool any_differs = false;
    for (std::size_t i = 0; i < ma.records.size(); ++i) {
        CHECK(ma.records[i].path == mb.records[i].path);
        CHECK(ma.records[i].caption == mb.records[i].caption);
        CHECK(slurp(a / ma.records[i].path) == slurp(b / mb.records[i].path));
        any_differs |= slurp(a / ma.records[i].path) != slurp(c / mc.records[i].path);
    }
    CHECK(any_differs);
}

TEST_CASE("class order does not disturb per-class content") {
    const fs::path a = fresh_dir("order-a");
    const fs::path b = fresh_dir("order-b");
    make_shapes_dataset(a, {{"circle", 2}, {"square", 2}}, 16, 4);
    make_shapes_dataset(b, {{"square", 2}, {"circle", 2}}, 16, 4);
    CHECK(slurp(a / "images/circle/0000.png") == slurp(b / "images/circle/0000.png"));
    CHECK(slurp(a / "images/square/0001.png") == slurp(b / "images/square/0001.png"));
}

TEST_CASE("bad generation requests are rejected") {
    const fs::path dir = fresh_dir("bad");
    CHECK_THROWS_AS(make_shapes_dataset(dir, {}, 32, 1), Error);
    CHECK_THROWS_AS(make_shapes_dataset(dir, {{"triangle", 2}}, 32, 1), Error);
    CHECK_THROWS_AS(make_shapes_dataset(dir, {{"circle", 0}}, 32, 1), Error);
    CHECK_THROWS_AS(make_shapes_dataset(dir, {{"circle", 2}}, 8, 1), Error);
}
