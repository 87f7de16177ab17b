#include "mvc/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mvc/errors.hpp"

namespace mvc {

namespace {

constexpr double kMinScale = 0.12;
constexpr double kMaxScale = 0.34;
constexpr double kMinIntensity = 0.55;
constexpr double kMaxBackground = 0.15;

bool inside_shape(const std::string& label, double dx, double dy, double r) {
    if (label == "circle") return dx * dx + dy * dy <= r * r;
    if (label == "square") return std::abs(dx) <= r && std::abs(dy) <= r;
    // cross: two orthogonal bars of thickness 0.56*r
    const double arm = 0.28 * r;
    return (std::abs(dx) <= arm && std::abs(dy) <= r) ||
           (std::abs(dy) <= arm && std::abs(dx) <= r);
}

std::string size_bucket(double scale) {
    const double third = (kMaxScale - kMinScale) / 3.0;
    if (scale < kMinScale + third) return "small";
    if (scale < kMinScale + 2.0 * third) return "medium";
    return "large";
}

std::string brightness_bucket(double intensity) {
    return intensity < (kMinIntensity + 1.0) / 2.0 ? "dim" : "bright";
}

std::string position_bucket(double cx, double cy) {
    const int col = cx < 1.0 / 3.0 ? 0 : (cx < 2.0 / 3.0 ? 1 : 2);
    const int row = cy < 1.0 / 3.0 ? 0 : (cy < 2.0 / 3.0 ? 1 : 2);
    static const char* kNames[3][3] = {{"top left", "top", "top right"},
                                       {"left", "center", "right"},
                                       {"bottom left", "bottom", "bottom right"}};
    return kNames[row][col];
}

}  // namespace

ShapeAttributes draw_shape_attributes(RngStream& stream) {
    ShapeAttributes a;
    a.scale = kMinScale + (kMaxScale - kMinScale) * stream.unit_double();
    a.intensity = kMinIntensity + (1.0 - kMinIntensity) * stream.unit_double();
    a.background = 0.03 + (kMaxBackground - 0.03) * stream.unit_double();
    const double margin = a.scale + 0.02;
    a.cx = margin + (1.0 - 2.0 * margin) * stream.unit_double();
    a.cy = margin + (1.0 - 2.0 * margin) * stream.unit_double();
    return a;
}

GrayImage render_shape(const std::string& label, const ShapeAttributes& attrs, int image_size) {
    require(image_size >= 16, ErrorKind::invalid_argument, "image size must be >= 16");
    const double s = static_cast<double>(image_size);
    const double r = attrs.scale * s;
    const double cx = attrs.cx * s;
    const double cy = attrs.cy * s;

    GrayImage img;
    img.width = image_size;
    img.height = image_size;
    img.pixels.resize(static_cast<std::size_t>(image_size) * image_size);
    constexpr int kSub = 4;
    for (int y = 0; y < image_size; ++y)
        for (int x = 0; x < image_size; ++x) {
            int hit = 0;
            for (int sy = 0; sy < kSub; ++sy)
                for (int sx = 0; sx < kSub; ++sx) {
                    const double px = x + (sx + 0.5) / kSub;
                    const double py = y + (sy + 0.5) / kSub;
                    if (inside_shape(label, px - cx, py - cy, r)) ++hit;
                }
            const double coverage = static_cast<double>(hit) / (kSub * kSub);
            const double value = attrs.background + coverage * (attrs.intensity - attrs.background);
            img.pixels[static_cast<std::size_t>(y) * image_size + x] =
                static_cast<std::uint8_t>(std::lround(value * 255.0));
        }
    return img;
}

std::string describe_shape(const std::string& label, const ShapeAttributes& attrs) {
    return "a " + size_bucket(attrs.scale) + " " + brightness_bucket(attrs.intensity) + " " +
           label + " near the " + position_bucket(attrs.cx, attrs.cy);
}

const std::vector<std::string>& supported_shape_labels() {
    static const std::vector<std::string> kLabels = {"circle", "square", "cross"};
    return kLabels;
}

DatasetManifest make_shapes_dataset(const std::filesystem::path& out_dir,
                                    const std::vector<ShapeSpec>& classes, int image_size,
                                    std::uint64_t seed) {
    require(!classes.empty(), ErrorKind::invalid_argument, "no classes requested");
    for (const ShapeSpec& spec : classes) {
        const auto& known = supported_shape_labels();
        require(std::find(known.begin(), known.end(), spec.label) != known.end(),
                ErrorKind::config, "unsupported shape label: " + spec.label);
        require(spec.count >= 1, ErrorKind::invalid_argument,
                "class count must be >= 1 for " + spec.label);
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    require(!ec, ErrorKind::storage, "cannot create " + (out_dir / "images").string());

    DatasetManifest manifest;
    manifest.base_dir = out_dir;
    const RngStream root(seed);
    for (const ShapeSpec& spec : classes) {
        manifest.classes.push_back(spec.label);
        const std::filesystem::path class_dir = out_dir / "images" / spec.label;
        std::filesystem::create_directories(class_dir, ec);
        require(!ec, ErrorKind::storage, "cannot create " + class_dir.string());
        const RngStream class_stream = root.derive(spec.label);
        for (int k = 0; k < spec.count; ++k) {
            RngStream stream = class_stream.derive(static_cast<std::uint64_t>(k));
            const ShapeAttributes attrs = draw_shape_attributes(stream);
            const GrayImage img = render_shape(spec.label, attrs, image_size);
            char name[32];
            std::snprintf(name, sizeof(name), "%04d.png", k);
            const std::filesystem::path rel =
                std::filesystem::path("images") / spec.label / name;
            write_png_gray8(out_dir / rel, img);
            DatasetRecord rec;
            rec.path = rel.generic_string();
            rec.label = spec.label;
            rec.caption = describe_shape(spec.label, attrs);
            rec.provenance = Provenance::real;
            rec.meta = nlohmann::json::object();
            manifest.records.push_back(std::move(rec));
        }
    }
    write_manifest(out_dir / "manifest.json", manifest);
    return manifest;
}

}  // namespace mvc
