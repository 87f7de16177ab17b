#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvc/dataset.hpp"
#include "mvc/image_io.hpp"

namespace mvc {

// Grayscale renderer for {circle, square, cross} with randomized position,
// scale and intensity, plus a bare descriptor caption built from the sampled
// attributes (e.g. "a small bright circle near the top left").
//
// Attribute stream: RngStream(seed).derive(label).derive(k), drawing in order
// scale, intensity, background, cx, cy (all unit doubles). Rendering uses 4x4
// supersampled coverage per pixel, so images are a pure function of the
// attributes.
struct ShapeAttributes {
    double scale = 0.0;      // half-extent as a fraction of image size
    double intensity = 0.0;  // foreground level
    double background = 0.0;
    double cx = 0.0;  // center in [0,1] coords
    double cy = 0.0;
};

ShapeAttributes draw_shape_attributes(RngStream& stream);

GrayImage render_shape(const std::string& label, const ShapeAttributes& attrs, int image_size);

std::string describe_shape(const std::string& label, const ShapeAttributes& attrs);

struct ShapeSpec {
    std::string label;
    int count = 0;
};

const std::vector<std::string>& supported_shape_labels();

// Writes PNGs under out_dir/images/<label>/ and a manifest at
// out_dir/manifest.json; returns the manifest.
DatasetManifest make_shapes_dataset(const std::filesystem::path& out_dir,
                                    const std::vector<ShapeSpec>& classes, int image_size,
                                    std::uint64_t seed);

}  // namespace mvc
