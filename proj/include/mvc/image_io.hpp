#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mvc/tensor.hpp"

namespace mvc {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, one byte per pixel
};

// 8-bit grayscale PNG (color type 0, no interlace). The reader handles all
// five scanline filter types and validates chunk CRCs.
void write_png_gray8(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_png_gray8(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255).
void write_pgm_gray8(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_pgm_gray8(const std::filesystem::path& path);

// Dispatch on the file extension (.png or .pgm).
void save_gray_image(const std::filesystem::path& path, const GrayImage& img);
GrayImage load_gray_image(const std::filesystem::path& path);

// [1,H,W] tensor in [0,1]; bytes map by value/255 and round(clamp(v)*255).
ImageTensor image_to_tensor(const GrayImage& img);
GrayImage tensor_to_image(const ImageTensor& t);

}  // namespace mvc
