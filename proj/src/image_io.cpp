#include "mvc/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "mvc/errors.hpp"

namespace mvc {

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, out.data() + type_at, static_cast<uInt>(4 + data.size())));
    put_be32(out, crc);
}

void validate_image(const GrayImage& img) {
    require(img.width >= 1 && img.height >= 1, ErrorKind::invalid_argument,
            "image dimensions must be positive");
    require(img.pixels.size() ==
                static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height),
            ErrorKind::shape, "pixel buffer does not match image dimensions");
}

std::uint8_t paeth(std::uint8_t a, std::uint8_t b, std::uint8_t c) {
    const int p = static_cast<int>(a) + static_cast<int>(b) - static_cast<int>(c);
    const int pa = std::abs(p - static_cast<int>(a));
    const int pb = std::abs(p - static_cast<int>(b));
    const int pc = std::abs(p - static_cast<int>(c));
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

void write_png_gray8(const std::filesystem::path& path, const GrayImage& img) {
    validate_image(img);
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(img.height) * (static_cast<std::size_t>(img.width) + 1));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter type: none
        const std::uint8_t* row = img.pixels.data() + static_cast<std::size_t>(y) * img.width;
        raw.insert(raw.end(), row, row + img.width);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    require(compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) ==
                Z_OK,
            ErrorKind::storage, "deflate failed for " + path.string());
    compressed.resize(bound);

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(img.width));
    put_be32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // color type: grayscale
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", compressed);
    append_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    require(f.good(), ErrorKind::storage, "cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    require(f.good(), ErrorKind::storage, "write failed for " + path.string());
}

GrayImage read_png_gray8(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), ErrorKind::storage, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    static const std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    require(bytes.size() > 8 && std::memcmp(bytes.data(), kSig, 8) == 0, ErrorKind::parse,
            "not a PNG file: " + path.string());

    GrayImage img;
    std::vector<std::uint8_t> idat;
    bool saw_ihdr = false, saw_iend = false;
    std::size_t at = 8;
    while (at + 12 <= bytes.size() && !saw_iend) {
        const std::uint32_t len = get_be32(&bytes[at]);
        require(at + 12 + len <= bytes.size(), ErrorKind::parse,
                "truncated chunk in " + path.string());
        const std::string type(reinterpret_cast<const char*>(&bytes[at + 4]), 4);
        const std::uint8_t* data = &bytes[at + 8];
        const std::uint32_t want_crc = get_be32(&bytes[at + 8 + len]);
        const std::uint32_t got_crc =
            static_cast<std::uint32_t>(crc32(0, &bytes[at + 4], static_cast<uInt>(4 + len)));
        require(want_crc == got_crc, ErrorKind::parse,
                "chunk CRC mismatch in " + path.string());
        if (type == "IHDR") {
            require(len == 13, ErrorKind::parse, "bad IHDR in " + path.string());
            img.width = static_cast<int>(get_be32(data));
            img.height = static_cast<int>(get_be32(data + 4));
            require(img.width >= 1 && img.height >= 1, ErrorKind::parse,
                    "bad dimensions in " + path.string());
            require(data[8] == 8 && data[9] == 0, ErrorKind::parse,
                    "unsupported PNG format (need 8-bit grayscale): " + path.string());
            require(data[10] == 0 && data[11] == 0 && data[12] == 0, ErrorKind::parse,
                    "unsupported PNG encoding options: " + path.string());
            saw_ihdr = true;
        } else if (type == "IDAT") {
            require(saw_ihdr, ErrorKind::parse, "IDAT before IHDR in " + path.string());
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            saw_iend = true;
        }
        at += 12 + len;
    }
    require(saw_ihdr && saw_iend && !idat.empty(), ErrorKind::parse,
            "missing PNG chunks in " + path.string());

    const std::size_t stride = static_cast<std::size_t>(img.width) + 1;
    std::vector<std::uint8_t> raw(stride * static_cast<std::size_t>(img.height));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    require(uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) ==
                    Z_OK &&
                raw_len == raw.size(),
            ErrorKind::parse, "inflate failed for " + path.string());

    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    std::vector<std::uint8_t> prev(static_cast<std::size_t>(img.width), 0);
    for (int y = 0; y < img.height; ++y) {
        const std::uint8_t filter = raw[static_cast<std::size_t>(y) * stride];
        const std::uint8_t* src = &raw[static_cast<std::size_t>(y) * stride + 1];
        std::uint8_t* dst = &img.pixels[static_cast<std::size_t>(y) * img.width];
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t left = x > 0 ? dst[x - 1] : 0;
            const std::uint8_t up = prev[static_cast<std::size_t>(x)];
            const std::uint8_t upleft = x > 0 ? prev[static_cast<std::size_t>(x - 1)] : 0;
            int recon;
            switch (filter) {
                case 0: recon = src[x]; break;
                case 1: recon = src[x] + left; break;
                case 2: recon = src[x] + up; break;
                case 3: recon = src[x] + ((left + up) >> 1); break;
                case 4: recon = src[x] + paeth(left, up, upleft); break;
                default:
                    fail(ErrorKind::parse, "unknown filter type in " + path.string());
            }
            dst[x] = static_cast<std::uint8_t>(recon & 0xFF);
        }
        std::copy(dst, dst + img.width, prev.begin());
    }
    return img;
}

void write_pgm_gray8(const std::filesystem::path& path, const GrayImage& img) {
    validate_image(img);
    std::ofstream f(path, std::ios::binary);
    require(f.good(), ErrorKind::storage, "cannot open " + path.string() + " for writing");
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    require(f.good(), ErrorKind::storage, "write failed for " + path.string());
}

GrayImage read_pgm_gray8(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), ErrorKind::storage, "cannot open " + path.string());
    std::string magic;
    f >> magic;
    require(magic == "P5", ErrorKind::parse, "not a binary PGM: " + path.string());
    auto next_token = [&]() -> long {
        // skip whitespace and '#' comment lines
        while (f.good()) {
            const int c = f.peek();
            if (c == '#') {
                std::string line;
                std::getline(f, line);
            } else if (std::isspace(c)) {
                f.get();
            } else {
                break;
            }
        }
        long v = -1;
        f >> v;
        return v;
    };
    GrayImage img;
    img.width = static_cast<int>(next_token());
    img.height = static_cast<int>(next_token());
    const long maxval = next_token();
    require(img.width >= 1 && img.height >= 1 && maxval == 255, ErrorKind::parse,
            "unsupported PGM header in " + path.string());
    f.get();  // single whitespace after maxval
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    f.read(reinterpret_cast<char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
    require(f.gcount() == static_cast<std::streamsize>(img.pixels.size()), ErrorKind::parse,
            "truncated PGM payload in " + path.string());
    return img;
}

namespace {

bool has_extension(const std::filesystem::path& path, const char* ext) {
    std::string e = path.extension().string();
    std::transform(e.begin(), e.end(), e.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e == ext;
}

}  // namespace

void save_gray_image(const std::filesystem::path& path, const GrayImage& img) {
    if (has_extension(path, ".png"))
        write_png_gray8(path, img);
    else if (has_extension(path, ".pgm"))
        write_pgm_gray8(path, img);
    else
        fail(ErrorKind::invalid_argument, "unsupported image extension: " + path.string());
}

GrayImage load_gray_image(const std::filesystem::path& path) {
    if (has_extension(path, ".png")) return read_png_gray8(path);
    if (has_extension(path, ".pgm")) return read_pgm_gray8(path);
    fail(ErrorKind::invalid_argument, "unsupported image extension: " + path.string());
}

ImageTensor image_to_tensor(const GrayImage& img) {
    validate_image(img);
    ImageTensor t({1, img.height, img.width});
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        t.v[i] = static_cast<float>(img.pixels[i]) / 255.0f;
    return t;
}

GrayImage tensor_to_image(const ImageTensor& t) {
    require(t.rank() == 3 && t.c() == 1, ErrorKind::shape,
            "tensor_to_image expects a single-channel CHW tensor");
    GrayImage img;
    img.height = t.h();
    img.width = t.w();
    img.pixels.resize(t.v.size());
    for (std::size_t i = 0; i < t.v.size(); ++i) {
        const float clamped = std::clamp(t.v[i], 0.0f, 1.0f);
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
    }
    return img;
}

}  // namespace mvc
