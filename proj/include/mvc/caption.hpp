#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvc/rng.hpp"

namespace mvc {

inline constexpr std::string_view kCaptionPrefix = "This is an image of ";

// m x d real matrix standing in for a CLIP text embedding: m token rows,
// d embedding dims.
struct EmbeddingMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> v;

    EmbeddingMatrix() = default;
    EmbeddingMatrix(int m, int d) : rows(m), cols(d), v(static_cast<std::size_t>(m) * d, 0.0f) {}

    float& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
    const float& at(int i, int j) const { return v[static_cast<std::size_t>(i) * cols + j]; }
    bool same_shape(const EmbeddingMatrix& o) const { return rows == o.rows && cols == o.cols; }
    bool operator==(const EmbeddingMatrix& o) const {
        return rows == o.rows && cols == o.cols && v == o.v;
    }
};

enum class CaptionSource { templated, imported };

struct Caption {
    std::string class_label;
    std::string text;
    CaptionSource source = CaptionSource::templated;
};

struct CaptionPool {
    std::string class_label;
    std::vector<Caption> captions;  // K_y >= 1, all sharing class_label
};

CaptionPool make_pool(const std::string& class_label, std::vector<Caption> captions);

// Templated caption: "This is an image of <y>" plus ", <descriptor>" when a
// descriptor is given.
Caption build_caption(const std::string& class_label,
                      const std::optional<std::string>& descriptor = std::nullopt);

// Deterministic hash-to-vector stand-in for the CLIP text encoder.
//
// Tokenization: bytes A-Z are lowercased, tokens are maximal runs of
// non-whitespace (whitespace = space \t \n \r \f \v). At most m tokens are
// kept; excess tokens are dropped with a warning.
//
// Row for token i: state = fnv1a64(token) ^ splitmix_mix(seed); column j is
// 2*((splitmix_next(state) >> 11) * 2^-53) - 1, computed in double and
// narrowed to float. Successive columns advance the same state. Rows past the
// last token hold the padding vector, which is all zeros, so the empty text
// embeds to the zero matrix.
class TokenEmbedder {
  public:
    TokenEmbedder(int m, int d, std::uint64_t seed);

    int m() const { return m_; }
    int d() const { return d_; }
    std::uint64_t seed() const { return seed_; }

    static std::vector<std::string> tokenize(std::string_view text);

  private:
    int m_;
    int d_;
    std::uint64_t seed_;
};

EmbeddingMatrix embed_caption(const TokenEmbedder& embedder, const Caption& caption,
                              std::vector<std::string>* warnings = nullptr);

EmbeddingMatrix null_embedding(const TokenEmbedder& embedder);

// Embedding archive: one compact JSON header line
//   {"version":1,"m":M,"d":D,"count":N,"labels":[...]}
// terminated by '\n', followed by N little-endian float32 matrices, each M*D
// values in row-major order.
void write_embedding_archive(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, EmbeddingMatrix>>& entries);

std::vector<std::pair<std::string, EmbeddingMatrix>> import_embeddings(
    const std::filesystem::path& path, int expected_m, int expected_d);

// Captions file: UTF-8, one "label<TAB>caption" record per line.
std::vector<CaptionPool> load_captions_file(const std::filesystem::path& path);
void write_captions_file(const std::filesystem::path& path,
                         const std::vector<std::pair<std::string, std::string>>& records);

}  // namespace mvc
