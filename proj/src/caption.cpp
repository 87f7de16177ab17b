#include "mvc/caption.hpp"

#include <cctype>
#include <fstream>
#include <map>

#include "mvc/container.hpp"
#include "mvc/errors.hpp"

namespace mvc {

CaptionPool make_pool(const std::string& class_label, std::vector<Caption> captions) {
    require(!captions.empty(), ErrorKind::invalid_argument,
            "caption pool for '" + class_label + "' is empty");
    for (const Caption& c : captions)
        require(c.class_label == class_label, ErrorKind::invalid_argument,
                "caption label '" + c.class_label + "' does not match pool '" + class_label + "'");
    return CaptionPool{class_label, std::move(captions)};
}

Caption build_caption(const std::string& class_label,
                      const std::optional<std::string>& descriptor) {
    require(!class_label.empty(), ErrorKind::invalid_argument, "empty class label");
    std::string text = std::string(kCaptionPrefix) + class_label;
    if (descriptor) text += ", " + *descriptor;
    return Caption{class_label, std::move(text), CaptionSource::templated};
}

TokenEmbedder::TokenEmbedder(int m, int d, std::uint64_t seed) : m_(m), d_(d), seed_(seed) {
    require(m >= 2 && d >= 2, ErrorKind::config, "token embedder requires m >= 2 and d >= 2");
}

std::vector<std::string> TokenEmbedder::tokenize(std::string_view text) {
    static constexpr std::string_view kSpace = " \t\n\r\f\v";
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        if (kSpace.find(ch) != std::string_view::npos) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else {
            if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
            current.push_back(ch);
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

EmbeddingMatrix embed_caption(const TokenEmbedder& embedder, const Caption& caption,
                              std::vector<std::string>* warnings) {
    std::vector<std::string> tokens = TokenEmbedder::tokenize(caption.text);
    const int m = embedder.m();
    const int d = embedder.d();
    if (static_cast<int>(tokens.size()) > m) {
        if (warnings)
            warnings->push_back("caption '" + caption.text + "' truncated from " +
                                std::to_string(tokens.size()) + " to " + std::to_string(m) +
                                " tokens");
        tokens.resize(static_cast<std::size_t>(m));
    }
    EmbeddingMatrix out(m, d);  // padding rows stay zero
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::uint64_t state = fnv1a64(tokens[i]) ^ splitmix_mix(embedder.seed());
        for (int j = 0; j < d; ++j) {
            const std::uint64_t z = splitmix_next(state);
            const double unit = static_cast<double>(z >> 11) * 0x1.0p-53;
            out.at(static_cast<int>(i), j) = static_cast<float>(2.0 * unit - 1.0);
        }
    }
    return out;
}

EmbeddingMatrix null_embedding(const TokenEmbedder& embedder) {
    return EmbeddingMatrix(embedder.m(), embedder.d());
}

void write_embedding_archive(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, EmbeddingMatrix>>& entries) {
    require(!entries.empty(), ErrorKind::invalid_argument, "nothing to write");
    const int m = entries.front().second.rows;
    const int d = entries.front().second.cols;
    nlohmann::json labels = nlohmann::json::array();
    std::vector<float> payload;
    payload.reserve(entries.size() * static_cast<std::size_t>(m) * d);
    for (const auto& [label, matrix] : entries) {
        require(matrix.rows == m && matrix.cols == d, ErrorKind::shape,
                "archive entries must share one (m, d)");
        labels.push_back(label);
        payload.insert(payload.end(), matrix.v.begin(), matrix.v.end());
    }
    nlohmann::json header = {{"version", 1},
                             {"m", m},
                             {"d", d},
                             {"count", entries.size()},
                             {"labels", std::move(labels)}};
    write_float_container(path, header, payload);
}

std::vector<std::pair<std::string, EmbeddingMatrix>> import_embeddings(
    const std::filesystem::path& path, int expected_m, int expected_d) {
    auto [header, payload] = read_float_container(path);
    if (!header.contains("version") || !header.contains("m") || !header.contains("d") ||
        !header.contains("count") || !header.contains("labels"))
        fail(ErrorKind::parse, "embedding archive header missing fields: " + path.string());
    if (header["version"].get<int>() != 1)
        fail(ErrorKind::parse, "unsupported embedding archive version");
    const int m = header["m"].get<int>();
    const int d = header["d"].get<int>();
    const std::size_t count = header["count"].get<std::size_t>();
    require(m == expected_m && d == expected_d, ErrorKind::shape,
            "archive is " + std::to_string(m) + "x" + std::to_string(d) + ", run expects " +
                std::to_string(expected_m) + "x" + std::to_string(expected_d));
    if (header["labels"].size() != count)
        fail(ErrorKind::parse, "label count does not match header count");
    const std::size_t per = static_cast<std::size_t>(m) * d;
    if (payload.size() != count * per)
        fail(ErrorKind::parse, "embedding archive payload size mismatch: " + path.string());
    std::vector<std::pair<std::string, EmbeddingMatrix>> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        EmbeddingMatrix e(m, d);
        std::copy(payload.begin() + static_cast<std::ptrdiff_t>(k * per),
                  payload.begin() + static_cast<std::ptrdiff_t>((k + 1) * per), e.v.begin());
        for (float x : e.v)
            require(std::isfinite(x), ErrorKind::parse, "non-finite embedding value in archive");
        out.emplace_back(header["labels"][k].get<std::string>(), std::move(e));
    }
    return out;
}

std::vector<CaptionPool> load_captions_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::storage, "cannot open captions file: " + path.string());
    std::map<std::string, std::vector<Caption>> by_label;
    std::vector<std::string> label_order;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
            fail(ErrorKind::parse,
                 "captions line " + std::to_string(line_no) + " is not 'label<TAB>caption'");
        std::string label = line.substr(0, tab);
        std::string text = line.substr(tab + 1);
        if (!by_label.count(label)) label_order.push_back(label);
        by_label[label].push_back(Caption{label, std::move(text), CaptionSource::imported});
    }
    std::vector<CaptionPool> pools;
    pools.reserve(label_order.size());
    for (const std::string& label : label_order)
        pools.push_back(make_pool(label, std::move(by_label[label])));
    return pools;
}

void write_captions_file(const std::filesystem::path& path,
                         const std::vector<std::pair<std::string, std::string>>& records) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), ErrorKind::storage, "cannot open for writing: " + path.string());
    for (const auto& [label, text] : records) out << label << '\t' << text << '\n';
    require(out.good(), ErrorKind::storage, "write failed: " + path.string());
}

}  // namespace mvc
