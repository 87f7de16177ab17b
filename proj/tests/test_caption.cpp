#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mvc/caption.hpp"

using namespace mvc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "mvc-caption-tests";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("templated captions carry the class prefix") {
    CHECK(build_caption("circle").text == "This is an image of circle");
    CHECK(build_caption("cross", std::optional<std::string>("a small dim cross")).text ==
          "This is an image of cross, a small dim cross");
    CHECK(build_caption("circle").class_label == "circle");
    CHECK(build_caption("circle").source == CaptionSource::templated);
}

TEST_CASE("tokenization lowercases and splits on whitespace") {
    CHECK(TokenEmbedder::tokenize("A  b\tC\n") == std::vector<std::string>{"a", "b", "c"});
    CHECK(TokenEmbedder::tokenize("") == std::vector<std::string>{});
    CHECK(TokenEmbedder::tokenize("one") == std::vector<std::string>{"one"});
}

TEST_CASE("embedding rows match the frozen hash-trace oracle") {
    // m=4, d=3, seed 7, text "a b": row 0 follows from fnv1a64("a") ^
    // splitmix_mix(7) advanced by splitmix, row 1 from "b", rows 2..3 padding.
    const TokenEmbedder embedder(4, 3, 7);
    const EmbeddingMatrix e = embed_caption(embedder, Caption{"", "a b"});
    REQUIRE(e.rows == 4);
    REQUIRE(e.cols == 3);
    CHECK(e.at(0, 0) == doctest::Approx(-0.0731090978f).epsilon(1e-6));
    CHECK(e.at(0, 1) == doctest::Approx(0.0447076969f).epsilon(1e-6));
    CHECK(e.at(0, 2) == doctest::Approx(-0.0903558731f).epsilon(1e-6));
    CHECK(e.at(1, 0) == doctest::Approx(0.409331143f).epsilon(1e-6));
    CHECK(e.at(1, 1) == doctest::Approx(0.371188492f).epsilon(1e-6));
    CHECK(e.at(1, 2) == doctest::Approx(0.894176543f).epsilon(1e-6));
    for (int i = 2; i < 4; ++i)
        for (int j = 0; j < 3; ++j) CHECK(e.at(i, j) == 0.0f);
}

TEST_CASE("embedding values stay in (-1, 1) and are deterministic") {
    const TokenEmbedder embedder(8, 16, 3);
    const EmbeddingMatrix a = embed_caption(embedder, build_caption("circle"));
    const EmbeddingMatrix b = embed_caption(embedder, build_caption("circle"));
    CHECK(a == b);
    for (const float v : a.v) {
        CHECK(v > -1.0f);
        CHECK(v < 1.0f);
    }
    CHECK(a.v != embed_caption(embedder, build_caption("square")).v);
}

TEST_CASE("null embedding is the zero matrix") {
    const TokenEmbedder embedder(4, 3, 7);
    const EmbeddingMatrix z = null_embedding(embedder);
    CHECK(z.rows == 4);
    CHECK(z.cols == 3);
    for (const float v : z.v) CHECK(v == 0.0f);
    CHECK(embed_caption(embedder, Caption{"", ""}) == z);
}

TEST_CASE("excess tokens drop with a warning") {
    const TokenEmbedder embedder(2, 3, 7);
    std::vector<std::string> warnings;
    const EmbeddingMatrix full = embed_caption(embedder, Caption{"", "a b c d"}, &warnings);
    CHECK(warnings.size() == 1);
    const EmbeddingMatrix head = embed_caption(embedder, Caption{"", "a b"});
    CHECK(full == head);
}

TEST_CASE("embedding archive round trips bit-exactly") {
    const TokenEmbedder embedder(4, 3, 7);
    std::vector<std::pair<std::string, EmbeddingMatrix>> entries = {
        {"circle/0", embed_caption(embedder, build_caption("circle"))},
        {"square/0", embed_caption(embedder, build_caption("square"))},
    };
    const fs::path path = temp_dir() / "archive.emb";
    write_embedding_archive(path, entries);
    const auto loaded = import_embeddings(path, 4, 3);
    REQUIRE(loaded.size() == entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        CHECK(loaded[i].first == entries[i].first);
        CHECK(loaded[i].second == entries[i].second);
    }
    CHECK_THROWS_AS(import_embeddings(path, 5, 3), Error);
}

TEST_CASE("captions file round trips and groups into pools") {
    const fs::path path = temp_dir() / "captions.tsv";
    write_captions_file(path, {{"circle", "This is an image of circle"},
                               {"circle", "This is an image of circle, small"},
                               {"square", "This is an image of square"}});
    const std::vector<CaptionPool> pools = load_captions_file(path);
    REQUIRE(pools.size() == 2);
    CHECK(pools[0].class_label == "circle");
    CHECK(pools[0].captions.size() == 2);
    CHECK(pools[1].class_label == "square");
    CHECK(pools[1].captions[0].text == "This is an image of square");
}

TEST_CASE("pools reject mixed labels") {
    CHECK_THROWS_AS(make_pool("circle", {Caption{"square", "x"}}), Error);
    CHECK_THROWS_AS(make_pool("circle", {}), Error);
}
