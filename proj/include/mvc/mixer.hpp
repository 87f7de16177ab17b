#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mvc/caption.hpp"
#include "mvc/rng.hpp"

namespace mvc {

struct MixerConfig {
    int coarse_passes = 1;   // P
    int fine_passes = 2;     // Q
    int outputs_per_class = 8;  // N_y
    std::uint64_t seed = 0;
};

enum class MixKind { coarse, fine };

struct MixEdit {
    int donor_index = 0;  // pool index the replacement came from
    MixKind kind = MixKind::coarse;
    // coarse: rows lo..hi (1-based, inclusive), row = 0.
    // fine:   columns lo..hi (1-based, inclusive) within `row` (1-based).
    int row = 0;
    int lo = 0;
    int hi = 0;
};

struct MixedConditioning {
    EmbeddingMatrix cond;       // the mixed embedding
    EmbeddingMatrix null_cond;  // embedding of the empty text, same (m, d)
    std::string class_label;
    int base_index = 0;             // pool index the base was copied from
    std::vector<MixEdit> edits;     // exactly P coarse entries then Q fine entries
};

// Replace rows r..s (1-based, inclusive) of base with donor's rows.
EmbeddingMatrix coarse_mix(const EmbeddingMatrix& base, const EmbeddingMatrix& donor, int r, int s);

// Replace columns u..v (1-based, inclusive) of row `row` (1-based) with donor's.
EmbeddingMatrix fine_mix(const EmbeddingMatrix& base, const EmbeddingMatrix& donor, int row, int u,
                         int v);

// Uniform over unordered distinct pairs from {1..bound}, returned lo < hi.
// Draw order: a = below(bound), b = below(bound-1) with b incremented when
// b >= a, then sorted. Both draws are 0-based internally, result is 1-based.
std::pair<int, int> sample_index_pair(RngStream& rng, int bound);

// The mixing procedure. For each of the N_y outputs, on a stream derived from
// (config.seed, class_label):
//   1. base = below(K)                               (copy of pool[base])
//   2. P coarse passes: donor = below(K-1) skipping base, then
//      (r, s) = sample_index_pair(rng, m), rows r..s replaced.
//   3. Q fine passes: donor = below(K-1) skipping base, then
//      (u, v) = sample_index_pair(rng, d), then row w = below(m)+1,
//      entries (w, u..v) replaced.
// Donor exclusion is by the base's original pool index, fixed for all passes.
// Pool members are never mutated.
std::vector<MixedConditioning> mix_embeddings(const std::vector<EmbeddingMatrix>& pool,
                                              const MixerConfig& config,
                                              const EmbeddingMatrix& null_emb,
                                              const std::string& class_label = "");

// Rebuilds a mixed embedding from recorded provenance (base pool index plus
// the edit list) without consuming any randomness. Bit-identical to the
// original mix_embeddings output.
EmbeddingMatrix replay_mix(const std::vector<EmbeddingMatrix>& pool, int base_index,
                           const std::vector<MixEdit>& edits);

// Pool takes (m, d) from the embedder; convenience over embed_caption.
std::vector<EmbeddingMatrix> embed_pool(const TokenEmbedder& embedder, const CaptionPool& pool,
                                        std::vector<std::string>* warnings = nullptr);

}  // namespace mvc
