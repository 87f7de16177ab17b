#include "mvc/mixer.hpp"

#include "mvc/errors.hpp"

namespace mvc {

EmbeddingMatrix coarse_mix(const EmbeddingMatrix& base, const EmbeddingMatrix& donor, int r,
                           int s) {
    require(base.same_shape(donor), ErrorKind::shape, "coarse_mix: base/donor shape mismatch");
    require(1 <= r && r < s && s <= base.rows, ErrorKind::invalid_argument,
            "coarse_mix: need 1 <= r < s <= m");
    EmbeddingMatrix out = base;
    for (int i = r - 1; i <= s - 1; ++i)
        for (int j = 0; j < base.cols; ++j) out.at(i, j) = donor.at(i, j);
    return out;
}

EmbeddingMatrix fine_mix(const EmbeddingMatrix& base, const EmbeddingMatrix& donor, int row, int u,
                         int v) {
    require(base.same_shape(donor), ErrorKind::shape, "fine_mix: base/donor shape mismatch");
    require(1 <= row && row <= base.rows, ErrorKind::invalid_argument,
            "fine_mix: row out of range");
    require(1 <= u && u < v && v <= base.cols, ErrorKind::invalid_argument,
            "fine_mix: need 1 <= u < v <= d");
    EmbeddingMatrix out = base;
    for (int j = u - 1; j <= v - 1; ++j) out.at(row - 1, j) = donor.at(row - 1, j);
    return out;
}

std::pair<int, int> sample_index_pair(RngStream& rng, int bound) {
    require(bound >= 2, ErrorKind::invalid_argument, "sample_index_pair: bound must be >= 2");
    const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(bound)));
    int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(bound - 1)));
    if (b >= a) ++b;
    const int lo = std::min(a, b) + 1;
    const int hi = std::max(a, b) + 1;
    return {lo, hi};
}

namespace {

int sample_donor_excluding(RngStream& rng, int pool_size, int excluded) {
    int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(pool_size - 1)));
    if (j >= excluded) ++j;
    return j;
}

}  // namespace

std::vector<MixedConditioning> mix_embeddings(const std::vector<EmbeddingMatrix>& pool,
                                              const MixerConfig& config,
                                              const EmbeddingMatrix& null_emb,
                                              const std::string& class_label) {
    require(!pool.empty(), ErrorKind::invalid_argument, "mix_embeddings: empty pool");
    require(config.coarse_passes >= 0 && config.fine_passes >= 0, ErrorKind::config,
            "mix_embeddings: P and Q must be nonnegative");
    require(config.outputs_per_class >= 1, ErrorKind::config, "mix_embeddings: N_y must be >= 1");
    const int pool_size = static_cast<int>(pool.size());
    if (config.coarse_passes + config.fine_passes > 0)
        require(pool_size >= 2, ErrorKind::config,
                "mix_embeddings: mixing passes need at least two pool members");
    const int m = pool.front().rows;
    const int d = pool.front().cols;
    for (const EmbeddingMatrix& e : pool)
        require(e.rows == m && e.cols == d, ErrorKind::shape,
                "mix_embeddings: pool members must share one (m, d)");
    require(null_emb.rows == m && null_emb.cols == d, ErrorKind::shape,
            "mix_embeddings: null embedding shape mismatch");

    RngStream rng = RngStream(config.seed).derive(class_label);
    std::vector<MixedConditioning> outputs;
    outputs.reserve(static_cast<std::size_t>(config.outputs_per_class));
    for (int k = 0; k < config.outputs_per_class; ++k) {
        MixedConditioning mc;
        mc.class_label = class_label;
        mc.null_cond = null_emb;
        mc.base_index = static_cast<int>(rng.below(static_cast<std::uint64_t>(pool_size)));
        mc.cond = pool[static_cast<std::size_t>(mc.base_index)];
        for (int p = 0; p < config.coarse_passes; ++p) {
            const int donor = sample_donor_excluding(rng, pool_size, mc.base_index);
            const auto [r, s] = sample_index_pair(rng, m);
            mc.cond = coarse_mix(mc.cond, pool[static_cast<std::size_t>(donor)], r, s);
            mc.edits.push_back(MixEdit{donor, MixKind::coarse, 0, r, s});
        }
        for (int q = 0; q < config.fine_passes; ++q) {
            const int donor = sample_donor_excluding(rng, pool_size, mc.base_index);
            const auto [u, v] = sample_index_pair(rng, d);
            const int w = static_cast<int>(rng.below(static_cast<std::uint64_t>(m))) + 1;
            mc.cond = fine_mix(mc.cond, pool[static_cast<std::size_t>(donor)], w, u, v);
            mc.edits.push_back(MixEdit{donor, MixKind::fine, w, u, v});
        }
        outputs.push_back(std::move(mc));
    }
    return outputs;
}

EmbeddingMatrix replay_mix(const std::vector<EmbeddingMatrix>& pool, int base_index,
                           const std::vector<MixEdit>& edits) {
    require(base_index >= 0 && base_index < static_cast<int>(pool.size()),
            ErrorKind::invalid_argument, "replay base index out of range");
    EmbeddingMatrix out = pool[static_cast<std::size_t>(base_index)];
    for (const MixEdit& e : edits) {
        require(e.donor_index >= 0 && e.donor_index < static_cast<int>(pool.size()),
                ErrorKind::invalid_argument, "replay donor index out of range");
        const EmbeddingMatrix& donor = pool[static_cast<std::size_t>(e.donor_index)];
        out = e.kind == MixKind::coarse ? coarse_mix(out, donor, e.lo, e.hi)
                                        : fine_mix(out, donor, e.row, e.lo, e.hi);
    }
    return out;
}

std::vector<EmbeddingMatrix> embed_pool(const TokenEmbedder& embedder, const CaptionPool& pool,
                                        std::vector<std::string>* warnings) {
    std::vector<EmbeddingMatrix> out;
    out.reserve(pool.captions.size());
    for (const Caption& c : pool.captions) out.push_back(embed_caption(embedder, c, warnings));
    return out;
}

}  // namespace mvc
