#include "pli/interaction.hpp"

#include <algorithm>
#include <limits>

#include "pli/common.hpp"

namespace pli {

void InteractionConfig::validate() const {
    if (max_query_paragraphs < 1 || max_cand_paragraphs < 1) {
        throw std::invalid_argument("interaction: N and M must be >= 1");
    }
}

void EncoderSource::represent(const Document& q, std::size_t i, const Document& c, std::size_t j,
                              std::span<float> out) const {
    const auto r = enc_.encode(q.paragraphs[i].tokens, c.paragraphs[j].tokens);
    for (std::size_t k = 0; k < r.size(); ++k) out[k] = static_cast<float>(r[k]);
}

void VectorStoreSource::represent(const Document& q, std::size_t i, const Document& c, std::size_t j,
                                  std::span<float> out) const {
    const CellKey key{q.id, c.id, static_cast<std::uint16_t>(i), static_cast<std::uint16_t>(j)};
    const auto* v = store_.find(key);
    if (v == nullptr) throw DataError("vector store has no entry for cell " + to_string(key));
    std::copy(v->begin(), v->end(), out.begin());
}

InteractionMatrix build_interaction_matrix(const RelevanceSource& source, const Document& query,
                                           const Document& cand, const InteractionConfig& cfg) {
    cfg.validate();
    if (query.paragraphs.empty()) throw DataError("interaction: query document " + query.id + " is empty");
    if (cand.paragraphs.empty()) throw DataError("interaction: candidate document " + cand.id + " is empty");
    InteractionMatrix mat;
    mat.query_id = query.id;
    mat.cand_id = cand.id;
    mat.n = std::min(cfg.max_query_paragraphs, query.paragraphs.size());
    mat.m = std::min(cfg.max_cand_paragraphs, cand.paragraphs.size());
    mat.dim = source.dim();
    mat.values.resize(mat.n * mat.m * mat.dim);
    for (std::size_t i = 0; i < mat.n; ++i) {
        for (std::size_t j = 0; j < mat.m; ++j) {
            source.represent(query, i, cand, j,
                             std::span<float>(mat.values).subspan((i * mat.m + j) * mat.dim, mat.dim));
        }
    }
    return mat;
}

std::vector<InteractionMatrix> build_interaction_matrices(const RelevanceSource& source,
                                                          std::span<const DocPair> pairs,
                                                          const InteractionConfig& cfg) {
    std::vector<InteractionMatrix> out(pairs.size());
    std::vector<std::string> errors(pairs.size());
    const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t p = 0; p < n; ++p) {
        const auto idx = static_cast<std::size_t>(p);
        try {
            out[idx] = build_interaction_matrix(source, *pairs[idx].query, *pairs[idx].cand, cfg);
        } catch (const std::exception& e) {
            errors[idx] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw DataError(e);
    }
    return out;
}

std::vector<InteractionMatrix> build_interaction_matrices_serial(const RelevanceSource& source,
                                                                 std::span<const DocPair> pairs,
                                                                 const InteractionConfig& cfg) {
    std::vector<InteractionMatrix> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(build_interaction_matrix(source, *p.query, *p.cand, cfg));
    return out;
}

DocRelevanceSequence maxpool_over_candidates(const InteractionMatrix& mat) {
    if (mat.m == 0) throw std::invalid_argument("maxpool_over_candidates: matrix has no candidate paragraphs");
    DocRelevanceSequence seq;
    seq.query_id = mat.query_id;
    seq.cand_id = mat.cand_id;
    seq.n = mat.n;
    seq.dim = mat.dim;
    seq.values.resize(mat.n * mat.dim);
    for (std::size_t i = 0; i < mat.n; ++i) {
        float* row = seq.values.data() + i * mat.dim;
        auto first = mat.cell(i, 0);
        std::copy(first.begin(), first.end(), row);
        for (std::size_t j = 1; j < mat.m; ++j) {
            auto cell = mat.cell(i, j);
            for (std::size_t k = 0; k < mat.dim; ++k) row[k] = std::max(row[k], cell[k]);
        }
    }
    return seq;
}

std::vector<DocRelevanceSequence> maxpool_batch(std::span<const InteractionMatrix> mats) {
    std::vector<DocRelevanceSequence> out(mats.size());
    const auto n = static_cast<std::ptrdiff_t>(mats.size());
    bool empty_found = false;
#pragma omp parallel for schedule(static) reduction(|| : empty_found)
    for (std::ptrdiff_t p = 0; p < n; ++p) {
        const auto& mat = mats[static_cast<std::size_t>(p)];
        if (mat.m == 0) {
            empty_found = true;
            continue;
        }
        out[static_cast<std::size_t>(p)] = maxpool_over_candidates(mat);
    }
    if (empty_found) throw std::invalid_argument("maxpool_batch: matrix has no candidate paragraphs");
    return out;
}

std::vector<DocRelevanceSequence> maxpool_batch_serial(std::span<const InteractionMatrix> mats) {
    std::vector<DocRelevanceSequence> out;
    out.reserve(mats.size());
    for (const auto& m : mats) out.push_back(maxpool_over_candidates(m));
    return out;
}

ExternalVectorStore to_vector_store(std::span<const InteractionMatrix> mats, std::uint32_t dim) {
    ExternalVectorStore store(dim);
    for (const auto& mat : mats) {
        for (std::size_t i = 0; i < mat.n; ++i) {
            for (std::size_t j = 0; j < mat.m; ++j) {
                store.put({mat.query_id, mat.cand_id, static_cast<std::uint16_t>(i), static_cast<std::uint16_t>(j)},
                          mat.cell(i, j));
            }
        }
    }
    return store;
}

void write_interaction_cache(std::span<const InteractionMatrix> mats, std::uint32_t dim,
                             const std::filesystem::path& path) {
    ByteWriter w;
    w.raw("PLIM");
    w.u32(kInteractionCacheVersion);
    w.u32(dim);
    w.u64(mats.size());
    constexpr auto kMax = std::numeric_limits<std::uint16_t>::max();
    for (const auto& m : mats) {
        if (m.dim != dim) throw std::invalid_argument("interaction cache: matrix dimension differs from cache dimension");
        if (m.n > kMax || m.m > kMax) throw std::invalid_argument("interaction cache: matrix too large");
        w.str(m.query_id);
        w.str(m.cand_id);
        w.u16(static_cast<std::uint16_t>(m.n));
        w.u16(static_cast<std::uint16_t>(m.m));
        for (float x : m.values) w.f32(x);
    }
    write_file_atomic(path, w.bytes());
}

InteractionCache read_interaction_cache(const std::filesystem::path& path, std::optional<std::uint32_t> expected_dim) {
    if (!std::filesystem::exists(path)) throw DataError("interaction cache not found: " + path.string());
    const std::string bytes = read_file(path);
    ByteReader r(bytes, path.string());
    r.expect_magic("PLIM");
    if (auto v = r.u32(); v != kInteractionCacheVersion) r.fail("unsupported cache version " + std::to_string(v));
    InteractionCache cache;
    cache.dim = r.u32();
    if (expected_dim && cache.dim != *expected_dim) {
        r.fail("dimension mismatch: cache has " + std::to_string(cache.dim) + ", expected " +
               std::to_string(*expected_dim));
    }
    const auto count = r.u64();
    for (std::uint64_t c = 0; c < count; ++c) {
        InteractionMatrix m;
        m.query_id = r.str();
        m.cand_id = r.str();
        m.n = r.u16();
        m.m = r.u16();
        m.dim = cache.dim;
        const std::size_t len = m.n * m.m * m.dim;
        if (len > r.remaining() / 4) r.fail("truncated matrix " + m.query_id + "/" + m.cand_id);
        m.values.resize(len);
        for (auto& x : m.values) x = r.f32();
        cache.matrices.push_back(std::move(m));
    }
    if (!r.at_end()) r.fail("trailing bytes");
    return cache;
}

}  // namespace pli
