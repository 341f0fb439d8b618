#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pli/corpus.hpp"
#include "pli/pair_encoder.hpp"
#include "pli/vector_store.hpp"

namespace pli {

struct InteractionConfig {
    std::size_t max_query_paragraphs = 54;  ///< N
    std::size_t max_cand_paragraphs = 40;   ///< M

    void validate() const;
};

/// Relevance vectors of the first n query paragraphs against the first m
/// candidate paragraphs, row-major (i, j, k). Shorter documents give smaller
/// matrices; there is no padding.
struct InteractionMatrix {
    std::string query_id;
    std::string cand_id;
    std::size_t n = 0;
    std::size_t m = 0;
    std::size_t dim = 0;
    std::vector<float> values;

    float at(std::size_t i, std::size_t j, std::size_t k) const { return values[(i * m + j) * dim + k]; }
    std::span<const float> cell(std::size_t i, std::size_t j) const {
        return std::span<const float>(values).subspan((i * m + j) * dim, dim);
    }

    bool operator==(const InteractionMatrix&) const = default;
};

/// One pooled vector per query paragraph.
struct DocRelevanceSequence {
    std::string query_id;
    std::string cand_id;
    std::size_t n = 0;
    std::size_t dim = 0;
    std::vector<float> values;

    std::span<const float> step(std::size_t i) const { return std::span<const float>(values).subspan(i * dim, dim); }

    bool operator==(const DocRelevanceSequence&) const = default;
};

/// Where pair relevance vectors come from.
class RelevanceSource {
public:
    virtual ~RelevanceSource() = default;
    virtual std::size_t dim() const = 0;
    /// Vector for query paragraph `i` against candidate paragraph `j`.
    virtual void represent(const Document& q, std::size_t i, const Document& c, std::size_t j,
                           std::span<float> out) const = 0;
};

class EncoderSource final : public RelevanceSource {
public:
    explicit EncoderSource(const MicroEncoder& enc) : enc_(enc) {}
    std::size_t dim() const override { return enc_.dim(); }
    void represent(const Document& q, std::size_t i, const Document& c, std::size_t j,
                   std::span<float> out) const override;

private:
    const MicroEncoder& enc_;
};

class VectorStoreSource final : public RelevanceSource {
public:
    explicit VectorStoreSource(const ExternalVectorStore& store) : store_(store) {}
    std::size_t dim() const override { return store_.dim(); }
    /// Throws DataError naming the cell on a miss.
    void represent(const Document& q, std::size_t i, const Document& c, std::size_t j,
                   std::span<float> out) const override;

private:
    const ExternalVectorStore& store_;
};

InteractionMatrix build_interaction_matrix(const RelevanceSource& source, const Document& query,
                                           const Document& cand, const InteractionConfig& cfg);

struct DocPair {
    const Document* query = nullptr;
    const Document* cand = nullptr;
};

/// OpenMP over pairs; element-wise identical to the serial version.
std::vector<InteractionMatrix> build_interaction_matrices(const RelevanceSource& source,
                                                          std::span<const DocPair> pairs,
                                                          const InteractionConfig& cfg);
std::vector<InteractionMatrix> build_interaction_matrices_serial(const RelevanceSource& source,
                                                                 std::span<const DocPair> pairs,
                                                                 const InteractionConfig& cfg);

/// Component-wise max over the candidate-paragraph axis.
DocRelevanceSequence maxpool_over_candidates(const InteractionMatrix& mat);

/// OpenMP over matrices.
std::vector<DocRelevanceSequence> maxpool_batch(std::span<const InteractionMatrix> mats);
std::vector<DocRelevanceSequence> maxpool_batch_serial(std::span<const InteractionMatrix> mats);

/// Collects matrix cells into a vector store.
ExternalVectorStore to_vector_store(std::span<const InteractionMatrix> mats, std::uint32_t dim);

/// Cache layout: "PLIM", u32 version, u32 d_repr, u64 count, then per matrix
/// str query_id, str cand_id, u16 n, u16 m, n*m*d_repr x f32. Written atomically.
inline constexpr std::uint32_t kInteractionCacheVersion = 1;
void write_interaction_cache(std::span<const InteractionMatrix> mats, std::uint32_t dim,
                             const std::filesystem::path& path);

struct InteractionCache {
    std::uint32_t dim = 0;
    std::vector<InteractionMatrix> matrices;
};

InteractionCache read_interaction_cache(const std::filesystem::path& path,
                                        std::optional<std::uint32_t> expected_dim = std::nullopt);

}  // namespace pli
