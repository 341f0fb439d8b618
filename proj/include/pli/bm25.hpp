#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pli/corpus.hpp"

namespace pli {

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
    /// Documents and queries are cut to this many leading tokens.
    std::size_t doc_prefix_len = 250;

    void validate() const;
    bool operator==(const Bm25Params&) const = default;
};

struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
    bool operator==(const Posting&) const = default;
};

/// ln(1 + (N - df + 0.5) / (df + 0.5)); non-negative and non-increasing in df.
double bm25_idf(std::size_t n_docs, std::size_t df);

/// Term -> postings over documents truncated to the indexed prefix.
///
/// Internal document numbers follow ascending document id, so ordering by
/// document number is ordering by id.
class InvertedIndex {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    static InvertedIndex build(std::span<const Document> docs, const Bm25Params& params);

    std::size_t num_docs() const { return doc_ids_.size(); }
    double avgdl() const { return avgdl_; }
    std::uint32_t doc_length(std::uint32_t docno) const { return lengths_[docno]; }
    const std::string& doc_id(std::uint32_t docno) const { return doc_ids_[docno]; }
    std::optional<std::uint32_t> docno(const std::string& doc_id) const;
    std::span<const Posting> postings(TokenId term) const;
    std::size_t df(TokenId term) const { return postings(term).size(); }
    std::size_t term_space() const { return postings_.size(); }
    const Bm25Params& params() const { return params_; }

    /// Binary layout: "PLIX", u32 version, f64 k1, f64 b, u64 prefix,
    /// u64 n_docs, n_docs x (str id, u32 length), u64 term_space,
    /// u64 n_terms, n_terms x (u32 term, u32 df, df x (u32 doc delta, u32 tf)).
    void save(const std::filesystem::path& path) const;
    static InvertedIndex load(const std::filesystem::path& path);

    bool operator==(const InvertedIndex& other) const;

private:
    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, std::uint32_t> docnos_;
    std::vector<std::uint32_t> lengths_;
    double avgdl_ = 0.0;
    std::vector<std::vector<Posting>> postings_;
};

/// First `params.doc_prefix_len` tokens, the representation used on both sides.
std::span<const TokenId> bm25_prefix(std::span<const TokenId> tokens, const Bm25Params& params);

/// BM25 of `query` against one document. Repeated query terms count once per
/// occurrence; reserved token ids (PAD, UNK, CLS, SEP) never match. Terms are
/// accumulated in ascending term-id order, the same order retrieval uses.
double bm25_score(std::span<const TokenId> query, const std::string& doc_id, const InvertedIndex& index,
                  const Bm25Params& params);

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
    bool operator==(const ScoredDoc&) const = default;
};

using RankedList = std::vector<ScoredDoc>;

/// Top-K by descending score, ties by ascending doc id. With `pool`, only
/// pool members are ranked; otherwise every indexed document is.
RankedList retrieve_topk(std::span<const TokenId> query, std::size_t k, const InvertedIndex& index,
                         const Bm25Params& params, const std::vector<std::string>* pool = nullptr);

/// query id -> ranked list.
class RetrievalRun {
public:
    void set(const std::string& query_id, RankedList list) { runs_[query_id] = std::move(list); }
    const RankedList& ranked(const std::string& query_id) const;
    bool has_query(const std::string& query_id) const { return runs_.contains(query_id); }
    std::vector<std::string> queries() const;
    const std::map<std::string, RankedList>& entries() const { return runs_; }

    /// TREC run: `query_id Q0 doc_id rank score tag`.
    void save(const std::filesystem::path& path, const std::string& tag = "bm25") const;
    static RetrievalRun load(const std::filesystem::path& path);

    bool operator==(const RetrievalRun&) const = default;

private:
    std::map<std::string, RankedList> runs_;
};

/// Retrieves every query in parallel (OpenMP over queries). Each query uses
/// its pool from `pools` when given.
RetrievalRun retrieve_batch(std::span<const Document> queries, std::size_t k, const InvertedIndex& index,
                            const Bm25Params& params, const CandidatePool* pools = nullptr);
/// Single-threaded reference of retrieve_batch.
RetrievalRun retrieve_batch_serial(std::span<const Document> queries, std::size_t k, const InvertedIndex& index,
                                   const Bm25Params& params, const CandidatePool* pools = nullptr);

/// Micro-averaged recall of the top-k over queries with at least one relevant doc.
double recall_at_k(const RetrievalRun& run, const QrelSet& qrels, std::size_t k);

/// Gold-relevant documents plus randomly sampled non-relevant run candidates,
/// `target_size` per query (fewer when the run is too short).
CandidatePool augment_training_pool(const RetrievalRun& run, const QrelSet& qrels, std::size_t target_size,
                                    std::uint64_t seed);

/// Keeps the top `k` of each ranked list as a pool.
CandidatePool pool_from_run(const RetrievalRun& run, std::size_t k);

}  // namespace pli
