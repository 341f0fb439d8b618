#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pli/corpus.hpp"

namespace pli {

/// Shape of a generated benchmark. Defaults follow the legal document task:
/// 200 given candidates per query with about five relevant ones.
struct SyntheticConfig {
    std::uint64_t seed = 7;
    std::size_t n_queries = 50;
    std::size_t pool_size = 200;
    std::size_t n_relevant_per_query = 5;
    std::size_t vocab_size = 4000;
    std::size_t doc_len_tokens = 512;
    std::size_t paragraph_len = 64;

    /// Share of the vocabulary reserved for topic words; the rest is background.
    double topic_vocab_fraction = 0.25;
    std::size_t topic_words_per_query = 12;
    /// Fraction of tokens drawn from the query topic inside an injected paragraph.
    double topic_density = 0.5;
    std::size_t query_topical_paragraphs = 2;

    /// Non-relevant candidates with query-topic words spread thinly over the
    /// indexed prefix. They outscore relevant documents under bag-of-words
    /// ranking while lacking a dense matching paragraph.
    std::size_t decoys_per_query = 15;
    double decoy_density = 0.15;
    /// Non-relevant candidates carrying a dense paragraph of an unrelated topic.
    std::size_t offtopic_per_query = 10;

    /// Leading tokens seen by first-stage retrieval; relevant paragraphs are
    /// injected inside this prefix.
    std::size_t prefix_tokens = 250;

    /// Paragraph-level task: candidates per query paragraph and the chance of
    /// a second relevant paragraph.
    std::size_t para_pool_size = 32;
    double para_extra_relevant_prob = 0.12;
    /// Share of paragraph negatives drawn from the topical paragraphs of
    /// decoy and off-topic candidates.
    double para_hard_negative_fraction = 0.5;

    /// Fraction of queries held out as the test split.
    double test_fraction = 0.2;
};

struct SyntheticBenchmark {
    std::vector<RawDocument> queries;
    std::vector<RawDocument> documents;
    QrelSet qrels;
    CandidatePool pools;
    /// Paragraph-level judgements keyed by `doc_id#index`.
    QrelSet para_qrels;
    CandidatePool para_pools;
    std::vector<std::string> train_queries;
    std::vector<std::string> test_queries;
    /// Topic word strings per query, in query order.
    std::vector<std::vector<std::string>> query_topics;
};

/// Deterministic for a fixed config. Throws std::invalid_argument when counts
/// are inconsistent or the vocabulary is too small to keep topics apart from
/// the background distribution.
SyntheticBenchmark generate_synthetic_benchmark(const SyntheticConfig& cfg);

/// Writes queries.jsonl, corpus.jsonl, qrels.txt, pools.txt, para_qrels.txt,
/// para_pools.txt, train_queries.txt and test_queries.txt under `dir`.
void write_benchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir);
SyntheticBenchmark read_benchmark(const std::filesystem::path& dir);

}  // namespace pli
