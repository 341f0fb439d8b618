#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pli/aggregator.hpp"
#include "pli/bm25.hpp"
#include "pli/config.hpp"
#include "pli/corpus.hpp"
#include "pli/evaluation.hpp"
#include "pli/interaction.hpp"
#include "pli/pair_encoder.hpp"
#include "pli/synthetic.hpp"

namespace pli {

/// One retrieval task on disk or in memory: queries, corpus, document and
/// paragraph judgements, given candidate pools and the query split. The
/// synthetic generator produces exactly this shape.
using DomainData = SyntheticBenchmark;

/// Vocabulary over the query and corpus texts of every domain, in order.
Vocabulary build_vocabulary(const std::vector<const DomainData*>& domains, bool lowercase);

/// Tokenized stores, index, first-stage run and the derived pools of a domain.
struct PreparedDomain {
    std::string name;
    const DomainData* data = nullptr;
    DocumentStore queries;
    DocumentStore documents;
    InvertedIndex index;
    RetrievalRun run;  ///< top-K per query within its given pool
    double recall_at_k = 0.0;
    std::vector<std::string> train_queries;
    std::vector<std::string> validation_queries;
    std::vector<std::string> test_queries;
    CandidatePool train_pools;       ///< aggregator training pairs
    CandidatePool validation_pools;  ///< top-K of validation queries
    CandidatePool test_pools;        ///< top-K of test queries
    CandidatePool test_eval_pools;   ///< full given pools of test queries
    std::vector<Stage1Example> stage1;

    DocumentLookup lookup() const;
};

PreparedDomain prepare_domain(const std::string& name, const DomainData& data, const Vocabulary& vocab,
                              const PipelineConfig& cfg);

/// Untrained encoder; the starting point of every fine-tuned encoder.
MicroEncoder initial_encoder(const Vocabulary& vocab, const PipelineConfig& cfg);

struct EncoderTraining {
    MicroEncoder encoder;
    std::vector<Stage1EpochLog> log;
};

EncoderTraining train_domain_encoder(const PreparedDomain& dom, const Vocabulary& vocab, const PipelineConfig& cfg);

/// Labeled document relevance sequences of a pool, one per (query, candidate).
std::vector<LabeledSequence> encode_pool(const PreparedDomain& dom, const RelevanceSource& source,
                                         const CandidatePool& pools, const InteractionConfig& cfg,
                                         std::vector<InteractionMatrix>* matrices = nullptr);

struct EncodedDomain {
    std::vector<LabeledSequence> train;
    std::vector<LabeledSequence> validation;
    std::vector<LabeledSequence> test;
};

EncodedDomain encode_domain(const PreparedDomain& dom, const RelevanceSource& source, const PipelineConfig& cfg);

AggTrainResult train_domain_aggregator(const EncodedDomain& enc, const PipelineConfig& cfg);

struct TestEvaluation {
    EvalReport report;
    std::map<std::string, double> per_query_f1;
    std::vector<Prediction> predictions;
};

/// Predictions over the top-K test pools, scored against the full given pools.
TestEvaluation evaluate_aggregator(const AttentionRnn& model, const PreparedDomain& dom,
                                   std::span<const LabeledSequence> test, const PipelineConfig& cfg);

struct BaselineEvaluation {
    EvalReport report;
    std::map<std::string, double> per_query_f1;
};

/// BM25 cutoff baseline on the test queries.
BaselineEvaluation evaluate_bm25_baseline(const PreparedDomain& dom, const PipelineConfig& cfg);

struct DomainRunResult {
    double recall_at_k = 0.0;
    std::vector<Stage1EpochLog> stage1_log;
    BinaryCounts stage1_train;
    AggTrainResult aggregator;
    BaselineEvaluation baseline;
    TestEvaluation pipeline;
    SignificanceResult vs_baseline;
};

/// Index, retrieve, train the encoder and aggregator, and evaluate on the
/// held-out queries against the BM25 cutoff baseline.
DomainRunResult run_domain_pipeline(const DomainData& data, const PipelineConfig& cfg);

struct CrossDomainInputs {
    const DomainData* domain_a = nullptr;
    const DomainData* domain_b = nullptr;
    std::string name_a = "Law";
    std::string name_b = "Patent";
    /// Pre-trained encoders; trained from the domain data when absent.
    std::optional<MicroEncoder> encoder_a;
    std::optional<MicroEncoder> encoder_b;
};

/// The six (encoder x aggregator) cells evaluated on both test sets.
/// Aggregators train on their own domain's pools with the cell's encoder.
CrossDomainGrid run_cross_domain_matrix(const CrossDomainInputs& in, const PipelineConfig& cfg);

}  // namespace pli
