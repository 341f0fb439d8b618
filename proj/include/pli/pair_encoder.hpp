#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pli/checkpoint.hpp"
#include "pli/corpus.hpp"
#include "pli/metrics.hpp"

namespace pli {

struct EncoderConfig {
    std::size_t d_embed = 32;
    std::size_t d_repr = 64;
    std::size_t vocab_size = 0;
    std::uint64_t seed = 0;
    /// Parameters start uniform in (-init_scale, init_scale).
    double init_scale = 0.1;
    /// Packed pair length including the three special positions.
    std::size_t max_pair_tokens = kDefaultPairBudget;

    void validate() const;
};

/// Intermediate values of one pair evaluation.
struct EncoderForward {
    std::vector<double> mean_q;
    std::vector<double> mean_c;
    std::vector<double> features;  ///< [mean_q; mean_c; mean_q * mean_c; |mean_q - mean_c|]
    std::vector<double> repr;      ///< tanh(W1^T features + b1)
    double logit_neg = 0.0;
    double logit_pos = 0.0;
    double prob = 0.5;             ///< softmax positive-class probability
    std::size_t q_len = 0;         ///< token counts after pair truncation
    std::size_t c_len = 0;
};

struct Stage1Example {
    std::string query_key;
    std::string cand_key;
    TokenSeq query;
    TokenSeq candidate;
    int label = 0;

    bool operator==(const Stage1Example&) const = default;
};

/// Desk-scale pair encoder: mean-pooled token embeddings, a feature block
/// comparing the two means, one tanh layer producing the relevance vector,
/// and a two-way linear head.
///
/// Tensors: "embedding" (vocab_size x d_embed), "W1" (4 d_embed x d_repr),
/// "b1" (d_repr), "W2" (d_repr x 2), "b2" (2).
class MicroEncoder {
public:
    static constexpr const char* kKind = "micro_encoder";

    explicit MicroEncoder(const EncoderConfig& cfg);

    const EncoderConfig& config() const { return cfg_; }
    std::size_t dim() const { return cfg_.d_repr; }
    const ParamLayout& layout() const { return layout_; }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    /// Throws std::invalid_argument when either side is empty after truncation.
    EncoderForward forward(std::span<const TokenId> q, std::span<const TokenId> c) const;
    std::vector<double> encode(std::span<const TokenId> q, std::span<const TokenId> c) const;
    double classify(std::span<const TokenId> q, std::span<const TokenId> c) const;

    /// Mean cross-entropy over `batch`; writes d(loss)/d(params) into `grad`
    /// (resized and overwritten).
    double loss_and_gradients(std::span<const Stage1Example> batch, std::vector<double>& grad) const;

    Checkpoint to_checkpoint() const;
    static MicroEncoder from_checkpoint(const Checkpoint& ckpt);
    void save(const std::filesystem::path& path) const { to_checkpoint().save(path); }
    static MicroEncoder load(const std::filesystem::path& path);

private:
    double at(std::size_t off, std::size_t i) const { return params_[off + i]; }

    EncoderConfig cfg_;
    ParamLayout layout_;
    std::vector<double> params_;
    std::size_t off_emb_ = 0, off_w1_ = 0, off_b1_ = 0, off_w2_ = 0, off_b2_ = 0;
};

enum class NegativeSampling { kAllPoolNonRelevant, kRandomKPerPositive };

struct NegativeSamplingStrategy {
    NegativeSampling kind = NegativeSampling::kAllPoolNonRelevant;
    std::size_t k = 5;
    std::uint64_t seed = 0;
};

NegativeSampling parse_negative_sampling(const std::string& name);
std::string to_string(NegativeSampling kind);

/// Document by id, or nullptr.
using DocumentLookup = std::function<const Document*(const std::string& id)>;

/// Searches `stores` in order.
DocumentLookup document_lookup(std::vector<const DocumentStore*> stores);

/// Paragraph addressed by a `doc_id#index` key; throws DataError when absent.
const Paragraph& resolve_paragraph(const DocumentLookup& docs, const std::string& key);

/// Paragraph-pair classification examples.
///
/// kAllPoolNonRelevant: each judged pair is a positive, every other pool
/// paragraph a negative. kRandomKPerPositive: k negatives per positive drawn
/// without replacement from the paragraphs of documents holding a relevant
/// paragraph. Pairs are truncated to the encoder budget.
std::vector<Stage1Example> build_stage1_dataset(const QrelSet& para_qrels, const CandidatePool& para_pools,
                                                const NegativeSamplingStrategy& strategy,
                                                const DocumentLookup& docs,
                                                std::size_t max_pair_tokens = kDefaultPairBudget);

/// Positive-class counts at probability threshold 0.5 (strictly greater).
BinaryCounts stage1_f1(const MicroEncoder& enc, std::span<const Stage1Example> data);

struct Stage1TrainConfig {
    double lr = 1e-5;
    std::size_t batch_size = 2;
    std::size_t epochs = 3;
    std::uint64_t seed = 0;
};

struct Stage1EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    BinaryCounts train;
};

/// Mini-batch Adam over shuffled examples. Throws NumericalError on a
/// non-finite loss.
std::vector<Stage1EpochLog> train_stage1(MicroEncoder& enc, std::span<const Stage1Example> data,
                                         const Stage1TrainConfig& cfg);

}  // namespace pli
