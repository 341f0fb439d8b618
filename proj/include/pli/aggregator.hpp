#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pli/checkpoint.hpp"
#include "pli/interaction.hpp"
#include "pli/metrics.hpp"

namespace pli {

enum class RnnCell { kLstm, kGru };

RnnCell parse_rnn_cell(const std::string& name);
std::string to_string(RnnCell cell);

struct AggregatorConfig {
    RnnCell cell = RnnCell::kLstm;
    std::size_t input_dim = 64;
    std::size_t hidden = 128;
    std::uint64_t seed = 0;
    double init_scale = 0.08;
    /// Added to the input-side forget-gate bias of an LSTM at init.
    double forget_bias = 1.0;

    void validate() const;
};

/// Everything the backward pass needs from one forward evaluation.
struct ForwardTrace {
    std::size_t n = 0;
    std::size_t hidden = 0;
    std::vector<double> inputs;  ///< n x D
    std::vector<double> h;       ///< n x H hidden states
    std::vector<double> c;       ///< n x H LSTM cell states (empty for GRU)
    std::vector<double> gates;   ///< n x G*H post-activation gates
    std::vector<double> gh_n;    ///< n x H GRU hidden-side candidate pre-activation
    std::vector<double> att;     ///< n x H tanh(W_a h_i + b_a)
    std::vector<double> scores;  ///< n
    std::vector<double> alpha;   ///< n, softmax of scores
    std::vector<double> pooled;  ///< H, sum_i alpha_i h_i
    double logit_neg = 0.0;
    double logit_pos = 0.0;
    double prob = 0.5;

    std::span<const double> h_at(std::size_t t) const { return std::span<const double>(h).subspan(t * hidden, hidden); }
};

struct LabeledSequence {
    DocRelevanceSequence seq;
    int label = 0;
};

/// Recurrent aggregator over a document relevance sequence: LSTM or GRU,
/// additive attention over the hidden states, linear two-way head.
///
/// LSTM gates are ordered (i, f, g, o); GRU gates (r, z, n) with
///   n = tanh(W_xn x + b_xn + r * (W_hn h + b_hn)),  h' = (1 - z) n + z h.
/// Attention: s_i = u . tanh(W_a h_i + b_a), alpha = softmax(s),
/// v = sum_i alpha_i h_i, logits = W_o^T v + b_o.
///
/// Tensors: W_x (G*H x D), W_h (G*H x H), b_x (G*H), b_h (G*H), W_a (H x H),
/// b_a (H), u (H), W_o (H x 2), b_o (2).
class AttentionRnn {
public:
    static constexpr const char* kKind = "attention_rnn";

    explicit AttentionRnn(const AggregatorConfig& cfg);

    const AggregatorConfig& config() const { return cfg_; }
    const ParamLayout& layout() const { return layout_; }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }
    std::size_t gate_count() const { return cfg_.cell == RnnCell::kLstm ? 4 : 3; }

    /// `inputs` holds n x input_dim values; n must be >= 1.
    ForwardTrace forward(std::span<const double> inputs, std::size_t n) const;
    ForwardTrace forward(const DocRelevanceSequence& seq) const;

    /// Mean softmax cross-entropy over the batch and its exact gradient
    /// (written into `grad`). Per-example gradients are computed in parallel
    /// and summed in batch order. Throws NumericalError naming the first
    /// non-finite tensor.
    double loss_and_gradients(std::span<const LabeledSequence> batch, std::vector<double>& grad) const;
    /// Single-threaded reference; bit-identical to loss_and_gradients.
    double loss_and_gradients_serial(std::span<const LabeledSequence> batch, std::vector<double>& grad) const;

    Checkpoint to_checkpoint() const;
    static AttentionRnn from_checkpoint(const Checkpoint& ckpt);
    void save(const std::filesystem::path& path) const { to_checkpoint().save(path); }
    static AttentionRnn load(const std::filesystem::path& path);

private:
    struct Offsets {
        std::size_t wx, wh, bx, bh, wa, ba, u, wo, bo;
    };

    double example_gradient(const LabeledSequence& ex, double scale, std::span<double> grad) const;
    void backward(const ForwardTrace& tr, double dpos, std::span<double> grad) const;
    void check_finite(const ForwardTrace& tr) const;
    void check_finite_grad(std::span<const double> grad) const;

    AggregatorConfig cfg_;
    ParamLayout layout_;
    std::vector<double> params_;
    Offsets off_{};
};

struct AggTrainingConfig {
    double lr = 1e-4;
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    RnnCell cell = RnnCell::kLstm;
    std::size_t hidden = 128;
    double init_scale = 0.08;
    /// Loss above this aborts training.
    double divergence_threshold = 1e6;
    /// When set, `epoch_NNN.ckpt` is written after every epoch.
    std::optional<std::filesystem::path> checkpoint_dir;
};

struct AggTrainResult {
    AttentionRnn model;
    std::vector<double> loss_curve;        ///< mean training loss per epoch
    std::vector<BinaryCounts> train_eval;  ///< per epoch, threshold 0.5
    std::vector<BinaryCounts> val_eval;    ///< per epoch when validation data is given
    std::size_t selected_epoch = 0;        ///< 1-based; the last epoch without validation data
};

/// Mini-batch Adam. With validation data the parameters of the epoch with
/// the best validation F1 (earliest on ties) are returned.
AggTrainResult train_aggregator(std::span<const LabeledSequence> data, const AggTrainingConfig& cfg,
                                std::span<const LabeledSequence> validation = {});

struct Prediction {
    std::string query_id;
    std::string cand_id;
    double prob = 0.0;
    bool relevant = false;  ///< prob > 0.5
};

/// One prediction per sequence, in input order (parallel over sequences).
std::vector<Prediction> predict_relevance(const AttentionRnn& model, std::span<const DocRelevanceSequence> seqs);

/// Predictions for every member of `pool`; members without an encoded
/// sequence get probability 0 and are decided irrelevant.
std::vector<Prediction> predict_pool(const AttentionRnn& model, const std::string& query_id,
                                     std::span<const DocRelevanceSequence> seqs,
                                     std::span<const std::string> pool);

BinaryCounts evaluate_sequences(const AttentionRnn& model, std::span<const LabeledSequence> data);

}  // namespace pli
