#include "pli/pair_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "pli/adam.hpp"

namespace pli {

void EncoderConfig::validate() const {
    if (d_embed < 1 || d_repr < 1) throw std::invalid_argument("encoder: dimensions must be >= 1");
    if (vocab_size < 1) throw std::invalid_argument("encoder: vocab_size must be >= 1");
    if (max_pair_tokens < kPairSpecialTokens + 1) throw std::invalid_argument("encoder: max_pair_tokens must be >= 4");
}

MicroEncoder::MicroEncoder(const EncoderConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t de = cfg_.d_embed;
    const std::size_t dr = cfg_.d_repr;
    off_emb_ = layout_.add("embedding", {cfg_.vocab_size, de});
    off_w1_ = layout_.add("W1", {4 * de, dr});
    off_b1_ = layout_.add("b1", {dr});
    off_w2_ = layout_.add("W2", {dr, 2});
    off_b2_ = layout_.add("b2", {2});
    params_.resize(layout_.total());
    Rng rng(cfg_.seed);
    for (auto& p : params_) p = rng.uniform(-cfg_.init_scale, cfg_.init_scale);
}

EncoderForward MicroEncoder::forward(std::span<const TokenId> q_in, std::span<const TokenId> c_in) const {
    auto [ql, cl] = truncated_pair_lengths(q_in.size(), c_in.size(), cfg_.max_pair_tokens);
    if (ql == 0 || cl == 0) throw std::invalid_argument("encode_pair: empty paragraph");
    const auto q = q_in.first(ql);
    const auto c = c_in.first(cl);
    const std::size_t de = cfg_.d_embed;
    const std::size_t dr = cfg_.d_repr;

    EncoderForward f;
    f.q_len = ql;
    f.c_len = cl;
    auto mean = [&](std::span<const TokenId> toks, std::vector<double>& out) {
        out.assign(de, 0.0);
        for (TokenId t : toks) {
            if (t >= cfg_.vocab_size) throw std::invalid_argument("encode_pair: token id beyond vocabulary");
            const std::size_t row = off_emb_ + static_cast<std::size_t>(t) * de;
            for (std::size_t k = 0; k < de; ++k) out[k] += params_[row + k];
        }
        const double inv = 1.0 / static_cast<double>(toks.size());
        for (auto& x : out) x *= inv;
    };
    mean(q, f.mean_q);
    mean(c, f.mean_c);

    f.features.resize(4 * de);
    for (std::size_t k = 0; k < de; ++k) {
        f.features[k] = f.mean_q[k];
        f.features[de + k] = f.mean_c[k];
        f.features[2 * de + k] = f.mean_q[k] * f.mean_c[k];
        f.features[3 * de + k] = std::abs(f.mean_q[k] - f.mean_c[k]);
    }

    f.repr.assign(dr, 0.0);
    for (std::size_t k = 0; k < dr; ++k) f.repr[k] = at(off_b1_, k);
    for (std::size_t i = 0; i < 4 * de; ++i) {
        const double x = f.features[i];
        const std::size_t row = off_w1_ + i * dr;
        for (std::size_t k = 0; k < dr; ++k) f.repr[k] += x * params_[row + k];
    }
    for (auto& r : f.repr) r = std::tanh(r);

    f.logit_neg = at(off_b2_, 0);
    f.logit_pos = at(off_b2_, 1);
    for (std::size_t k = 0; k < dr; ++k) {
        f.logit_neg += f.repr[k] * at(off_w2_, 2 * k);
        f.logit_pos += f.repr[k] * at(off_w2_, 2 * k + 1);
    }
    f.prob = softmax2_positive(f.logit_neg, f.logit_pos);
    return f;
}

std::vector<double> MicroEncoder::encode(std::span<const TokenId> q, std::span<const TokenId> c) const {
    return forward(q, c).repr;
}

double MicroEncoder::classify(std::span<const TokenId> q, std::span<const TokenId> c) const {
    return forward(q, c).prob;
}

double MicroEncoder::loss_and_gradients(std::span<const Stage1Example> batch, std::vector<double>& grad) const {
    if (batch.empty()) throw std::invalid_argument("loss_and_gradients: empty batch");
    grad.assign(params_.size(), 0.0);
    const std::size_t de = cfg_.d_embed;
    const std::size_t dr = cfg_.d_repr;
    const double scale = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;

    std::vector<double> dz(dr), dx(4 * de), dmq(de), dmc(de);
    for (const auto& ex : batch) {
        const auto f = forward(ex.query, ex.candidate);
        const double y = ex.label != 0 ? 1.0 : 0.0;
        // -log p(y) with log-sum-exp over the two logits
        const double hi = std::max(f.logit_neg, f.logit_pos);
        const double lse = hi + std::log(std::exp(f.logit_neg - hi) + std::exp(f.logit_pos - hi));
        loss += lse - (y > 0.5 ? f.logit_pos : f.logit_neg);

        const double dpos = (f.prob - y) * scale;
        const double dneg = -dpos;
        grad[off_b2_ + 0] += dneg;
        grad[off_b2_ + 1] += dpos;
        for (std::size_t k = 0; k < dr; ++k) {
            grad[off_w2_ + 2 * k] += f.repr[k] * dneg;
            grad[off_w2_ + 2 * k + 1] += f.repr[k] * dpos;
            const double dr_k = at(off_w2_, 2 * k) * dneg + at(off_w2_, 2 * k + 1) * dpos;
            dz[k] = dr_k * (1.0 - f.repr[k] * f.repr[k]);
            grad[off_b1_ + k] += dz[k];
        }
        for (std::size_t i = 0; i < 4 * de; ++i) {
            const std::size_t row = off_w1_ + i * dr;
            double acc = 0.0;
            for (std::size_t k = 0; k < dr; ++k) {
                grad[row + k] += f.features[i] * dz[k];
                acc += params_[row + k] * dz[k];
            }
            dx[i] = acc;
        }
        for (std::size_t k = 0; k < de; ++k) {
            const double diff = f.mean_q[k] - f.mean_c[k];
            const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            dmq[k] = dx[k] + dx[2 * de + k] * f.mean_c[k] + dx[3 * de + k] * sgn;
            dmc[k] = dx[de + k] + dx[2 * de + k] * f.mean_q[k] - dx[3 * de + k] * sgn;
        }
        auto scatter = [&](std::span<const TokenId> toks, std::size_t n, const std::vector<double>& dm) {
            const double inv = 1.0 / static_cast<double>(n);
            for (std::size_t p = 0; p < n; ++p) {
                const std::size_t row = off_emb_ + static_cast<std::size_t>(toks[p]) * de;
                for (std::size_t k = 0; k < de; ++k) grad[row + k] += dm[k] * inv;
            }
        };
        scatter(ex.query, f.q_len, dmq);
        scatter(ex.candidate, f.c_len, dmc);
    }
    return loss * scale;
}

Checkpoint MicroEncoder::to_checkpoint() const {
    Checkpoint c;
    c.kind = kKind;
    c.meta["d_embed"] = std::to_string(cfg_.d_embed);
    c.meta["d_repr"] = std::to_string(cfg_.d_repr);
    c.meta["vocab_size"] = std::to_string(cfg_.vocab_size);
    c.meta["seed"] = std::to_string(cfg_.seed);
    c.meta["max_pair_tokens"] = std::to_string(cfg_.max_pair_tokens);
    c.tensors = Checkpoint::pack(layout_, params_);
    return c;
}

MicroEncoder MicroEncoder::from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind != kKind) throw DataError("not a micro-encoder checkpoint: " + ckpt.kind);
    EncoderConfig cfg;
    cfg.d_embed = std::stoull(ckpt.meta_at("d_embed"));
    cfg.d_repr = std::stoull(ckpt.meta_at("d_repr"));
    cfg.vocab_size = std::stoull(ckpt.meta_at("vocab_size"));
    cfg.seed = std::stoull(ckpt.meta_at("seed"));
    cfg.max_pair_tokens = std::stoull(ckpt.meta_at("max_pair_tokens"));
    MicroEncoder enc(cfg);
    ckpt.unpack(enc.layout_, enc.params_);
    return enc;
}

MicroEncoder MicroEncoder::load(const std::filesystem::path& path) {
    return from_checkpoint(Checkpoint::load(path, kKind));
}

// --- stage-1 data ------------------------------------------------------------

NegativeSampling parse_negative_sampling(const std::string& name) {
    if (name == "all" || name == "all_pool_nonrelevant" || name == "ALL_POOL_NONRELEVANT") {
        return NegativeSampling::kAllPoolNonRelevant;
    }
    if (name == "random_k" || name == "random_k_per_positive" || name == "RANDOM_K_PER_POSITIVE") {
        return NegativeSampling::kRandomKPerPositive;
    }
    throw std::invalid_argument("unknown negative sampling strategy: " + name);
}

std::string to_string(NegativeSampling kind) {
    return kind == NegativeSampling::kAllPoolNonRelevant ? "all_pool_nonrelevant" : "random_k_per_positive";
}

DocumentLookup document_lookup(std::vector<const DocumentStore*> stores) {
    return [stores = std::move(stores)](const std::string& id) -> const Document* {
        for (const auto* s : stores) {
            if (const auto* d = s->find(id)) return d;
        }
        return nullptr;
    };
}

const Paragraph& resolve_paragraph(const DocumentLookup& docs, const std::string& key) {
    auto [doc_id, idx] = parse_paragraph_key(key);
    const auto* d = docs(doc_id);
    if (d == nullptr) throw DataError("unknown document in paragraph key: " + key);
    if (idx >= d->paragraphs.size()) throw DataError("paragraph index out of range: " + key);
    return d->paragraphs[idx];
}

namespace {

Stage1Example make_example(const std::string& qk, const std::string& ck, int label, const DocumentLookup& docs,
                           std::size_t budget) {
    const auto& qp = resolve_paragraph(docs, qk);
    const auto& cp = resolve_paragraph(docs, ck);
    auto [q, c] = truncate_pair_symmetric(qp.tokens, cp.tokens, budget);
    return {qk, ck, std::move(q), std::move(c), label};
}

}  // namespace

std::vector<Stage1Example> build_stage1_dataset(const QrelSet& para_qrels, const CandidatePool& para_pools,
                                                const NegativeSamplingStrategy& strategy,
                                                const DocumentLookup& docs, std::size_t max_pair_tokens) {
    std::vector<Stage1Example> out;
    if (strategy.kind == NegativeSampling::kAllPoolNonRelevant) {
        std::set<std::string> qkeys;
        for (const auto& q : para_pools.queries()) qkeys.insert(q);
        for (const auto& q : para_qrels.queries()) qkeys.insert(q);
        for (const auto& qk : qkeys) {
            const auto& rel = para_qrels.relevant(qk);
            for (const auto& ck : para_pools.candidates(qk)) {
                out.push_back(make_example(qk, ck, rel.contains(ck) ? 1 : 0, docs, max_pair_tokens));
            }
            for (const auto& ck : rel) {
                if (!para_pools.contains(qk, ck)) out.push_back(make_example(qk, ck, 1, docs, max_pair_tokens));
            }
        }
        return out;
    }

    if (strategy.k < 1) throw std::invalid_argument("build_stage1_dataset: k must be >= 1");
    for (const auto& [qk, rel] : para_qrels.entries()) {
        if (rel.empty()) continue;
        // Paragraphs of every document holding a relevant paragraph, minus the relevant ones.
        std::set<std::string> holders;
        for (const auto& ck : rel) holders.insert(parse_paragraph_key(ck).first);
        std::vector<std::string> pool;
        for (const auto& doc_id : holders) {
            const auto* d = docs(doc_id);
            if (d == nullptr) throw DataError("build_stage1_dataset: unknown document " + doc_id);
            for (std::size_t i = 0; i < d->paragraphs.size(); ++i) {
                std::string key = paragraph_key(doc_id, i);
                if (!rel.contains(key)) pool.push_back(std::move(key));
            }
        }
        const std::size_t want = strategy.k * rel.size();
        if (pool.size() < want) {
            throw std::invalid_argument("build_stage1_dataset: query paragraph " + qk + " needs " +
                                        std::to_string(want) + " negatives but only " + std::to_string(pool.size()) +
                                        " are available");
        }
        for (const auto& ck : rel) out.push_back(make_example(qk, ck, 1, docs, max_pair_tokens));
        Rng rng(derive_seed(strategy.seed, qk));
        for (auto i : rng.sample_without_replacement(pool.size(), want)) {
            out.push_back(make_example(qk, pool[i], 0, docs, max_pair_tokens));
        }
    }
    return out;
}

BinaryCounts stage1_f1(const MicroEncoder& enc, std::span<const Stage1Example> data) {
    if (data.empty()) throw std::invalid_argument("stage1_f1: empty dataset");
    std::vector<char> pred(data.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(data.size()); ++i) {
        const auto& ex = data[static_cast<std::size_t>(i)];
        pred[static_cast<std::size_t>(i)] = enc.classify(ex.query, ex.candidate) > 0.5 ? 1 : 0;
    }
    BinaryCounts c;
    for (std::size_t i = 0; i < data.size(); ++i) c.add(pred[i] != 0, data[i].label != 0);
    return c;
}

std::vector<Stage1EpochLog> train_stage1(MicroEncoder& enc, std::span<const Stage1Example> data,
                                         const Stage1TrainConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("train_stage1: empty dataset");
    if (!(cfg.lr >= 0.0)) throw std::invalid_argument("train_stage1: lr must be >= 0");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_stage1: batch_size must be >= 1");

    Adam opt(enc.params().size(), AdamConfig{cfg.lr});
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> grad;
    std::vector<Stage1Example> batch;
    std::vector<Stage1EpochLog> log;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
            const double loss = enc.loss_and_gradients(batch, grad);
            if (!std::isfinite(loss)) {
                throw NumericalError("train_stage1: non-finite loss in epoch " + std::to_string(epoch) +
                                     " at example " + std::to_string(start));
            }
            total += loss * static_cast<double>(end - start);
            opt.step(enc.params(), grad);
        }
        log.push_back({epoch, total / static_cast<double>(data.size()), stage1_f1(enc, data)});
    }
    return log;
}

}  // namespace pli
