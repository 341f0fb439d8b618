#include "pli/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pli/adam.hpp"
#include "pli/common.hpp"

namespace pli {

RnnCell parse_rnn_cell(const std::string& name) {
    if (name == "lstm" || name == "LSTM") return RnnCell::kLstm;
    if (name == "gru" || name == "GRU") return RnnCell::kGru;
    throw std::invalid_argument("unknown RNN cell: " + name);
}

std::string to_string(RnnCell cell) { return cell == RnnCell::kLstm ? "lstm" : "gru"; }

void AggregatorConfig::validate() const {
    if (input_dim < 1 || hidden < 1) throw std::invalid_argument("aggregator: dimensions must be >= 1");
    if (!(init_scale >= 0.0)) throw std::invalid_argument("aggregator: init_scale must be >= 0");
}

AttentionRnn::AttentionRnn(const AggregatorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t H = cfg_.hidden;
    const std::size_t D = cfg_.input_dim;
    const std::size_t GH = gate_count() * H;
    off_.wx = layout_.add("W_x", {GH, D});
    off_.wh = layout_.add("W_h", {GH, H});
    off_.bx = layout_.add("b_x", {GH});
    off_.bh = layout_.add("b_h", {GH});
    off_.wa = layout_.add("W_a", {H, H});
    off_.ba = layout_.add("b_a", {H});
    off_.u = layout_.add("u", {H});
    off_.wo = layout_.add("W_o", {H, 2});
    off_.bo = layout_.add("b_o", {2});
    params_.resize(layout_.total());
    Rng rng(cfg_.seed);
    for (auto& p : params_) p = rng.uniform(-cfg_.init_scale, cfg_.init_scale);
    if (cfg_.cell == RnnCell::kLstm) {
        for (std::size_t k = 0; k < H; ++k) {
            params_[off_.bx + H + k] = cfg_.forget_bias;
            params_[off_.bh + H + k] = 0.0;
        }
    }
}

namespace {

/// y += W x for row-major W (rows x cols).
inline void gemv_acc(const double* W, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* w = W + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
        y[r] += acc;
    }
}

/// y += W^T x for row-major W (rows x cols).
inline void gemv_t_acc(const double* W, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double xr = x[r];
        if (xr == 0.0) continue;
        const double* w = W + r * cols;
        for (std::size_t c = 0; c < cols; ++c) y[c] += w[c] * xr;
    }
}

/// G += a b^T for G (rows x cols).
inline void outer_acc(double* G, std::size_t rows, std::size_t cols, const double* a, const double* b) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double ar = a[r];
        if (ar == 0.0) continue;
        double* g = G + r * cols;
        for (std::size_t c = 0; c < cols; ++c) g[c] += ar * b[c];
    }
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

ForwardTrace AttentionRnn::forward(std::span<const double> inputs, std::size_t n) const {
    if (n == 0) throw std::invalid_argument("rnn_forward: zero-length sequence");
    const std::size_t H = cfg_.hidden;
    const std::size_t D = cfg_.input_dim;
    const std::size_t G = gate_count();
    if (inputs.size() != n * D) throw std::invalid_argument("rnn_forward: input size does not match n x input_dim");
    const double* P = params_.data();

    ForwardTrace tr;
    tr.n = n;
    tr.hidden = H;
    tr.inputs.assign(inputs.begin(), inputs.end());
    tr.h.assign(n * H, 0.0);
    tr.gates.assign(n * G * H, 0.0);
    if (cfg_.cell == RnnCell::kLstm) {
        tr.c.assign(n * H, 0.0);
    } else {
        tr.gh_n.assign(n * H, 0.0);
    }

    std::vector<double> zx(G * H), zh(G * H);
    const std::vector<double> zeros(H, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        const double* x = tr.inputs.data() + t * D;
        const double* h_prev = t == 0 ? zeros.data() : tr.h.data() + (t - 1) * H;
        std::copy(P + off_.bx, P + off_.bx + G * H, zx.begin());
        std::copy(P + off_.bh, P + off_.bh + G * H, zh.begin());
        gemv_acc(P + off_.wx, G * H, D, x, zx.data());
        gemv_acc(P + off_.wh, G * H, H, h_prev, zh.data());
        double* gate = tr.gates.data() + t * G * H;
        double* h = tr.h.data() + t * H;
        if (cfg_.cell == RnnCell::kLstm) {
            const double* c_prev = t == 0 ? zeros.data() : tr.c.data() + (t - 1) * H;
            double* c = tr.c.data() + t * H;
            for (std::size_t k = 0; k < H; ++k) {
                const double i = sigmoid(zx[k] + zh[k]);
                const double f = sigmoid(zx[H + k] + zh[H + k]);
                const double g = std::tanh(zx[2 * H + k] + zh[2 * H + k]);
                const double o = sigmoid(zx[3 * H + k] + zh[3 * H + k]);
                gate[k] = i;
                gate[H + k] = f;
                gate[2 * H + k] = g;
                gate[3 * H + k] = o;
                c[k] = f * c_prev[k] + i * g;
                h[k] = o * std::tanh(c[k]);
            }
        } else {
            double* ghn = tr.gh_n.data() + t * H;
            for (std::size_t k = 0; k < H; ++k) {
                const double r = sigmoid(zx[k] + zh[k]);
                const double z = sigmoid(zx[H + k] + zh[H + k]);
                ghn[k] = zh[2 * H + k];
                const double nn = std::tanh(zx[2 * H + k] + r * ghn[k]);
                gate[k] = r;
                gate[H + k] = z;
                gate[2 * H + k] = nn;
                h[k] = (1.0 - z) * nn + z * h_prev[k];
            }
        }
    }

    // additive attention
    tr.att.assign(n * H, 0.0);
    tr.scores.assign(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double* a = tr.att.data() + t * H;
        std::copy(P + off_.ba, P + off_.ba + H, a);
        gemv_acc(P + off_.wa, H, H, tr.h.data() + t * H, a);
        double s = 0.0;
        for (std::size_t k = 0; k < H; ++k) {
            a[k] = std::tanh(a[k]);
            s += P[off_.u + k] * a[k];
        }
        tr.scores[t] = s;
    }
    const double smax = *std::max_element(tr.scores.begin(), tr.scores.end());
    tr.alpha.resize(n);
    double z = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        tr.alpha[t] = std::exp(tr.scores[t] - smax);
        z += tr.alpha[t];
    }
    for (auto& a : tr.alpha) a /= z;

    tr.pooled.assign(H, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        const double* h = tr.h.data() + t * H;
        for (std::size_t k = 0; k < H; ++k) tr.pooled[k] += tr.alpha[t] * h[k];
    }
    tr.logit_neg = P[off_.bo];
    tr.logit_pos = P[off_.bo + 1];
    for (std::size_t k = 0; k < H; ++k) {
        tr.logit_neg += tr.pooled[k] * P[off_.wo + 2 * k];
        tr.logit_pos += tr.pooled[k] * P[off_.wo + 2 * k + 1];
    }
    tr.prob = softmax2_positive(tr.logit_neg, tr.logit_pos);
    return tr;
}

ForwardTrace AttentionRnn::forward(const DocRelevanceSequence& seq) const {
    if (seq.dim != cfg_.input_dim) {
        throw std::invalid_argument("rnn_forward: sequence dimension " + std::to_string(seq.dim) +
                                    " does not match model input dimension " + std::to_string(cfg_.input_dim));
    }
    std::vector<double> x(seq.values.begin(), seq.values.end());
    return forward(x, seq.n);
}

void AttentionRnn::check_finite(const ForwardTrace& tr) const {
    auto check = [](std::span<const double> v, const char* name) {
        if (!all_finite(v)) throw NumericalError(std::string("non-finite values in ") + name);
    };
    check(tr.inputs, "inputs");
    check(tr.h, "hidden states");
    if (!tr.c.empty()) check(tr.c, "cell states");
    check(tr.scores, "attention scores");
    check(tr.alpha, "attention weights");
    check(tr.pooled, "pooled vector");
    const double logits[2] = {tr.logit_neg, tr.logit_pos};
    check(logits, "logits");
}

void AttentionRnn::check_finite_grad(std::span<const double> grad) const {
    for (const auto& s : layout_.slices()) {
        if (!all_finite(grad.subspan(s.offset, s.size))) throw NumericalError("non-finite gradient in " + s.name);
    }
}

void AttentionRnn::backward(const ForwardTrace& tr, double dpos, std::span<double> grad) const {
    const std::size_t n = tr.n;
    const std::size_t H = cfg_.hidden;
    const std::size_t D = cfg_.input_dim;
    const std::size_t G = gate_count();
    const double* P = params_.data();
    double* g = grad.data();
    const double dl[2] = {-dpos, dpos};

    // head
    std::vector<double> dv(H, 0.0);
    g[off_.bo] += dl[0];
    g[off_.bo + 1] += dl[1];
    for (std::size_t k = 0; k < H; ++k) {
        g[off_.wo + 2 * k] += tr.pooled[k] * dl[0];
        g[off_.wo + 2 * k + 1] += tr.pooled[k] * dl[1];
        dv[k] = P[off_.wo + 2 * k] * dl[0] + P[off_.wo + 2 * k + 1] * dl[1];
    }

    // attention pooling
    std::vector<double> dh(n * H, 0.0);
    std::vector<double> dalpha(n, 0.0);
    double weighted = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double* h = tr.h.data() + t * H;
        double s = 0.0;
        for (std::size_t k = 0; k < H; ++k) {
            s += dv[k] * h[k];
            dh[t * H + k] += tr.alpha[t] * dv[k];
        }
        dalpha[t] = s;
        weighted += tr.alpha[t] * s;
    }
    std::vector<double> dpre(H);
    for (std::size_t t = 0; t < n; ++t) {
        const double ds = tr.alpha[t] * (dalpha[t] - weighted);
        const double* a = tr.att.data() + t * H;
        for (std::size_t k = 0; k < H; ++k) {
            g[off_.u + k] += ds * a[k];
            dpre[k] = ds * P[off_.u + k] * (1.0 - a[k] * a[k]);
            g[off_.ba + k] += dpre[k];
        }
        outer_acc(g + off_.wa, H, H, dpre.data(), tr.h.data() + t * H);
        gemv_t_acc(P + off_.wa, H, H, dpre.data(), dh.data() + t * H);
    }

    // backpropagation through time
    std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0);
    std::vector<double> dzx(G * H), dzh(G * H);
    const std::vector<double> zeros(H, 0.0);
    for (std::size_t tt = n; tt-- > 0;) {
        const double* x = tr.inputs.data() + tt * D;
        const double* h_prev = tt == 0 ? zeros.data() : tr.h.data() + (tt - 1) * H;
        const double* gate = tr.gates.data() + tt * G * H;
        std::vector<double> dht(H);
        for (std::size_t k = 0; k < H; ++k) dht[k] = dh[tt * H + k] + dh_next[k];
        std::fill(dh_next.begin(), dh_next.end(), 0.0);

        if (cfg_.cell == RnnCell::kLstm) {
            const double* c = tr.c.data() + tt * H;
            const double* c_prev = tt == 0 ? zeros.data() : tr.c.data() + (tt - 1) * H;
            for (std::size_t k = 0; k < H; ++k) {
                const double i = gate[k], f = gate[H + k], gg = gate[2 * H + k], o = gate[3 * H + k];
                const double tc = std::tanh(c[k]);
                const double dout = dht[k] * tc;
                const double dc = dc_next[k] + dht[k] * o * (1.0 - tc * tc);
                dzx[k] = dc * gg * i * (1.0 - i);
                dzx[H + k] = dc * c_prev[k] * f * (1.0 - f);
                dzx[2 * H + k] = dc * i * (1.0 - gg * gg);
                dzx[3 * H + k] = dout * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            std::copy(dzx.begin(), dzx.end(), dzh.begin());
        } else {
            const double* ghn = tr.gh_n.data() + tt * H;
            for (std::size_t k = 0; k < H; ++k) {
                const double r = gate[k], z = gate[H + k], nn = gate[2 * H + k];
                const double dn = dht[k] * (1.0 - z);
                const double dz = dht[k] * (h_prev[k] - nn);
                dh_next[k] += dht[k] * z;
                const double dan = dn * (1.0 - nn * nn);
                const double dr = dan * ghn[k];
                dzx[k] = dr * r * (1.0 - r);
                dzx[H + k] = dz * z * (1.0 - z);
                dzx[2 * H + k] = dan;
                dzh[k] = dzx[k];
                dzh[H + k] = dzx[H + k];
                dzh[2 * H + k] = dan * r;
            }
        }
        for (std::size_t k = 0; k < G * H; ++k) {
            g[off_.bx + k] += dzx[k];
            g[off_.bh + k] += dzh[k];
        }
        outer_acc(g + off_.wx, G * H, D, dzx.data(), x);
        if (tt > 0) {
            outer_acc(g + off_.wh, G * H, H, dzh.data(), h_prev);
            gemv_t_acc(P + off_.wh, G * H, H, dzh.data(), dh_next.data());
        }
    }
}

double AttentionRnn::example_gradient(const LabeledSequence& ex, double scale, std::span<double> grad) const {
    if (ex.label != 0 && ex.label != 1) throw std::invalid_argument("loss_and_gradients: labels must be 0 or 1");
    const auto tr = forward(ex.seq);
    check_finite(tr);
    const double y = ex.label == 1 ? 1.0 : 0.0;
    const double hi = std::max(tr.logit_neg, tr.logit_pos);
    const double lse = hi + std::log(std::exp(tr.logit_neg - hi) + std::exp(tr.logit_pos - hi));
    const double loss = lse - (ex.label == 1 ? tr.logit_pos : tr.logit_neg);
    backward(tr, (tr.prob - y) * scale, grad);
    return loss;
}

double AttentionRnn::loss_and_gradients(std::span<const LabeledSequence> batch, std::vector<double>& grad) const {
    if (batch.empty()) throw std::invalid_argument("loss_and_gradients: empty batch");
    const std::size_t P = params_.size();
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<double> per_example(batch.size() * P, 0.0);
    std::vector<double> losses(batch.size(), 0.0);
    std::vector<std::string> errors(batch.size());
    bool numerical = false;
    const auto nb = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(dynamic, 1) reduction(|| : numerical)
    for (std::ptrdiff_t b = 0; b < nb; ++b) {
        const auto idx = static_cast<std::size_t>(b);
        try {
            losses[idx] = example_gradient(batch[idx], scale, std::span<double>(per_example).subspan(idx * P, P));
        } catch (const NumericalError& e) {
            errors[idx] = e.what();
            numerical = true;
        } catch (const std::exception& e) {
            errors[idx] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (e.empty()) continue;
        if (numerical) throw NumericalError(e);
        throw std::invalid_argument(e);
    }
    // Fixed reduction order keeps results independent of the thread count.
    grad.assign(P, 0.0);
    double loss = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const double* src = per_example.data() + b * P;
        for (std::size_t k = 0; k < P; ++k) grad[k] += src[k];
        loss += losses[b];
    }
    check_finite_grad(grad);
    return loss * scale;
}

double AttentionRnn::loss_and_gradients_serial(std::span<const LabeledSequence> batch,
                                               std::vector<double>& grad) const {
    if (batch.empty()) throw std::invalid_argument("loss_and_gradients: empty batch");
    const std::size_t P = params_.size();
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<double> scratch(P);
    grad.assign(P, 0.0);
    double loss = 0.0;
    for (const auto& ex : batch) {
        std::fill(scratch.begin(), scratch.end(), 0.0);
        loss += example_gradient(ex, scale, scratch);
        for (std::size_t k = 0; k < P; ++k) grad[k] += scratch[k];
    }
    check_finite_grad(grad);
    return loss * scale;
}

Checkpoint AttentionRnn::to_checkpoint() const {
    Checkpoint c;
    c.kind = kKind;
    c.meta["cell"] = to_string(cfg_.cell);
    c.meta["input_dim"] = std::to_string(cfg_.input_dim);
    c.meta["hidden"] = std::to_string(cfg_.hidden);
    c.meta["seed"] = std::to_string(cfg_.seed);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%a", cfg_.init_scale);
    c.meta["init_scale"] = buf;
    std::snprintf(buf, sizeof buf, "%a", cfg_.forget_bias);
    c.meta["forget_bias"] = buf;
    c.tensors = Checkpoint::pack(layout_, params_);
    return c;
}

AttentionRnn AttentionRnn::from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind != kKind) throw DataError("not an attention-RNN checkpoint: " + ckpt.kind);
    AggregatorConfig cfg;
    cfg.cell = parse_rnn_cell(ckpt.meta_at("cell"));
    cfg.input_dim = std::stoull(ckpt.meta_at("input_dim"));
    cfg.hidden = std::stoull(ckpt.meta_at("hidden"));
    cfg.seed = std::stoull(ckpt.meta_at("seed"));
    cfg.init_scale = std::strtod(ckpt.meta_at("init_scale").c_str(), nullptr);
    cfg.forget_bias = std::strtod(ckpt.meta_at("forget_bias").c_str(), nullptr);
    AttentionRnn model(cfg);
    ckpt.unpack(model.layout_, model.params_);
    return model;
}

AttentionRnn AttentionRnn::load(const std::filesystem::path& path) {
    return from_checkpoint(Checkpoint::load(path, kKind));
}

// --- training and inference --------------------------------------------------

BinaryCounts evaluate_sequences(const AttentionRnn& model, std::span<const LabeledSequence> data) {
    std::vector<char> pred(data.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(data.size()); ++i) {
        pred[static_cast<std::size_t>(i)] = model.forward(data[static_cast<std::size_t>(i)].seq).prob > 0.5 ? 1 : 0;
    }
    BinaryCounts c;
    for (std::size_t i = 0; i < data.size(); ++i) c.add(pred[i] != 0, data[i].label == 1);
    return c;
}

AggTrainResult train_aggregator(std::span<const LabeledSequence> data, const AggTrainingConfig& cfg,
                                std::span<const LabeledSequence> validation) {
    if (data.empty()) throw std::invalid_argument("train_aggregator: empty dataset");
    if (!(cfg.lr >= 0.0)) throw std::invalid_argument("train_aggregator: lr must be >= 0");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_aggregator: batch_size must be >= 1");

    AggregatorConfig mcfg;
    mcfg.cell = cfg.cell;
    mcfg.input_dim = data.front().seq.dim;
    mcfg.hidden = cfg.hidden;
    mcfg.seed = cfg.seed;
    mcfg.init_scale = cfg.init_scale;
    AggTrainResult res{AttentionRnn(mcfg), {}, {}, {}, 0};
    AttentionRnn& model = res.model;

    Adam opt(model.params().size(), AdamConfig{cfg.lr});
    Rng rng(derive_seed(cfg.seed, "aggregator-shuffle"));
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> grad;
    std::vector<LabeledSequence> batch;
    std::vector<double> best_params;
    double best_f1 = -1.0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
            const double loss = model.loss_and_gradients(batch, grad);
            if (!std::isfinite(loss) || loss > cfg.divergence_threshold) {
                throw NumericalError("train_aggregator: loss diverged (" + std::to_string(loss) + ") in epoch " +
                                     std::to_string(epoch));
            }
            total += loss * static_cast<double>(end - start);
            opt.step(model.params(), grad);
        }
        res.loss_curve.push_back(total / static_cast<double>(data.size()));
        res.train_eval.push_back(evaluate_sequences(model, data));
        if (!validation.empty()) {
            res.val_eval.push_back(evaluate_sequences(model, validation));
            const double f1 = res.val_eval.back().f1();
            if (f1 > best_f1) {
                best_f1 = f1;
                best_params.assign(model.params().begin(), model.params().end());
                res.selected_epoch = epoch;
            }
        } else {
            res.selected_epoch = epoch;
        }
        if (cfg.checkpoint_dir) {
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%03zu.ckpt", epoch);
            model.save(*cfg.checkpoint_dir / name);
        }
    }
    if (!best_params.empty()) std::copy(best_params.begin(), best_params.end(), model.params().begin());
    return res;
}

std::vector<Prediction> predict_relevance(const AttentionRnn& model, std::span<const DocRelevanceSequence> seqs) {
    for (const auto& s : seqs) {
        if (s.dim != model.config().input_dim) {
            throw std::invalid_argument("predict_relevance: sequence dimension " + std::to_string(s.dim) +
                                        " does not match model input dimension " +
                                        std::to_string(model.config().input_dim));
        }
    }
    std::vector<Prediction> out(seqs.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(seqs.size()); ++i) {
        const auto& s = seqs[static_cast<std::size_t>(i)];
        const double p = model.forward(s).prob;
        out[static_cast<std::size_t>(i)] = {s.query_id, s.cand_id, p, p > 0.5};
    }
    return out;
}

std::vector<Prediction> predict_pool(const AttentionRnn& model, const std::string& query_id,
                                     std::span<const DocRelevanceSequence> seqs, std::span<const std::string> pool) {
    const auto scored = predict_relevance(model, seqs);
    std::vector<Prediction> out;
    out.reserve(pool.size());
    for (const auto& cand : pool) {
        auto it = std::find_if(scored.begin(), scored.end(),
                               [&](const Prediction& p) { return p.query_id == query_id && p.cand_id == cand; });
        out.push_back(it != scored.end() ? *it : Prediction{query_id, cand, 0.0, false});
    }
    return out;
}

}  // namespace pli
