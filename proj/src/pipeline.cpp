#include "pli/pipeline.hpp"

#include <set>

#include "pli/common.hpp"

namespace pli {

namespace {

RetrievalRun subset_run(const RetrievalRun& run, std::span<const std::string> queries) {
    RetrievalRun out;
    for (const auto& q : queries) {
        if (run.has_query(q)) out.set(q, run.ranked(q));
    }
    return out;
}

CandidatePool subset_pool(const CandidatePool& pools, std::span<const std::string> queries) {
    CandidatePool out;
    for (const auto& q : queries) {
        if (!pools.has_query(q)) throw DataError("no candidate pool for query " + q);
        out.set(q, pools.candidates(q));
    }
    return out;
}

/// Paragraph judgements whose query paragraph belongs to one of `queries`.
std::pair<QrelSet, CandidatePool> paragraph_subset(const DomainData& data, const std::set<std::string>& queries) {
    QrelSet qrels;
    CandidatePool pools;
    for (const auto& [key, rel] : data.para_qrels.entries()) {
        if (!queries.contains(parse_paragraph_key(key).first)) continue;
        qrels.touch(key);
        for (const auto& r : rel) qrels.add(key, r);
    }
    for (const auto& [key, cands] : data.para_pools.entries()) {
        if (queries.contains(parse_paragraph_key(key).first)) pools.set(key, cands);
    }
    return {std::move(qrels), std::move(pools)};
}

}  // namespace

Vocabulary build_vocabulary(const std::vector<const DomainData*>& domains, bool lowercase) {
    std::vector<std::string> texts;
    for (const auto* d : domains) {
        for (const auto& q : d->queries) texts.push_back(q.text);
        for (const auto& doc : d->documents) texts.push_back(doc.text);
    }
    return Vocabulary::build(texts, lowercase);
}

DocumentLookup PreparedDomain::lookup() const { return document_lookup({&queries, &documents}); }

PreparedDomain prepare_domain(const std::string& name, const DomainData& data, const Vocabulary& vocab,
                              const PipelineConfig& cfg) {
    cfg.validate();
    PreparedDomain d;
    d.name = name;
    d.data = &data;
    d.queries = DocumentStore(data.queries, vocab, cfg.paragraph_len, cfg.lowercase);
    d.documents = DocumentStore(data.documents, vocab, cfg.paragraph_len, cfg.lowercase);
    d.index = InvertedIndex::build(d.documents.documents(), cfg.bm25);
    d.run = retrieve_batch(d.queries.documents(), cfg.top_k, d.index, cfg.bm25, &data.pools);
    d.recall_at_k = recall_at_k(d.run, data.qrels, cfg.top_k);

    for (const auto& q : data.train_queries) {
        if (!d.queries.contains(q)) throw DataError(name + ": training query " + q + " has no query document");
    }
    for (const auto& q : data.test_queries) {
        if (!d.queries.contains(q)) throw DataError(name + ": test query " + q + " has no query document");
    }
    if (cfg.validation_fraction > 0.0 && data.train_queries.size() >= 5) {
        auto split = split_validation(data.train_queries,
                                      SplitSpec{cfg.validation_fraction, derive_seed(cfg.seed, "validation-split")});
        d.train_queries = std::move(split.train);
        d.validation_queries = std::move(split.validation);
    } else {
        d.train_queries = data.train_queries;
    }
    d.test_queries = data.test_queries;

    const auto train_run = subset_run(d.run, d.train_queries);
    if (cfg.train_pool == TrainPoolMode::kAugment) {
        d.train_pools = augment_training_pool(train_run, data.qrels, cfg.train_pool_size,
                                              derive_seed(cfg.seed, "augment"));
    } else {
        d.train_pools = pool_from_run(train_run, cfg.top_k);
    }
    d.validation_pools = pool_from_run(subset_run(d.run, d.validation_queries), cfg.top_k);
    d.test_pools = pool_from_run(subset_run(d.run, d.test_queries), cfg.top_k);
    d.test_eval_pools = subset_pool(data.pools, d.test_queries);

    std::set<std::string> stage1_queries(data.train_queries.begin(), data.train_queries.end());
    if (cfg.merge_paragraph_splits) stage1_queries.insert(data.test_queries.begin(), data.test_queries.end());
    const auto [pq, pp] = paragraph_subset(data, stage1_queries);
    d.stage1 = build_stage1_dataset(pq, pp, cfg.sampling, d.lookup(), cfg.encoder.max_pair_tokens);
    return d;
}

MicroEncoder initial_encoder(const Vocabulary& vocab, const PipelineConfig& cfg) {
    EncoderConfig e = cfg.encoder;
    e.vocab_size = vocab.size();
    return MicroEncoder(e);
}

EncoderTraining train_domain_encoder(const PreparedDomain& dom, const Vocabulary& vocab, const PipelineConfig& cfg) {
    if (dom.stage1.empty()) throw DataError(dom.name + ": no paragraph pairs for encoder training");
    EncoderTraining t{initial_encoder(vocab, cfg), {}};
    t.log = train_stage1(t.encoder, dom.stage1, cfg.stage1);
    return t;
}

std::vector<LabeledSequence> encode_pool(const PreparedDomain& dom, const RelevanceSource& source,
                                         const CandidatePool& pools, const InteractionConfig& cfg,
                                         std::vector<InteractionMatrix>* matrices) {
    std::vector<DocPair> pairs;
    for (const auto& [q, cands] : pools.entries()) {
        const Document* qd = dom.queries.find(q);
        if (qd == nullptr) throw DataError(dom.name + ": unknown query document " + q);
        for (const auto& c : cands) {
            const Document* cd = dom.documents.find(c);
            if (cd == nullptr) throw DataError(dom.name + ": unknown candidate document " + c);
            pairs.push_back({qd, cd});
        }
    }
    auto mats = build_interaction_matrices(source, pairs, cfg);
    auto seqs = maxpool_batch(mats);
    std::vector<LabeledSequence> out;
    out.reserve(seqs.size());
    for (auto& s : seqs) {
        const int label = dom.data->qrels.is_relevant(s.query_id, s.cand_id) ? 1 : 0;
        out.push_back({std::move(s), label});
    }
    if (matrices != nullptr) *matrices = std::move(mats);
    return out;
}

EncodedDomain encode_domain(const PreparedDomain& dom, const RelevanceSource& source, const PipelineConfig& cfg) {
    EncodedDomain e;
    e.train = encode_pool(dom, source, dom.train_pools, cfg.interaction);
    e.validation = encode_pool(dom, source, dom.validation_pools, cfg.interaction);
    e.test = encode_pool(dom, source, dom.test_pools, cfg.interaction);
    return e;
}

AggTrainResult train_domain_aggregator(const EncodedDomain& enc, const PipelineConfig& cfg) {
    if (enc.train.empty()) throw DataError("no training sequences for the aggregator");
    return train_aggregator(enc.train, cfg.aggregator, enc.validation);
}

TestEvaluation evaluate_aggregator(const AttentionRnn& model, const PreparedDomain& dom,
                                   std::span<const LabeledSequence> test, const PipelineConfig& cfg) {
    std::vector<DocRelevanceSequence> seqs;
    seqs.reserve(test.size());
    for (const auto& t : test) seqs.push_back(t.seq);
    TestEvaluation ev;
    ev.predictions = predict_relevance(model, seqs);
    const auto decisions = decisions_from_predictions(ev.predictions);
    ev.report = pooled_binary_metrics(decisions, dom.data->qrels, dom.test_eval_pools);
    ev.per_query_f1 = per_query_f1(decisions, dom.data->qrels, dom.test_queries, cfg.empty_query_f1);
    return ev;
}

BaselineEvaluation evaluate_bm25_baseline(const PreparedDomain& dom, const PipelineConfig& cfg) {
    const auto decisions = cutoff_decisions(subset_run(dom.run, dom.test_queries), cfg.cutoff.cutoff);
    BaselineEvaluation b;
    b.report = pooled_binary_metrics(decisions, dom.data->qrels, dom.test_eval_pools);
    b.per_query_f1 = per_query_f1(decisions, dom.data->qrels, dom.test_queries, cfg.empty_query_f1);
    return b;
}

DomainRunResult run_domain_pipeline(const DomainData& data, const PipelineConfig& cfg) {
    const auto vocab = build_vocabulary({&data}, cfg.lowercase);
    const auto dom = prepare_domain(cfg.domain, data, vocab, cfg);
    auto enc = train_domain_encoder(dom, vocab, cfg);
    const auto stage1_train = stage1_f1(enc.encoder, dom.stage1);
    const EncoderSource source(enc.encoder);
    const auto encoded = encode_domain(dom, source, cfg);
    auto agg = train_domain_aggregator(encoded, cfg);
    auto pipeline = evaluate_aggregator(agg.model, dom, encoded.test, cfg);
    auto baseline = evaluate_bm25_baseline(dom, cfg);
    SignificanceResult sig;
    if (dom.test_queries.size() >= 2) sig = paired_t_test(pipeline.per_query_f1, baseline.per_query_f1, cfg.alpha);
    return DomainRunResult{dom.recall_at_k,   std::move(enc.log),      stage1_train, std::move(agg),
                           std::move(baseline), std::move(pipeline), sig};
}

CrossDomainGrid run_cross_domain_matrix(const CrossDomainInputs& in, const PipelineConfig& cfg) {
    if (in.domain_a == nullptr || in.domain_b == nullptr) {
        throw std::invalid_argument("run_cross_domain_matrix: both domains are required");
    }
    const auto vocab = build_vocabulary({in.domain_a, in.domain_b}, cfg.lowercase);
    std::array<PreparedDomain, 2> doms{prepare_domain(in.name_a, *in.domain_a, vocab, cfg),
                                       prepare_domain(in.name_b, *in.domain_b, vocab, cfg)};
    const std::array<std::string, 3> enc_names{"ORG", in.name_a, in.name_b};
    const std::array<std::string, 2> agg_names{in.name_a + "RNN", in.name_b + "RNN"};

    auto domain_encoder = [&](const std::optional<MicroEncoder>& given, const PreparedDomain& dom,
                              EncoderRole role) -> MicroEncoder {
        if (!given) return train_domain_encoder(dom, vocab, cfg).encoder;
        if (given->config().vocab_size != vocab.size()) {
            throw DataError("cells " + grid_label(role, AggregatorRole::kDomainA) + "/" +
                            grid_label(role, AggregatorRole::kDomainB) + ": encoder vocabulary size " +
                            std::to_string(given->config().vocab_size) + " does not match " +
                            std::to_string(vocab.size()));
        }
        return *given;
    };
    const std::array<MicroEncoder, 3> encoders{initial_encoder(vocab, cfg),
                                               domain_encoder(in.encoder_a, doms[0], EncoderRole::kDomainA),
                                               domain_encoder(in.encoder_b, doms[1], EncoderRole::kDomainB)};

    CrossDomainGrid grid;
    grid.domain_a = in.name_a;
    grid.domain_b = in.name_b;
    grid.test_sets.resize(2);
    for (std::size_t t = 0; t < 2; ++t) {
        auto& ts = grid.test_sets[t];
        ts.name = doms[t].name + "DocTest";
        auto base = evaluate_bm25_baseline(doms[t], cfg);
        ts.baseline = base.report;
        ts.baseline_per_query_f1 = std::move(base.per_query_f1);
    }

    for (std::size_t e = 0; e < 3; ++e) {
        const EncoderSource source(encoders[e]);
        const std::array<EncodedDomain, 2> encoded{encode_domain(doms[0], source, cfg),
                                                   encode_domain(doms[1], source, cfg)};
        for (std::size_t a = 0; a < 2; ++a) {
            const auto agg = train_domain_aggregator(encoded[a], cfg);
            for (std::size_t t = 0; t < 2; ++t) {
                auto& ts = grid.test_sets[t];
                auto ev = evaluate_aggregator(agg.model, doms[t], encoded[t].test, cfg);
                auto& cell = ts.cells[2 * e + a];
                cell.label = grid_label(static_cast<EncoderRole>(e), static_cast<AggregatorRole>(a));
                cell.encoder = enc_names[e];
                cell.aggregator = agg_names[a];
                cell.report = ev.report;
                cell.per_query_f1 = std::move(ev.per_query_f1);
                if (doms[t].test_queries.size() >= 2) {
                    cell.vs_baseline = paired_t_test(cell.per_query_f1, ts.baseline_per_query_f1, cfg.alpha);
                }
            }
        }
    }
    return grid;
}

}  // namespace pli
