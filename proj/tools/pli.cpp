// pli: command-line driver for the retrieval and re-ranking pipeline.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pli/aggregator.hpp"
#include "pli/artifacts.hpp"
#include "pli/bm25.hpp"
#include "pli/common.hpp"
#include "pli/config.hpp"
#include "pli/corpus.hpp"
#include "pli/evaluation.hpp"
#include "pli/interaction.hpp"
#include "pli/pair_encoder.hpp"
#include "pli/pipeline.hpp"
#include "pli/synthetic.hpp"
#include "pli/vector_store.hpp"

namespace fs = std::filesystem;
using namespace pli;

namespace {

constexpr const char* kConfigEnv = "PLI_CONFIG";

struct Globals {
    std::string config_path;
    std::string out = "pli_out";
    std::map<std::string, std::string> overrides;
};

/// Per-command bookkeeping for the manifest.
class Run {
public:
    Run(std::string command, const Globals& g) : command_(std::move(command)), out_(g.out) {
        if (!g.config_path.empty()) {
            cfg_.merge_file(g.config_path);
        } else if (const char* env = std::getenv(kConfigEnv); env != nullptr && *env != '\0') {
            cfg_.merge_file(env);
        }
        for (const auto& [k, v] : g.overrides) cfg_.set_from_string(k, v);
        pipeline_config(cfg_);  // reject bad values before touching any file
        set_num_threads(static_cast<int>(cfg_.count("threads")));
        fs::create_directories(out_);
        start_ = std::chrono::steady_clock::now();
    }

    const Config& config() const { return cfg_; }
    PipelineConfig pipeline() const { return pipeline_config(cfg_); }
    fs::path out(const std::string& name) const { return out_ / name; }

    /// Checks existence and records the digest.
    fs::path input(const std::string& path, const std::string& what) {
        if (path.empty()) throw ConfigError("missing required " + what + " path");
        if (!fs::exists(path)) throw DataError(what + " not found: " + path);
        inputs_[path] = file_digest(path);
        return path;
    }

    void output(const fs::path& p) { outputs_.push_back(p); }

    void finish() {
        RunManifest m;
        m.command = command_;
        m.config_hash = cfg_.hash();
        m.config_json = cfg_.canonical();
        m.inputs = inputs_;
        for (const auto& p : outputs_) m.outputs[p.string()] = fs::is_regular_file(p) ? file_digest(p) : "";
        m.versions = artifact_versions();
        m.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        m.write(out_ / ("manifest_" + command_ + ".json"));
    }

private:
    std::string command_;
    fs::path out_;
    Config cfg_;
    std::map<std::string, std::string> inputs_;
    std::vector<fs::path> outputs_;
    std::chrono::steady_clock::time_point start_;
};

DocumentStore load_store(Run& run, const std::string& path, const std::string& what, const Vocabulary& vocab,
                         const PipelineConfig& pc) {
    const auto raw = read_jsonl(run.input(path, what));
    return DocumentStore(raw, vocab, pc.paragraph_len, pc.lowercase);
}

Vocabulary load_vocab(Run& run, const std::string& path) { return Vocabulary::load(run.input(path, "vocabulary")); }

std::string default_in(const Globals& g, const std::string& given, const std::string& name) {
    return given.empty() ? (fs::path(g.out) / name).string() : given;
}

std::vector<std::string> optional_list(Run& run, const std::string& path, const std::string& what) {
    if (path.empty()) return {};
    return read_id_list(run.input(path, what));
}

CandidatePool restrict_pool(const CandidatePool& pools, const std::vector<std::string>& queries) {
    if (queries.empty()) return pools;
    CandidatePool out;
    for (const auto& q : queries) {
        if (!pools.has_query(q)) throw DataError("no candidate pool for query " + q);
        out.set(q, pools.candidates(q));
    }
    return out;
}

std::vector<LabeledSequence> labeled_from_cache(const InteractionCache& cache, const QrelSet& qrels) {
    std::vector<LabeledSequence> out;
    for (auto& s : maxpool_batch(cache.matrices)) {
        const int label = qrels.is_relevant(s.query_id, s.cand_id) ? 1 : 0;
        out.push_back({std::move(s), label});
    }
    return out;
}

void print_table(const std::vector<ReportRow>& rows) { std::cout << format_report_table(rows); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Long-document retrieval: BM25 pooling, paragraph interaction encoding and attention-RNN re-ranking"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, std::string("JSON config file (default: $") + kConfigEnv + ")");
    app.add_option("--out", g.out, "output directory")->capture_default_str();
    for (const auto& key : config_schema()) {
        auto* opt = app.add_option_function<std::string>(
            "--" + key.key, [&g, k = key.key](const std::string& v) { g.overrides[k] = v; },
            key.help + " (default " + key.default_value.dump() + ")");
        opt->type_name(key.default_value.is_string() ? "TEXT" : key.default_value.is_boolean() ? "BOOL" : "NUM");
    }

    std::function<void()> action;

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark");
    synth->callback([&] {
        action = [&] {
            Run run("synth", g);
            const auto sc = synthetic_config(run.config());
            const auto bench = generate_synthetic_benchmark(sc);
            write_benchmark(bench, g.out);
            nlohmann::json cfg;
            cfg["seed"] = sc.seed;
            cfg["corpus"]["paragraph_len"] = sc.paragraph_len;
            write_file_atomic(run.out("pipeline.json"), cfg.dump(2) + "\n");
            for (const char* f : {"queries.jsonl", "corpus.jsonl", "qrels.txt", "pools.txt", "para_qrels.txt",
                                  "para_pools.txt", "train_queries.txt", "test_queries.txt", "pipeline.json"}) {
                run.output(run.out(f));
            }
            std::cerr << "synth: " << bench.queries.size() << " queries, " << bench.documents.size()
                      << " documents written to " << g.out << "\n";
            run.finish();
        };
    });

    // index
    std::string corpus_path, queries_path;
    auto* index = app.add_subcommand("index", "build the vocabulary and BM25 index");
    index->add_option("--corpus", corpus_path, "corpus JSONL")->required();
    index->add_option("--queries", queries_path, "query JSONL (joins the vocabulary)");
    index->callback([&] {
        action = [&] {
            Run run("index", g);
            const auto pc = run.pipeline();
            std::vector<RawDocument> queries;
            if (!queries_path.empty()) queries = read_jsonl(run.input(queries_path, "queries"));
            const auto docs = read_jsonl(run.input(corpus_path, "corpus"));
            std::vector<std::string> texts;
            for (const auto& q : queries) texts.push_back(q.text);
            for (const auto& d : docs) texts.push_back(d.text);
            const auto vocab = Vocabulary::build(texts, pc.lowercase);
            const DocumentStore store(docs, vocab, pc.paragraph_len, pc.lowercase);
            const auto idx = InvertedIndex::build(store.documents(), pc.bm25);
            vocab.save(run.out("vocab.txt"));
            idx.save(run.out("index.plix"));
            run.output(run.out("vocab.txt"));
            run.output(run.out("index.plix"));
            std::cerr << "index: " << idx.num_docs() << " documents, vocabulary " << vocab.size() << "\n";
            run.finish();
        };
    });

    // retrieve
    std::string index_path, vocab_path, pools_path, qrels_path, run_name = "run.txt";
    auto* retrieve = app.add_subcommand("retrieve", "rank candidates with BM25");
    retrieve->add_option("--index", index_path, "index file (default <out>/index.plix)");
    retrieve->add_option("--vocab", vocab_path, "vocabulary (default <out>/vocab.txt)");
    retrieve->add_option("--queries", queries_path, "query JSONL")->required();
    retrieve->add_option("--pools", pools_path, "restrict ranking to these candidate pools");
    retrieve->add_option("--qrels", qrels_path, "report recall@k against these judgements");
    retrieve->add_option("--name", run_name, "run file name")->capture_default_str();
    retrieve->callback([&] {
        action = [&] {
            Run run("retrieve", g);
            const auto pc = run.pipeline();
            const auto idx = InvertedIndex::load(run.input(default_in(g, index_path, "index.plix"), "index file"));
            if (idx.params() != pc.bm25) {
                std::cerr << "retrieve: note: index was built with different BM25 settings; using the command's\n";
            }
            const auto vocab = load_vocab(run, default_in(g, vocab_path, "vocab.txt"));
            const auto queries = load_store(run, queries_path, "queries", vocab, pc);
            std::optional<CandidatePool> pools;
            if (!pools_path.empty()) pools = CandidatePool::load(run.input(pools_path, "pools"));
            const auto result =
                retrieve_batch(queries.documents(), pc.top_k, idx, pc.bm25, pools ? &*pools : nullptr);
            result.save(run.out(run_name));
            run.output(run.out(run_name));
            if (!qrels_path.empty()) {
                const auto qrels = QrelSet::load(run.input(qrels_path, "qrels"));
                std::printf("recall@%zu %.4f\n", pc.top_k, recall_at_k(result, qrels, pc.top_k));
            }
            run.finish();
        };
    });

    // stage1-build
    std::string para_qrels_path, para_pools_path, train_list, test_list;
    bool merge_splits = false;
    auto* s1b = app.add_subcommand("stage1-build", "build paragraph-pair training examples");
    s1b->add_option("--para-qrels", para_qrels_path, "paragraph judgements")->required();
    s1b->add_option("--para-pools", para_pools_path, "paragraph candidate pools")->required();
    s1b->add_option("--queries", queries_path, "query JSONL")->required();
    s1b->add_option("--corpus", corpus_path, "corpus JSONL")->required();
    s1b->add_option("--vocab", vocab_path, "vocabulary (default <out>/vocab.txt)");
    s1b->add_option("--train-queries", train_list, "keep only these queries' paragraphs");
    s1b->add_option("--test-queries", test_list, "test queries, added with --merge-paragraph-splits");
    s1b->add_flag("--merge-paragraph-splits", merge_splits, "train on train and test paragraphs together");
    s1b->callback([&] {
        action = [&] {
            Run run("stage1-build", g);
            auto pc = run.pipeline();
            if (merge_splits) pc.merge_paragraph_splits = true;
            const auto vocab = load_vocab(run, default_in(g, vocab_path, "vocab.txt"));
            const auto queries = load_store(run, queries_path, "queries", vocab, pc);
            const auto docs = load_store(run, corpus_path, "corpus", vocab, pc);
            auto pq = QrelSet::load(run.input(para_qrels_path, "paragraph qrels"));
            auto pp = CandidatePool::load(run.input(para_pools_path, "paragraph pools"));
            auto keep = optional_list(run, train_list, "train query list");
            if (!keep.empty()) {
                if (pc.merge_paragraph_splits) {
                    const auto extra = optional_list(run, test_list, "test query list");
                    keep.insert(keep.end(), extra.begin(), extra.end());
                }
                const std::set<std::string> allowed(keep.begin(), keep.end());
                QrelSet fq;
                CandidatePool fp;
                for (const auto& [k, rel] : pq.entries()) {
                    if (!allowed.contains(parse_paragraph_key(k).first)) continue;
                    fq.touch(k);
                    for (const auto& r : rel) fq.add(k, r);
                }
                for (const auto& [k, c] : pp.entries()) {
                    if (allowed.contains(parse_paragraph_key(k).first)) fp.set(k, c);
                }
                pq = std::move(fq);
                pp = std::move(fp);
            }
            const auto data = build_stage1_dataset(pq, pp, pc.sampling, document_lookup({&queries, &docs}),
                                                   pc.encoder.max_pair_tokens);
            save_stage1_dataset(run.out("stage1.jsonl"), data);
            run.output(run.out("stage1.jsonl"));
            std::size_t pos = 0;
            for (const auto& ex : data) pos += static_cast<std::size_t>(ex.label);
            std::cerr << "stage1-build: " << data.size() << " examples, " << pos << " positive ("
                      << to_string(pc.sampling.kind) << ")\n";
            run.finish();
        };
    });

    // stage1-train
    std::string dataset_path, encoder_name = "encoder.ckpt";
    auto* s1t = app.add_subcommand("stage1-train", "train the pair encoder");
    s1t->add_option("--dataset", dataset_path, "stage-1 examples (default <out>/stage1.jsonl)");
    s1t->add_option("--vocab", vocab_path, "vocabulary (default <out>/vocab.txt)");
    s1t->add_option("--name", encoder_name, "checkpoint name")->capture_default_str();
    s1t->callback([&] {
        action = [&] {
            Run run("stage1-train", g);
            const auto pc = run.pipeline();
            const auto vocab = load_vocab(run, default_in(g, vocab_path, "vocab.txt"));
            const auto data = load_stage1_dataset(run.input(default_in(g, dataset_path, "stage1.jsonl"), "dataset"));
            auto enc = initial_encoder(vocab, pc);
            std::vector<Stage1EpochLog> log;
            if (pc.stage1.epochs > 0) log = train_stage1(enc, data, pc.stage1);
            enc.save(run.out(encoder_name));
            std::string lines;
            for (const auto& l : log) {
                nlohmann::json j;
                j["epoch"] = l.epoch;
                j["loss"] = l.mean_loss;
                j["precision"] = l.train.precision();
                j["recall"] = l.train.recall();
                j["f1"] = l.train.f1();
                lines += j.dump() + "\n";
                std::cerr << "stage1-train: epoch " << l.epoch << " loss " << l.mean_loss << " F1 " << l.train.f1()
                          << "\n";
            }
            write_file_atomic(run.out("stage1_log.jsonl"), lines);
            run.output(run.out(encoder_name));
            run.output(run.out("stage1_log.jsonl"));
            run.finish();
        };
    });

    // encode
    std::string encoder_path, vectors_path, export_path, run_path, query_list, cache_name = "interactions.plim";
    auto* encode = app.add_subcommand("encode", "build interaction caches for candidate pools");
    encode->add_option("--encoder", encoder_path, "encoder checkpoint");
    encode->add_option("--vectors", vectors_path, "import pair vectors instead of running an encoder");
    encode->add_option("--queries", queries_path, "query JSONL")->required();
    encode->add_option("--corpus", corpus_path, "corpus JSONL")->required();
    encode->add_option("--vocab", vocab_path, "vocabulary (default <out>/vocab.txt)");
    encode->add_option("--pools", pools_path, "pairs to encode");
    encode->add_option("--run", run_path, "encode the top retrieval.top_k of a run instead");
    encode->add_option("--query-list", query_list, "only these queries");
    encode->add_option("--name", cache_name, "cache file name")->capture_default_str();
    encode->add_option("--export-vectors", export_path, "also write every cell to a vector store");
    encode->callback([&] {
        action = [&] {
            Run run("encode", g);
            const auto pc = run.pipeline();
            if (encoder_path.empty() == vectors_path.empty()) {
                throw ConfigError("encode: give exactly one of --encoder or --vectors");
            }
            if (pools_path.empty() == run_path.empty()) throw ConfigError("encode: give exactly one of --pools or --run");
            const auto vocab = load_vocab(run, default_in(g, vocab_path, "vocab.txt"));
            std::optional<MicroEncoder> enc;
            std::optional<ExternalVectorStore> store;
            if (!encoder_path.empty()) {
                enc = MicroEncoder::load(run.input(encoder_path, "encoder checkpoint"));
                if (enc->config().vocab_size != vocab.size()) {
                    throw DataError("encoder vocabulary size " + std::to_string(enc->config().vocab_size) +
                                    " does not match vocabulary " + std::to_string(vocab.size()));
                }
            } else {
                store = ExternalVectorStore::load(run.input(vectors_path, "vector store"));
            }
            std::optional<EncoderSource> esrc;
            std::optional<VectorStoreSource> vsrc;
            const RelevanceSource* source = nullptr;
            if (enc) {
                source = &esrc.emplace(*enc);
            } else {
                source = &vsrc.emplace(*store);
            }
            const auto queries = load_store(run, queries_path, "queries", vocab, pc);
            const auto docs = load_store(run, corpus_path, "corpus", vocab, pc);
            CandidatePool pools = pools_path.empty()
                                      ? pool_from_run(RetrievalRun::load(run.input(run_path, "run")), pc.top_k)
                                      : CandidatePool::load(run.input(pools_path, "pools"));
            pools = restrict_pool(pools, optional_list(run, query_list, "query list"));
            std::vector<DocPair> pairs;
            for (const auto& [q, cands] : pools.entries()) {
                for (const auto& c : cands) pairs.push_back({&queries.at(q), &docs.at(c)});
            }
            const auto mats = build_interaction_matrices(*source, pairs, pc.interaction);
            const auto dim = static_cast<std::uint32_t>(source->dim());
            write_interaction_cache(mats, dim, run.out(cache_name));
            run.output(run.out(cache_name));
            if (!export_path.empty()) {
                const fs::path p = fs::path(export_path).is_absolute() ? fs::path(export_path) : run.out(export_path);
                to_vector_store(mats, dim).save(p);
                run.output(p);
            }
            std::cerr << "encode: " << mats.size() << " interaction matrices\n";
            run.finish();
        };
    });

    // pool-augment
    std::string pool_name = "train_pools.txt";
    auto* augment = app.add_subcommand("pool-augment", "add judged documents and sampled negatives to training pools");
    augment->add_option("--run", run_path, "retrieval run")->required();
    augment->add_option("--qrels", qrels_path, "document judgements")->required();
    augment->add_option("--query-list", query_list, "only these queries");
    augment->add_option("--name", pool_name, "pool file name")->capture_default_str();
    augment->callback([&] {
        action = [&] {
            Run run("pool-augment", g);
            const auto pc = run.pipeline();
            auto rr = RetrievalRun::load(run.input(run_path, "run"));
            const auto keep = optional_list(run, query_list, "query list");
            if (!keep.empty()) {
                RetrievalRun sub;
                for (const auto& q : keep) sub.set(q, rr.ranked(q));
                rr = std::move(sub);
            }
            const auto qrels = QrelSet::load(run.input(qrels_path, "qrels"));
            const auto pools = augment_training_pool(rr, qrels, pc.train_pool_size, derive_seed(pc.seed, "augment"));
            pools.save(run.out(pool_name));
            run.output(run.out(pool_name));
            run.finish();
        };
    });

    // agg-train
    std::string cache_path, val_cache_path, agg_name = "aggregator.ckpt";
    auto* aggt = app.add_subcommand("agg-train", "train the attention-RNN aggregator");
    aggt->add_option("--cache", cache_path, "training interaction cache")->required();
    aggt->add_option("--validation-cache", val_cache_path, "validation cache for epoch selection");
    aggt->add_option("--qrels", qrels_path, "document judgements")->required();
    aggt->add_option("--name", agg_name, "checkpoint name")->capture_default_str();
    aggt->callback([&] {
        action = [&] {
            Run run("agg-train", g);
            auto pc = run.pipeline();
            const auto qrels = QrelSet::load(run.input(qrels_path, "qrels"));
            const auto train = labeled_from_cache(read_interaction_cache(run.input(cache_path, "cache")), qrels);
            std::vector<LabeledSequence> val;
            if (!val_cache_path.empty()) {
                val = labeled_from_cache(read_interaction_cache(run.input(val_cache_path, "validation cache")), qrels);
            }
            if (train.empty()) throw DataError("agg-train: training cache holds no matrices");
            pc.aggregator.checkpoint_dir = run.out("checkpoints");
            fs::create_directories(*pc.aggregator.checkpoint_dir);
            const auto res = train_aggregator(train, pc.aggregator, val);
            res.model.save(run.out(agg_name));
            std::string lines;
            for (std::size_t e = 0; e < res.loss_curve.size(); ++e) {
                nlohmann::json j;
                j["epoch"] = e + 1;
                j["loss"] = res.loss_curve[e];
                j["train_f1"] = res.train_eval[e].f1();
                if (!res.val_eval.empty()) j["validation_f1"] = res.val_eval[e].f1();
                lines += j.dump() + "\n";
            }
            write_file_atomic(run.out("agg_log.jsonl"), lines);
            std::cerr << "agg-train: selected epoch " << res.selected_epoch << " of " << res.loss_curve.size() << "\n";
            run.output(run.out(agg_name));
            run.output(run.out("agg_log.jsonl"));
            run.finish();
        };
    });

    // predict
    std::string aggregator_path, pred_name = "predictions.tsv";
    auto* predict = app.add_subcommand("predict", "score encoded candidates");
    predict->add_option("--aggregator", aggregator_path, "aggregator checkpoint")->required();
    predict->add_option("--cache", cache_path, "interaction cache")->required();
    predict->add_option("--name", pred_name, "predictions file name")->capture_default_str();
    predict->callback([&] {
        action = [&] {
            Run run("predict", g);
            const auto model = AttentionRnn::load(run.input(aggregator_path, "aggregator checkpoint"));
            const auto cache = read_interaction_cache(run.input(cache_path, "cache"));
            const auto seqs = maxpool_batch(cache.matrices);
            const auto preds = predict_relevance(model, seqs);
            save_predictions(run.out(pred_name), preds);
            run.output(run.out(pred_name));
            run.finish();
        };
    });

    // evaluate
    std::string preds_path, baseline_run_path, model_label = "model";
    auto* evaluate = app.add_subcommand("evaluate", "pooled precision, recall and F1");
    evaluate->add_option("--qrels", qrels_path, "document judgements")->required();
    evaluate->add_option("--pools", pools_path, "full candidate pools")->required();
    evaluate->add_option("--predictions", preds_path, "model predictions");
    evaluate->add_option("--run", run_path, "evaluate a ranking at evaluation.cutoff instead");
    evaluate->add_option("--baseline-run", baseline_run_path, "BM25 run for the cutoff baseline and significance");
    evaluate->add_option("--query-list", query_list, "only these queries");
    evaluate->add_option("--label", model_label, "row label")->capture_default_str();
    evaluate->callback([&] {
        action = [&] {
            Run run("evaluate", g);
            const auto pc = run.pipeline();
            if (preds_path.empty() == run_path.empty()) {
                throw ConfigError("evaluate: give exactly one of --predictions or --run");
            }
            const auto qrels = QrelSet::load(run.input(qrels_path, "qrels"));
            const auto all_pools = CandidatePool::load(run.input(pools_path, "pools"));
            const auto keep = optional_list(run, query_list, "query list");
            const auto pools = restrict_pool(all_pools, keep);
            const auto queries = pools.queries();
            auto restrict_decisions = [&](Decisions d) {
                Decisions out;
                for (const auto& q : queries) {
                    if (auto it = d.find(q); it != d.end()) out[q] = std::move(it->second);
                }
                return out;
            };
            const Decisions decisions = restrict_decisions(
                preds_path.empty()
                    ? cutoff_decisions(RetrievalRun::load(run.input(run_path, "run")), pc.cutoff.cutoff)
                    : decisions_from_predictions(load_predictions(run.input(preds_path, "predictions"))));
            std::vector<ReportRow> rows;
            ReportRow model{model_label, pooled_binary_metrics(decisions, qrels, pools), std::nullopt};
            if (!baseline_run_path.empty()) {
                const auto base = restrict_decisions(
                    cutoff_decisions(RetrievalRun::load(run.input(baseline_run_path, "baseline run")),
                                     pc.cutoff.cutoff));
                rows.push_back({"BM25 cutoff " + std::to_string(pc.cutoff.cutoff),
                                pooled_binary_metrics(base, qrels, pools), std::nullopt});
                if (queries.size() >= 2) {
                    model.vs_baseline =
                        paired_t_test(per_query_f1(decisions, qrels, queries, pc.empty_query_f1),
                                      per_query_f1(base, qrels, queries, pc.empty_query_f1), pc.alpha);
                }
            }
            rows.push_back(model);
            print_table(rows);
            write_file_atomic(run.out("report.txt"), format_report_table(rows));
            write_file_atomic(run.out("report.ndjson"), format_report_ndjson(rows, pc.domain));
            run.output(run.out("report.txt"));
            run.output(run.out("report.ndjson"));
            run.finish();
        };
    });

    // crossdomain
    std::string dom_a, dom_b, name_a = "Law", name_b = "Patent", enc_a, enc_b;
    auto* cross = app.add_subcommand("crossdomain", "R1-R6 encoder x aggregator grid on two domains");
    cross->add_option("--domain-a", dom_a, "benchmark directory of the first domain")->required();
    cross->add_option("--domain-b", dom_b, "benchmark directory of the second domain")->required();
    cross->add_option("--name-a", name_a, "first domain label")->capture_default_str();
    cross->add_option("--name-b", name_b, "second domain label")->capture_default_str();
    cross->add_option("--encoder-a", enc_a, "trained encoder of the first domain (trained when omitted)");
    cross->add_option("--encoder-b", enc_b, "trained encoder of the second domain (trained when omitted)");
    cross->callback([&] {
        action = [&] {
            Run run("crossdomain", g);
            const auto pc = run.pipeline();
            auto load_domain = [&](const std::string& dir) {
                if (!fs::is_directory(dir)) throw DataError("benchmark directory not found: " + dir);
                for (const char* f : {"queries.jsonl", "corpus.jsonl", "qrels.txt", "pools.txt", "para_qrels.txt",
                                      "para_pools.txt", "train_queries.txt", "test_queries.txt"}) {
                    run.input((fs::path(dir) / f).string(), std::string("benchmark file ") + f);
                }
                return read_benchmark(dir);
            };
            const auto a = load_domain(dom_a);
            const auto b = load_domain(dom_b);
            CrossDomainInputs in;
            in.domain_a = &a;
            in.domain_b = &b;
            in.name_a = name_a;
            in.name_b = name_b;
            auto load_encoder = [&](const std::string& path, EncoderRole role) -> std::optional<MicroEncoder> {
                if (path.empty()) return std::nullopt;
                if (!fs::exists(path)) {
                    throw DataError("cells " + grid_label(role, AggregatorRole::kDomainA) + "/" +
                                    grid_label(role, AggregatorRole::kDomainB) + ": encoder checkpoint not found: " +
                                    path);
                }
                return MicroEncoder::load(run.input(path, "encoder checkpoint"));
            };
            in.encoder_a = load_encoder(enc_a, EncoderRole::kDomainA);
            in.encoder_b = load_encoder(enc_b, EncoderRole::kDomainB);
            const auto grid = run_cross_domain_matrix(in, pc);
            std::string table, ndjson;
            for (const auto& ts : grid.test_sets) {
                const auto rows = grid_rows(ts, "BM25 cutoff " + std::to_string(pc.cutoff.cutoff));
                table += ts.name + "\n" + format_report_table(rows) + "\n";
                ndjson += format_report_ndjson(rows, ts.name);
            }
            std::cout << table;
            write_file_atomic(run.out("grid.txt"), table);
            write_file_atomic(run.out("grid.ndjson"), ndjson);
            run.output(run.out("grid.txt"));
            run.output(run.out("grid.ndjson"));
            run.finish();
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    if (!action) {
        std::cerr << "no subcommand given\n";
        return 1;
    }
    try {
        action();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
