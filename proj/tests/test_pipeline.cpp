#include <gtest/gtest.h>

#include "pli/artifacts.hpp"
#include "pli/config.hpp"
#include "pli/pipeline.hpp"
#include "test_util.hpp"

using namespace pli;

namespace {

SyntheticConfig small_synth(std::uint64_t seed = 7) {
    SyntheticConfig s;
    s.seed = seed;
    s.n_queries = 12;
    s.pool_size = 40;
    s.decoys_per_query = 8;
    s.offtopic_per_query = 5;
    s.vocab_size = 1500;
    s.doc_len_tokens = 256;
    s.test_fraction = 0.25;
    return s;
}

PipelineConfig small_pipeline() {
    Config c;
    c.set_from_string("seed", "3");
    c.set_from_string("corpus.paragraph_len", "64");
    c.set_from_string("retrieval.top_k", "20");
    c.set_from_string("encoder.d_embed", "8");
    c.set_from_string("encoder.d_repr", "8");
    c.set_from_string("stage1.lr", "0.003");
    c.set_from_string("stage1.epochs", "1");
    c.set_from_string("aggregator.hidden", "8");
    c.set_from_string("aggregator.lr", "0.002");
    c.set_from_string("aggregator.epochs", "2");
    return pipeline_config(c);
}

void expect_same_report(const EvalReport& a, const EvalReport& b, const std::string& what) {
    EXPECT_EQ(a.counts, b.counts) << what;
    EXPECT_EQ(a.f1, b.f1) << what;
}

}  // namespace

TEST(Pipeline, PreparedDomainSplits) {
    auto data = generate_synthetic_benchmark(small_synth());
    auto cfg = small_pipeline();
    auto vocab = build_vocabulary({&data}, cfg.lowercase);
    auto dom = prepare_domain("A", data, vocab, cfg);
    EXPECT_EQ(dom.test_queries, data.test_queries);
    EXPECT_EQ(dom.train_queries.size() + dom.validation_queries.size(), data.train_queries.size());
    EXPECT_EQ(dom.validation_queries.size(), 2u);  // ceil(0.2 * 9)
    for (const auto& q : dom.test_queries) {
        EXPECT_EQ(dom.test_eval_pools.candidates(q), data.pools.candidates(q));
        EXPECT_EQ(dom.test_pools.candidates(q).size(), 20u);
    }
    EXPECT_FALSE(dom.stage1.empty());
    EXPECT_GT(dom.recall_at_k, 0.5);
}

TEST(Pipeline, DomainRunIsDeterministic) {
    auto data = generate_synthetic_benchmark(small_synth());
    auto cfg = small_pipeline();
    auto a = run_domain_pipeline(data, cfg);
    auto b = run_domain_pipeline(data, cfg);
    expect_same_report(a.pipeline.report, b.pipeline.report, "pipeline");
    expect_same_report(a.baseline.report, b.baseline.report, "baseline");
    EXPECT_EQ(a.aggregator.loss_curve, b.aggregator.loss_curve);
    EXPECT_EQ(a.pipeline.report.total_pairs(), data.test_queries.size() * 40u);
    EXPECT_EQ(a.vs_baseline.n, data.test_queries.size());
}

TEST(Pipeline, CrossDomainGridWithIdenticalDomains) {
    auto a = generate_synthetic_benchmark(small_synth());
    auto b = generate_synthetic_benchmark(small_synth());
    auto cfg = small_pipeline();
    CrossDomainInputs in;
    in.domain_a = &a;
    in.domain_b = &b;
    auto grid = run_cross_domain_matrix(in, cfg);
    ASSERT_EQ(grid.test_sets.size(), 2u);
    EXPECT_EQ(grid.test_sets[0].name, "LawDocTest");
    EXPECT_EQ(grid.test_sets[1].name, "PatentDocTest");
    const char* enc[] = {"ORG", "ORG", "Law", "Law", "Patent", "Patent"};
    const char* agg[] = {"LawRNN", "PatentRNN"};
    for (const auto& ts : grid.test_sets) {
        ASSERT_EQ(ts.cells.size(), 6u);
        for (std::size_t i = 0; i < 6; ++i) {
            EXPECT_EQ(ts.cells[i].label, "R" + std::to_string(i + 1));
            EXPECT_EQ(ts.cells[i].encoder, enc[i]);
            EXPECT_EQ(ts.cells[i].aggregator, agg[i % 2]);
        }
        expect_same_report(ts.cells[0].report, ts.cells[1].report, ts.name + " R1/R2");
        for (std::size_t i = 3; i < 6; ++i) expect_same_report(ts.cells[2].report, ts.cells[i].report, ts.name);
        EXPECT_EQ(ts.cells[2].per_query_f1, ts.cells[5].per_query_f1);
    }
    for (std::size_t i = 0; i < 6; ++i) {
        expect_same_report(grid.test_sets[0].cells[i].report, grid.test_sets[1].cells[i].report, "across test sets");
    }
    expect_same_report(grid.test_sets[0].baseline, grid.test_sets[1].baseline, "baseline");

    auto rows = grid_rows(grid.test_sets[0], "BM25");
    EXPECT_EQ(rows.size(), 7u);
    EXPECT_EQ(rows[3].model, "R3 Law + LawRNN");
}

TEST(Pipeline, CrossDomainRejectsMismatchedEncoder) {
    auto a = generate_synthetic_benchmark(small_synth());
    auto cfg = small_pipeline();
    CrossDomainInputs in;
    in.domain_a = &a;
    in.domain_b = &a;
    EncoderConfig ec;
    ec.vocab_size = 10;
    ec.d_embed = 8;
    ec.d_repr = 8;
    in.encoder_b = MicroEncoder(ec);
    try {
        run_cross_domain_matrix(in, cfg);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("R5"), std::string::npos) << e.what();
    }
}

TEST(Artifacts, PredictionsAndStage1RoundTrip) {
    testutil::TempDir dir;
    std::vector<Prediction> preds{{"q1", "d1", 0.1 + 0.2, false}, {"q1", "d2", 0.75, true}};
    save_predictions(dir / "p.tsv", preds);
    auto back = load_predictions(dir / "p.tsv");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].prob, 0.1 + 0.2);
    EXPECT_EQ(back[1].relevant, true);

    std::vector<Stage1Example> ex(1);
    ex[0].query_key = "q#0";
    ex[0].cand_key = "d#1";
    ex[0].query = {4, 5};
    ex[0].candidate = {6};
    ex[0].label = 1;
    save_stage1_dataset(dir / "s.jsonl", ex);
    EXPECT_EQ(load_stage1_dataset(dir / "s.jsonl"), ex);

    RunManifest m;
    m.command = "index";
    m.config_json = Config().canonical();
    m.config_hash = Config().hash();
    m.versions = artifact_versions();
    m.write(dir / "manifest.json");
    EXPECT_NE(read_file(dir / "manifest.json").find("PLIX/1"), std::string::npos);
}
