#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "pli/pair_encoder.hpp"
#include "pli/vector_store.hpp"
#include "test_util.hpp"

using namespace pli;

namespace {

EncoderConfig tiny_config(std::uint64_t seed, std::size_t vocab = 12, std::size_t de = 3, std::size_t dr = 4) {
    EncoderConfig c;
    c.vocab_size = vocab;
    c.d_embed = de;
    c.d_repr = dr;
    c.seed = seed;
    c.init_scale = 0.5;
    return c;
}

std::span<double> slice(MicroEncoder& enc, const std::string& name) {
    const auto& s = enc.layout().slice(name);
    return enc.params().subspan(s.offset, s.size);
}

Stage1Example example(TokenSeq q, TokenSeq c, int label) {
    Stage1Example e;
    e.query = std::move(q);
    e.candidate = std::move(c);
    e.label = label;
    return e;
}

/// Two topics over disjoint token ranges; positives share the query's topic.
std::vector<Stage1Example> separable_set() {
    std::vector<Stage1Example> d;
    const TokenSeq a{4, 5, 6}, b{7, 8, 9};
    d.push_back(example(a, {4, 5}, 1));
    d.push_back(example(a, {6, 4}, 1));
    d.push_back(example(b, {7, 9}, 1));
    d.push_back(example(b, {8, 8}, 1));
    d.push_back(example(a, {5, 6, 4}, 1));
    d.push_back(example(a, {7, 8}, 0));
    d.push_back(example(a, {9, 9}, 0));
    d.push_back(example(b, {4, 6}, 0));
    d.push_back(example(b, {5, 5}, 0));
    d.push_back(example(b, {6, 4, 5}, 0));
    return d;
}

}  // namespace

TEST(Encoder, IdenticalInputsZeroAbsBlock) {
    MicroEncoder enc(tiny_config(1));
    TokenSeq q{4, 5, 9};
    auto f = enc.forward(q, q);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(f.features[9 + k], 0.0);
}

TEST(Encoder, ZeroEmbeddingsGiveTanhB1) {
    MicroEncoder enc(tiny_config(2));
    for (auto& x : slice(enc, "embedding")) x = 0.0;
    auto b1 = slice(enc, "b1");
    for (TokenSeq q : {TokenSeq{4}, TokenSeq{5, 6, 7}}) {
        auto r = enc.encode(q, TokenSeq{9, 10});
        for (std::size_t k = 0; k < r.size(); ++k) EXPECT_DOUBLE_EQ(r[k], std::tanh(b1[k]));
    }
}

TEST(Encoder, HandComputedTwoTokenCase) {
    MicroEncoder enc(tiny_config(3, 6, 2, 1));
    auto emb = slice(enc, "embedding");
    for (auto& x : emb) x = 0.0;
    emb[4 * 2 + 0] = 0.2;
    emb[4 * 2 + 1] = -0.4;
    emb[5 * 2 + 0] = 0.6;
    emb[5 * 2 + 1] = 0.1;
    const double w1[8] = {0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8};
    std::copy(std::begin(w1), std::end(w1), slice(enc, "W1").begin());
    slice(enc, "b1")[0] = 0.05;
    auto w2 = slice(enc, "W2");
    w2[0] = -0.3;
    w2[1] = 0.9;
    auto b2 = slice(enc, "b2");
    b2[0] = 0.0;
    b2[1] = 0.1;

    // q = [4, 5]: mean (0.4, -0.15); c = [5]: mean (0.6, 0.1).
    // features 0.4 -0.15 | 0.6 0.1 | 0.24 -0.015 | 0.2 0.25
    // pre = 0.04 + 0.03 + 0.18 + 0.04 - 0.12 - 0.009 + 0.14 - 0.2 + 0.05 = 0.151
    auto f = enc.forward(TokenSeq{4, 5}, TokenSeq{5});
    const double r = std::tanh(0.151);
    ASSERT_EQ(f.repr.size(), 1u);
    EXPECT_NEAR(f.repr[0], r, 1e-15);
    EXPECT_NEAR(f.logit_neg, -0.3 * r, 1e-15);
    EXPECT_NEAR(f.logit_pos, 0.9 * r + 0.1, 1e-15);
    EXPECT_NEAR(f.prob, 1.0 / (1.0 + std::exp(-(1.2 * r + 0.1))), 1e-15);
}

TEST(Encoder, OutputBoundsAndEmptyInput) {
    MicroEncoder enc(tiny_config(4));
    auto r = enc.encode(TokenSeq{4, 5}, TokenSeq{6});
    for (double x : r) {
        EXPECT_GT(x, -1.0);
        EXPECT_LT(x, 1.0);
    }
    auto f = enc.forward(TokenSeq{4}, TokenSeq{7});
    EXPECT_GT(f.prob, 0.0);
    EXPECT_LT(f.prob, 1.0);
    EXPECT_NEAR(softmax2_positive(f.logit_neg, f.logit_pos) + softmax2_positive(f.logit_pos, f.logit_neg), 1.0,
                1e-15);
    EXPECT_THROW(enc.encode(TokenSeq{}, TokenSeq{4}), std::invalid_argument);
    EXPECT_THROW(enc.encode(TokenSeq{4}, TokenSeq{}), std::invalid_argument);
    EXPECT_THROW(enc.encode(TokenSeq{400}, TokenSeq{4}), std::invalid_argument);
}

TEST(Encoder, ClassifyUniformAndMargin) {
    MicroEncoder enc(tiny_config(5));
    for (auto& x : slice(enc, "W2")) x = 0.0;
    for (auto& x : slice(enc, "b2")) x = 0.0;
    EXPECT_EQ(enc.classify(TokenSeq{4}, TokenSeq{5}), 0.5);
    slice(enc, "b2")[1] = 10.0;
    const double p = enc.classify(TokenSeq{4}, TokenSeq{5});
    EXPECT_GT(p, 0.9999);
    EXPECT_NEAR(p, 1.0 / (1.0 + std::exp(-10.0)), 1e-15);
}

TEST(Encoder, GradientsMatchFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        MicroEncoder enc(tiny_config(100 + seed));
        Rng rng(seed);
        std::vector<Stage1Example> batch;
        for (int e = 0; e < 3; ++e) {
            TokenSeq q, c;
            for (std::size_t i = 0, n = 1 + rng.uniform_index(4); i < n; ++i) q.push_back(4 + rng.uniform_index(8));
            for (std::size_t i = 0, n = 1 + rng.uniform_index(4); i < n; ++i) c.push_back(4 + rng.uniform_index(8));
            batch.push_back(example(q, c, e % 2));
        }
        std::vector<double> grad, scratch;
        enc.loss_and_gradients(batch, grad);
        auto res = testutil::check_gradient(enc.params(), grad, [&] { return enc.loss_and_gradients(batch, scratch); });
        EXPECT_LT(res.max_rel, 1e-4) << "seed " << seed << " param " << res.worst;
    }
}

TEST(Encoder, ZeroLearningRateLeavesParameters) {
    MicroEncoder enc(tiny_config(6));
    const std::vector<double> before(enc.params().begin(), enc.params().end());
    auto data = separable_set();
    train_stage1(enc, data, {0.0, 2, 3, 0});
    EXPECT_TRUE(std::equal(before.begin(), before.end(), enc.params().begin()));
}

TEST(Encoder, FitsSeparableSet) {
    MicroEncoder enc(tiny_config(7, 12, 8, 8));
    auto data = separable_set();
    auto log = train_stage1(enc, data, {0.05, 2, 200, 1});
    ASSERT_EQ(log.size(), 200u);
    EXPECT_DOUBLE_EQ(stage1_f1(enc, data).f1(), 1.0);
    EXPECT_LT(log.back().mean_loss, log.front().mean_loss);
}

TEST(Encoder, FullBatchLossDecreasesMonotonically) {
    MicroEncoder enc(tiny_config(8, 12, 8, 8));
    auto data = separable_set();
    auto log = train_stage1(enc, data, {0.01, data.size(), 30, 0});
    for (std::size_t i = 1; i < log.size(); ++i) EXPECT_LT(log[i].mean_loss, log[i - 1].mean_loss) << i;
}

TEST(Encoder, TrainingIsDeterministic) {
    testutil::TempDir dir;
    auto data = separable_set();
    MicroEncoder a(tiny_config(9)), b(tiny_config(9));
    train_stage1(a, data, {0.01, 2, 5, 3});
    train_stage1(b, data, {0.01, 2, 5, 3});
    a.save(dir / "a.ckpt");
    b.save(dir / "b.ckpt");
    EXPECT_EQ(read_file(dir / "a.ckpt"), read_file(dir / "b.ckpt"));
    auto c = MicroEncoder::load(dir / "a.ckpt");
    EXPECT_TRUE(std::equal(c.params().begin(), c.params().end(), a.params().begin(), a.params().end()));
    EXPECT_EQ(c.config().d_repr, a.config().d_repr);
}

TEST(Encoder, NonFiniteLossAborts) {
    MicroEncoder enc(tiny_config(10));
    slice(enc, "b2")[1] = std::numeric_limits<double>::quiet_NaN();
    auto data = separable_set();
    EXPECT_THROW(train_stage1(enc, data, {0.01, 2, 1, 0}), NumericalError);
}

TEST(Stage1F1, HandConfusionMatrix) {
    // d_embed = d_repr = 1: logit_pos = tanh(mean_q), so the query token's
    // embedding sign decides the prediction.
    MicroEncoder enc(tiny_config(11, 8, 1, 1));
    for (auto& x : enc.params()) x = 0.0;
    slice(enc, "embedding")[4] = 1.0;
    slice(enc, "embedding")[5] = -1.0;
    slice(enc, "W1")[0] = 1.0;
    slice(enc, "W2")[1] = 1.0;
    std::vector<Stage1Example> d{example({4}, {6}, 1), example({4}, {6}, 1), example({4}, {6}, 0),
                                 example({5}, {6}, 1), example({5}, {6}, 0), example({5}, {6}, 0)};
    auto c = stage1_f1(enc, d);
    EXPECT_EQ(c.tp, 2u);
    EXPECT_EQ(c.fp, 1u);
    EXPECT_EQ(c.fn, 1u);
    EXPECT_EQ(c.tn, 2u);
    EXPECT_DOUBLE_EQ(c.precision(), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(c.recall(), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(c.f1(), 2.0 / 3.0);

    std::vector<Stage1Example> neg{example({5}, {6}, 1), example({5}, {6}, 0)};
    auto n = stage1_f1(enc, neg);
    EXPECT_EQ(n.recall(), 0.0);
    EXPECT_EQ(n.precision(), 0.0);
    EXPECT_EQ(n.f1(), 0.0);
    std::vector<Stage1Example> perfect{example({4}, {6}, 1), example({5}, {6}, 0)};
    EXPECT_EQ(stage1_f1(enc, perfect).f1(), 1.0);
}

// --- dataset construction -----------------------------------------------------

namespace {

struct ParaFixture {
    DocumentStore store;
    QrelSet qrels;
    CandidatePool pools;
};

/// Query paragraphs q#0..q#(nq-1); candidate docs c0..c(nd-1) with `np`
/// two-token paragraphs each. Query paragraph i is relevant to c_i#0.
ParaFixture para_fixture(std::size_t nq, std::size_t nd, std::size_t np) {
    ParaFixture f;
    TokenId next = 4;
    TokenSeq qt;
    for (std::size_t i = 0; i < 2 * nq; ++i) qt.push_back(next++);
    f.store.add(testutil::make_token_document("q", qt, 2));
    for (std::size_t d = 0; d < nd; ++d) {
        TokenSeq t;
        for (std::size_t i = 0; i < 2 * np; ++i) t.push_back(next++);
        f.store.add(testutil::make_token_document("c" + std::to_string(d), t, 2));
    }
    for (std::size_t i = 0; i < nq; ++i) {
        const auto qk = paragraph_key("q", i);
        f.qrels.add(qk, paragraph_key("c" + std::to_string(i % nd), 0));
        for (std::size_t d = 0; d < nd; ++d) {
            for (std::size_t p = 0; p < np; ++p) f.pools.add(qk, paragraph_key("c" + std::to_string(d), p));
        }
    }
    return f;
}

}  // namespace

TEST(Stage1Dataset, AllPoolNonRelevant) {
    auto f = para_fixture(1, 3, 11);
    auto data = build_stage1_dataset(f.qrels, f.pools, {}, document_lookup({&f.store}));
    ASSERT_EQ(data.size(), 33u);
    std::size_t pos = 0;
    for (const auto& e : data) pos += e.label;
    EXPECT_EQ(pos, 1u);
    EXPECT_NEAR(static_cast<double>(pos) / static_cast<double>(data.size()), 0.03, 0.001);
    EXPECT_EQ(data[0].query, f.store.paragraph("q#0").tokens);
}

TEST(Stage1Dataset, RandomKPerPositive) {
    auto f = para_fixture(4, 4, 10);
    NegativeSamplingStrategy s{NegativeSampling::kRandomKPerPositive, 5, 9};
    auto data = build_stage1_dataset(f.qrels, f.pools, s, document_lookup({&f.store}));
    std::size_t pos = 0, neg = 0;
    for (const auto& e : data) {
        (e.label ? pos : neg) += 1;
        if (!e.label) {
            // Negatives come from the document that holds the relevant paragraph.
            const auto qi = parse_paragraph_key(e.query_key).second;
            EXPECT_EQ(parse_paragraph_key(e.cand_key).first, "c" + std::to_string(qi));
            EXPECT_NE(parse_paragraph_key(e.cand_key).second, 0u);
        }
    }
    EXPECT_EQ(pos, 4u);
    EXPECT_EQ(neg, 20u);
    EXPECT_EQ(build_stage1_dataset(f.qrels, f.pools, s, document_lookup({&f.store})), data);
    s.seed = 10;
    EXPECT_NE(build_stage1_dataset(f.qrels, f.pools, s, document_lookup({&f.store})), data);
}

TEST(Stage1Dataset, InsufficientNegatives) {
    auto f = para_fixture(1, 1, 3);
    NegativeSamplingStrategy s{NegativeSampling::kRandomKPerPositive, 5, 0};
    EXPECT_THROW(build_stage1_dataset(f.qrels, f.pools, s, document_lookup({&f.store})), std::invalid_argument);
    s.k = 2;
    EXPECT_EQ(build_stage1_dataset(f.qrels, f.pools, s, document_lookup({&f.store})).size(), 3u);
}

TEST(Stage1Dataset, PairsRespectBudget) {
    DocumentStore store;
    store.add(testutil::make_token_document("q", TokenSeq(400, 5), 400));
    store.add(testutil::make_token_document("c", TokenSeq(400, 6), 400));
    QrelSet qrels;
    qrels.add("q#0", "c#0");
    CandidatePool pools;
    pools.add("q#0", "c#0");
    auto data = build_stage1_dataset(qrels, pools, {}, document_lookup({&store}), 64);
    ASSERT_EQ(data.size(), 1u);
    EXPECT_EQ(data[0].query.size() + data[0].candidate.size(), 61u);
}

TEST(Stage1Dataset, SamplingNamesRoundTrip) {
    for (auto k : {NegativeSampling::kAllPoolNonRelevant, NegativeSampling::kRandomKPerPositive}) {
        EXPECT_EQ(parse_negative_sampling(to_string(k)), k);
    }
    EXPECT_THROW(parse_negative_sampling("bogus"), std::invalid_argument);
}

// --- external vectors ---------------------------------------------------------

TEST(VectorStore, RoundTrips) {
    testutil::TempDir dir;
    ExternalVectorStore empty(8);
    empty.save(dir / "e.pliv");
    EXPECT_EQ(ExternalVectorStore::load(dir / "e.pliv"), empty);

    ExternalVectorStore one(3);
    const float v[3] = {0.1f, -2.5f, 1e-30f};
    one.put({"q", "c", 1, 2}, v);
    one.save(dir / "o.pliv");
    auto back = ExternalVectorStore::load(dir / "o.pliv", 3);
    EXPECT_EQ(back, one);
    EXPECT_EQ(std::memcmp(back.find({"q", "c", 1, 2})->data(), v, sizeof v), 0);

    std::mt19937_64 gen(5);
    std::uniform_real_distribution<float> u(-1, 1);
    ExternalVectorStore many(16);
    for (int i = 0; i < 100; ++i) {
        std::vector<float> x(16);
        for (auto& e : x) e = u(gen);
        many.put({"q" + std::to_string(i % 7), "c" + std::to_string(i), static_cast<std::uint16_t>(i % 5),
                  static_cast<std::uint16_t>(i % 3)},
                 x);
    }
    many.save(dir / "m.pliv");
    EXPECT_EQ(ExternalVectorStore::load(dir / "m.pliv"), many);
    many.save(dir / "m2.pliv");
    EXPECT_EQ(read_file(dir / "m.pliv"), read_file(dir / "m2.pliv"));
}

TEST(VectorStore, Errors) {
    testutil::TempDir dir;
    ExternalVectorStore s(4);
    const float bad[3] = {1, 2, 3};
    EXPECT_THROW(s.put({"q", "c", 0, 0}, bad), std::invalid_argument);
    const float ok[4] = {1, 2, 3, 4};
    s.put({"q", "c", 0, 0}, ok);
    s.save(dir / "s.pliv");
    EXPECT_THROW(ExternalVectorStore::load(dir / "s.pliv", 8), DataError);

    auto bytes = read_file(dir / "s.pliv");
    write_file_atomic(dir / "t.pliv", bytes.substr(0, bytes.size() - 3));
    try {
        ExternalVectorStore::load(dir / "t.pliv");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
    }
    write_file_atomic(dir / "m.pliv", "PLIX" + bytes.substr(4));
    EXPECT_THROW(ExternalVectorStore::load(dir / "m.pliv"), DataError);
}
