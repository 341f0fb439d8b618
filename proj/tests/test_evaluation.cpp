#include <gtest/gtest.h>

#include <set>

#include "json.hpp"
#include "oracles.hpp"
#include "pli/evaluation.hpp"

using namespace pli;

namespace {

CandidatePool pool_of(const std::map<std::string, std::vector<std::string>>& m) {
    CandidatePool p;
    for (const auto& [q, d] : m) p.set(q, d);
    return p;
}

QrelSet qrels_of(const std::map<std::string, std::vector<std::string>>& m) {
    QrelSet q;
    for (const auto& [qid, ds] : m) {
        q.touch(qid);
        for (const auto& d : ds) q.add(qid, d);
    }
    return q;
}

std::vector<std::string> ids(const std::string& prefix, int n) {
    std::vector<std::string> v;
    for (int i = 0; i < n; ++i) {
        char b[32];
        std::snprintf(b, sizeof b, "%s%03d", prefix.c_str(), i);
        v.push_back(b);
    }
    return v;
}

RetrievalRun run_of(const std::map<std::string, std::vector<std::string>>& m) {
    RetrievalRun r;
    for (const auto& [q, docs] : m) {
        RankedList l;
        for (std::size_t i = 0; i < docs.size(); ++i) l.push_back({docs[i], 100.0 - static_cast<double>(i)});
        r.set(q, l);
    }
    return r;
}

void expect_consistent(const EvalReport& r, const QrelSet& qrels, const Decisions& d) {
    EXPECT_EQ(r.counts.tp + r.counts.fn, qrels.total_relevant());
    std::size_t predicted = 0;
    for (const auto& [q, m] : d) {
        for (const auto& [c, p] : m) predicted += p;
    }
    EXPECT_EQ(r.counts.tp + r.counts.fp, predicted);
    if (r.precision + r.recall > 0) {
        EXPECT_NEAR(r.f1, 2 * r.precision * r.recall / (r.precision + r.recall), 1e-15);
    } else {
        EXPECT_EQ(r.f1, 0.0);
    }
}

}  // namespace

TEST(PooledMetrics, PerfectDecisions) {
    auto pools = pool_of({{"q1", {"a", "b", "c"}}});
    auto qrels = qrels_of({{"q1", {"a"}}});
    Decisions d{{"q1", {{"a", true}, {"b", false}, {"c", false}}}};
    auto r = pooled_binary_metrics(d, qrels, pools);
    EXPECT_EQ(r.precision, 1.0);
    EXPECT_EQ(r.recall, 1.0);
    EXPECT_EQ(r.f1, 1.0);
    EXPECT_EQ(r.total_pairs(), 3u);
    expect_consistent(r, qrels, d);
}

TEST(PooledMetrics, TwoQueryHandConfusion) {
    auto pools = pool_of({{"q1", {"a", "b", "c", "d", "e"}}, {"q2", {"f", "g", "h"}}});
    auto qrels = qrels_of({{"q1", {"a", "b", "c"}}, {"q2", {"f", "g"}}});
    Decisions d{{"q1", {{"a", true}, {"b", true}, {"d", true}}}, {"q2", {{"f", true}}}};
    auto r = pooled_binary_metrics(d, qrels, pools);
    EXPECT_EQ(r.counts, (BinaryCounts{3, 1, 2, 2}));
    EXPECT_DOUBLE_EQ(r.precision, 0.75);
    EXPECT_DOUBLE_EQ(r.recall, 0.6);
    EXPECT_NEAR(r.f1, 2.0 / 3.0, 1e-12);
    EXPECT_EQ(r.total_pairs(), 8u);
    expect_consistent(r, qrels, d);
}

TEST(PooledMetrics, UnscoredRelevantIsFalseNegative) {
    // 200 given candidates, decisions only for the top 50.
    auto cands = ids("d", 200);
    auto pools = pool_of({{"q", cands}});
    auto qrels = qrels_of({{"q", {cands[3], cands[120]}}});
    Decisions d;
    for (int i = 0; i < 50; ++i) d["q"][cands[i]] = i < 5;
    auto r = pooled_binary_metrics(d, qrels, pools);
    EXPECT_EQ(r.counts, (BinaryCounts{1, 4, 1, 194}));
    EXPECT_EQ(r.total_pairs(), 200u);
    expect_consistent(r, qrels, d);
}

TEST(PooledMetrics, RelevantOutsidePoolCountsAsMiss) {
    auto pools = pool_of({{"q", {"a", "b"}}});
    auto qrels = qrels_of({{"q", {"a", "z"}}});
    Decisions d{{"q", {{"a", true}}}};
    auto r = pooled_binary_metrics(d, qrels, pools);
    EXPECT_EQ(r.counts, (BinaryCounts{1, 0, 1, 1}));
    EXPECT_DOUBLE_EQ(r.recall, 0.5);
    expect_consistent(r, qrels, d);
}

TEST(PooledMetrics, NothingPredicted) {
    auto pools = pool_of({{"q1", {"a", "b"}}, {"q2", {"c"}}});
    auto qrels = qrels_of({{"q1", {"b"}}, {"q2", {}}});
    Decisions d;
    auto r = pooled_binary_metrics(d, qrels, pools);
    EXPECT_EQ(r.counts, (BinaryCounts{0, 0, 1, 2}));
    EXPECT_EQ(r.precision, 0.0);
    EXPECT_EQ(r.recall, 0.0);
    EXPECT_EQ(r.f1, 0.0);
    expect_consistent(r, qrels, d);
}

TEST(PooledMetrics, DecisionOutsidePoolIsAnError) {
    auto pools = pool_of({{"q", {"a"}}});
    auto qrels = qrels_of({{"q", {"a"}}});
    EXPECT_THROW(pooled_binary_metrics(Decisions{{"q", {{"x", true}}}}, qrels, pools), DataError);
    EXPECT_THROW(pooled_binary_metrics(Decisions{{"other", {{"a", true}}}}, qrels, pools), DataError);
}

TEST(Cutoff, Examples) {
    auto cands = ids("d", 200);
    auto pools = pool_of({{"q", cands}});
    auto qrels = qrels_of({{"q", {cands[0], cands[1], cands[2], cands[3], cands[4]}}});
    auto run = run_of({{"q", cands}});
    auto r = cutoff_evaluate(run, qrels, {5}, pools);
    EXPECT_EQ(r.precision, 1.0);
    EXPECT_EQ(r.recall, 1.0);
    EXPECT_EQ(r.f1, 1.0);
    EXPECT_EQ(r.counts.tn, 195u);

    auto all = cutoff_evaluate(run, qrels, {250}, pools);
    EXPECT_EQ(all.recall, 1.0);
    EXPECT_EQ(all.counts.tp + all.counts.fp, 200u);
    EXPECT_THROW(cutoff_evaluate(run, qrels, {0}, pools), std::invalid_argument);
}

TEST(Cutoff, ThreeQueryHandTally) {
    auto pools = pool_of({{"q1", {"a", "b", "c", "d"}}, {"q2", {"e", "f", "g", "h"}}, {"q3", {"i", "j", "k", "l"}}});
    auto qrels = qrels_of({{"q1", {"a", "c"}}, {"q2", {"h"}}, {"q3", {"i", "j"}}});
    auto run = run_of({{"q1", {"a", "b", "c", "d"}}, {"q2", {"e", "f", "g", "h"}}, {"q3", {"j", "i", "k", "l"}}});
    // c=2: q1 a+ b-, q2 e- f-, q3 j+ i+ -> tp 3, fp 3, fn c,h -> 2.
    auto r = cutoff_evaluate(run, qrels, {2}, pools);
    EXPECT_EQ(r.counts, (BinaryCounts{3, 3, 2, 4}));
    EXPECT_DOUBLE_EQ(r.precision, 0.5);
    EXPECT_DOUBLE_EQ(r.recall, 0.6);
    double prev = 0.0;
    for (std::size_t c = 1; c <= 5; ++c) {
        const double rc = cutoff_evaluate(run, qrels, {c}, pools).recall;
        EXPECT_GE(rc, prev);
        prev = rc;
    }
}

TEST(PerQueryF1, Cases) {
    auto pools = pool_of({{"q1", {"a", "b", "c"}}, {"q2", {"d", "e"}}, {"q3", {"f", "g"}}, {"q4", {"h"}}});
    auto qrels = qrels_of({{"q1", {"a", "b"}}, {"q2", {"d"}}, {"q3", {}}, {"q4", {}}});
    Decisions d{{"q1", {{"a", true}, {"c", true}}}, {"q2", {{"e", true}}}, {"q3", {{"f", false}}}, {"q4", {{"h", true}}}};
    std::vector<std::string> qs{"q1", "q2", "q3", "q4"};
    auto f = per_query_f1(d, qrels, qs);
    EXPECT_DOUBLE_EQ(f["q1"], 0.5);  // tp 1, fp 1, fn 1
    EXPECT_EQ(f["q2"], 0.0);         // all wrong
    EXPECT_EQ(f["q3"], 1.0);         // nothing relevant, nothing predicted
    EXPECT_EQ(f["q4"], 0.0);         // one false positive
    EXPECT_EQ(per_query_f1(d, qrels, qs, 0.0)["q3"], 0.0);

    // A single query reduces to pooled metrics.
    std::vector<std::string> one{"q1"};
    auto pooled = pooled_binary_metrics({{"q1", d["q1"]}}, qrels_of({{"q1", {"a", "b"}}}), pool_of({{"q1", {"a", "b", "c"}}}));
    EXPECT_DOUBLE_EQ(per_query_f1(d, qrels, one)["q1"], pooled.f1);
}

// Reference values from scipy.stats.ttest_rel.
struct TFixture {
    std::vector<double> a, b;
    double t, p;
};

const std::vector<TFixture>& reference_fixtures() {
    static const std::vector<TFixture> f{
        {{0.1, 0.2, 0.05, 0.15, 0.1}, {0, 0, 0, 0, 0}, 4.706787243316416, 0.009261696759514425},
        {{0.8, 0.6, 0.9, 0.4, 0.7, 0.5}, {0.5, 0.7, 0.6, 0.3, 0.2, 0.6}, 1.6854996561581055, 0.15270488809703753},
        {{1.0, 0.0}, {0.5, 0.25}, 0.3333333333333333, 0.7951672353008665},
        {{0.2, 0.1, 0.3, 0.0, 0.1, 0.2, 0.15}, {0.4, 0.35, 0.3, 0.2, 0.5, 0.3, 0.25}, -3.6727658015579383,
         0.010419906259606442},
    };
    return f;
}

TEST(PairedTTest, MatchesReferenceValues) {
    for (const auto& f : reference_fixtures()) {
        auto r = paired_t_test(f.a, f.b);
        EXPECT_NEAR(r.t, f.t, 1e-9);
        EXPECT_NEAR(r.p, f.p, 1e-9);
        EXPECT_EQ(r.df, static_cast<double>(f.a.size() - 1));
        EXPECT_EQ(r.significant, f.p < 0.05);
    }
}

TEST(PairedTTest, MatchesIncompleteBetaOracle) {
    for (const auto& f : reference_fixtures()) {
        auto r = paired_t_test(f.a, f.b);
        auto o = oracle::paired_t(f.a, f.b);
        EXPECT_NEAR(r.t, o.t, 1e-9);
        EXPECT_NEAR(r.p, o.p, 1e-6);
    }
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + gen() % 60;
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = u(gen);
            b[i] = u(gen) * 0.8;
        }
        auto r = paired_t_test(a, b);
        auto o = oracle::paired_t(a, b);
        EXPECT_NEAR(r.p, o.p, 1e-6) << n;
        EXPECT_GE(r.p, 0.0);
        EXPECT_LE(r.p, 1.0);
    }
}

TEST(PairedTTest, DegenerateCases) {
    std::vector<double> a{0.3, 0.5, 0.9};
    auto same = paired_t_test(a, a);
    EXPECT_EQ(same.t, 0.0);
    EXPECT_EQ(same.p, 1.0);
    EXPECT_FALSE(same.degenerate);
    EXPECT_FALSE(same.significant);

    std::vector<double> ones{1, 1, 1, 1}, zeros{0, 0, 0, 0};
    auto deg = paired_t_test(ones, zeros);
    EXPECT_TRUE(deg.degenerate);
    EXPECT_EQ(deg.p, 0.0);
    EXPECT_TRUE(std::isinf(deg.t));
    EXPECT_GT(deg.t, 0.0);
    auto o = oracle::paired_t(ones, zeros);
    EXPECT_EQ(o.p, deg.p);
}

TEST(PairedTTest, AntisymmetricAndErrors) {
    for (const auto& f : reference_fixtures()) {
        auto ab = paired_t_test(f.a, f.b), ba = paired_t_test(f.b, f.a);
        EXPECT_EQ(ab.t, -ba.t);
        EXPECT_NEAR(ab.p, ba.p, 1e-15);
    }
    std::vector<double> one{1.0}, two{1.0, 2.0};
    EXPECT_THROW(paired_t_test(one, one), std::invalid_argument);
    EXPECT_THROW(paired_t_test(one, two), std::invalid_argument);
    EXPECT_THROW(paired_t_test(two, two, 0.0), std::invalid_argument);

    std::map<std::string, double> ma{{"q1", 0.5}, {"q2", 0.7}, {"q3", 0.2}}, mb{{"q3", 0.1}, {"q1", 0.4}, {"q2", 0.3}};
    std::vector<double> va{0.5, 0.7, 0.2}, vb{0.4, 0.3, 0.1};
    EXPECT_EQ(paired_t_test(ma, mb).t, paired_t_test(va, vb).t);
    mb.erase("q2");
    mb["q9"] = 0.0;
    EXPECT_THROW(paired_t_test(ma, mb), std::invalid_argument);
}

TEST(Grid, LabelsAreABijection) {
    std::set<std::string> seen;
    for (auto e : {EncoderRole::kOrg, EncoderRole::kDomainA, EncoderRole::kDomainB}) {
        for (auto a : {AggregatorRole::kDomainA, AggregatorRole::kDomainB}) seen.insert(grid_label(e, a));
    }
    EXPECT_EQ(seen, (std::set<std::string>{"R1", "R2", "R3", "R4", "R5", "R6"}));
    EXPECT_EQ(grid_label(EncoderRole::kOrg, AggregatorRole::kDomainA), "R1");
    EXPECT_EQ(grid_label(EncoderRole::kDomainA, AggregatorRole::kDomainA), "R3");
    EXPECT_EQ(grid_label(EncoderRole::kDomainB, AggregatorRole::kDomainB), "R6");
}

TEST(Reports, TableAndNdjson) {
    BinaryCounts c{3, 1, 2, 2};
    SignificanceResult sig;
    sig.t = 3.0;
    sig.df = 4;
    sig.p = 0.01;
    sig.significant = true;
    SignificanceResult deg;
    deg.t = std::numeric_limits<double>::infinity();
    deg.p = 0.0;
    deg.degenerate = true;
    deg.significant = true;
    std::vector<ReportRow> rows{{"BM25", EvalReport::from_counts(c), std::nullopt},
                                {"pipeline", EvalReport::from_counts(c), sig},
                                {"flat", EvalReport::from_counts(c), deg}};
    auto table = format_report_table(rows);
    std::istringstream in(table);
    std::string header, l1, l2;
    std::getline(in, header);
    std::getline(in, l1);
    std::getline(in, l2);
    EXPECT_LT(header.find("Model"), header.find("Precision"));
    EXPECT_LT(header.find("Precision"), header.find("Recall"));
    EXPECT_LT(header.find("Recall"), header.find("F1"));
    EXPECT_NE(l1.find("0.7500"), std::string::npos);
    EXPECT_NE(l1.find("0.6667"), std::string::npos);
    EXPECT_EQ(l1.find("†"), std::string::npos);
    EXPECT_NE(l2.find("†"), std::string::npos);

    auto nd = format_report_ndjson(rows, "DocTest");
    std::istringstream lines(nd);
    std::string line;
    std::vector<nlohmann::json> recs;
    while (std::getline(lines, line)) recs.push_back(nlohmann::json::parse(line));
    ASSERT_EQ(recs.size(), 3u);
    EXPECT_EQ(recs[0]["test_set"], "DocTest");
    EXPECT_EQ(recs[0]["tp"], 3);
    EXPECT_FALSE(recs[0].contains("p"));
    EXPECT_EQ(recs[1]["p"], 0.01);
    EXPECT_TRUE(recs[2]["t"].is_null());
    EXPECT_TRUE(recs[2]["degenerate"]);
}

TEST(Reports, FromCountsInvariant) {
    auto r = EvalReport::from_counts({0, 0, 0, 5});
    EXPECT_EQ(r.f1, 0.0);
    EXPECT_EQ(r.total_pairs(), 5u);
    auto p = EvalReport::from_counts({2, 2, 0, 0});
    EXPECT_DOUBLE_EQ(p.f1, 2 * 0.5 * 1.0 / 1.5);
}
