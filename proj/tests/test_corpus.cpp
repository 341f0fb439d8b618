#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "pli/corpus.hpp"
#include "test_util.hpp"

using namespace pli;

namespace {

TokenSeq iota_tokens(std::size_t n, TokenId start = 10) {
    TokenSeq t(n);
    std::iota(t.begin(), t.end(), start);
    return t;
}

}  // namespace

TEST(Tokenize, EmptyText) {
    Vocabulary v;
    EXPECT_TRUE(tokenize("", v).empty());
}

TEST(Tokenize, CaseFolding) {
    std::vector<std::string> texts{"Patent"};
    auto v = Vocabulary::build(texts);
    auto t = tokenize("Patent patent", v, true);
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t[0], t[1]);
    EXPECT_NE(t[0], Vocabulary::kUnk);
}

TEST(Tokenize, UnknownWordMapsToUnk) {
    std::vector<std::string> texts{"claim device"};
    auto v = Vocabulary::build(texts);
    // Built by hand: reserved ids 0..3, then first-occurrence order.
    EXPECT_EQ(v.size(), 6u);
    auto t = tokenize("claim widget device", v);
    EXPECT_EQ(t, (TokenSeq{4, Vocabulary::kUnk, 5}));
}

TEST(Tokenize, PunctuationIsItsOwnWord) {
    EXPECT_EQ(split_words("a,b. C"), (std::vector<std::string>{"a", ",", "b", ".", "c"}));
    EXPECT_EQ(split_words("A", false), (std::vector<std::string>{"A"}));
}

TEST(Vocabulary, ReservedIdsAreDistinctAndFirst) {
    Vocabulary v;
    std::set<TokenId> ids{Vocabulary::kPad, Vocabulary::kUnk, Vocabulary::kCls, Vocabulary::kSep};
    EXPECT_EQ(ids.size(), Vocabulary::kReserved);
    EXPECT_EQ(v.size(), Vocabulary::kReserved);
    EXPECT_EQ(v.add("x"), Vocabulary::kReserved);
    EXPECT_EQ(v.add("x"), Vocabulary::kReserved);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
    testutil::TempDir dir;
    std::vector<std::string> texts{"the quick brown fox", "jumps over the lazy dog ."};
    auto v = Vocabulary::build(texts);
    v.save(dir / "vocab.txt");
    EXPECT_EQ(Vocabulary::load(dir / "vocab.txt"), v);
}

TEST(Chunk, SizesFollowArithmetic) {
    auto d = testutil::make_token_document("d", iota_tokens(600), 256);
    ASSERT_EQ(d.paragraphs.size(), 3u);
    EXPECT_EQ(d.paragraphs[0].tokens.size(), 256u);
    EXPECT_EQ(d.paragraphs[1].tokens.size(), 256u);
    EXPECT_EQ(d.paragraphs[2].tokens.size(), 88u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(d.paragraphs[i].index, i);
}

TEST(Chunk, ExactFitAndEmpty) {
    EXPECT_EQ(testutil::make_token_document("d", iota_tokens(256), 256).paragraphs.size(), 1u);
    EXPECT_TRUE(testutil::make_token_document("d", {}, 256).paragraphs.empty());
    Document d;
    EXPECT_THROW(chunk_document(d, 0), std::invalid_argument);
}

TEST(Chunk, ConcatenationRoundTrips) {
    for (std::size_t n : {1u, 63u, 64u, 65u, 1000u}) {
        for (std::size_t len : {1u, 7u, 64u, 256u}) {
            auto d = testutil::make_token_document("d", iota_tokens(n), len);
            TokenSeq joined;
            for (const auto& p : d.paragraphs) joined.insert(joined.end(), p.tokens.begin(), p.tokens.end());
            EXPECT_EQ(joined, d.tokens);
        }
    }
}

TEST(Truncate, WithinBudgetUnchanged) {
    auto q = iota_tokens(100), c = iota_tokens(100, 500);
    auto [q2, c2] = truncate_pair_symmetric(q, c);
    EXPECT_EQ(q2, q);
    EXPECT_EQ(c2, c);
}

TEST(Truncate, EqualLongSegments) {
    auto q = iota_tokens(400), c = iota_tokens(400, 1000);
    auto [q2, c2] = truncate_pair_symmetric(q, c);
    // Tie drops from the candidate first, so the query keeps the odd token.
    EXPECT_EQ(q2.size(), 255u);
    EXPECT_EQ(c2.size(), 254u);
    EXPECT_TRUE(std::equal(q2.begin(), q2.end(), q.begin()));
    EXPECT_TRUE(std::equal(c2.begin(), c2.end(), c.begin()));
}

TEST(Truncate, ExactBudgetBoundary) {
    auto [q2, c2] = truncate_pair_symmetric(iota_tokens(500), iota_tokens(9));
    EXPECT_EQ(q2.size(), 500u);
    EXPECT_EQ(c2.size(), 9u);
    EXPECT_THROW(truncate_pair_symmetric(iota_tokens(1), iota_tokens(1), 3), std::invalid_argument);
}

TEST(Truncate, MatchesOneAtATimeSimulation) {
    for (std::size_t max_total : {4u, 20u, 512u}) {
        for (std::size_t ql = 0; ql < 600; ql += 37) {
            for (std::size_t cl = 0; cl < 600; cl += 41) {
                std::size_t a = ql, b = cl;
                while (a + b > max_total - 3) {
                    if (a > b) --a;
                    else --b;
                }
                auto [qa, cb] = truncated_pair_lengths(ql, cl, max_total);
                EXPECT_EQ(qa, a);
                EXPECT_EQ(cb, b);
                EXPECT_LE(qa, ql);
                EXPECT_LE(cb, cl);
                const std::size_t half = (max_total - 3) / 2;
                if (ql > half && cl > half) {
                    EXPECT_LE(qa > cb ? qa - cb : cb - qa, 1u);
                }
            }
        }
    }
}

TEST(Split, TableSizedQuerySet) {
    std::vector<std::string> q;
    for (int i = 0; i < 285; ++i) q.push_back("q" + std::to_string(i));
    auto s = split_validation(q, {0.2, 9});
    EXPECT_EQ(s.validation.size(), 57u);
    EXPECT_EQ(s.train.size(), 228u);

    std::set<std::string> all(s.train.begin(), s.train.end());
    for (const auto& v : s.validation) EXPECT_TRUE(all.insert(v).second) << "overlap " << v;
    EXPECT_EQ(all, std::set<std::string>(q.begin(), q.end()));
}

TEST(Split, SmallAndDeterministic) {
    std::vector<std::string> q;
    for (int i = 0; i < 10; ++i) q.push_back("q" + std::to_string(i));
    auto a = split_validation(q, {0.2, 3});
    auto b = split_validation(q, {0.2, 3});
    EXPECT_EQ(a.validation.size(), 2u);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.validation, b.validation);
}

TEST(Split, Errors) {
    std::vector<std::string> q{"a", "b", "c", "d"};
    EXPECT_THROW(split_validation(q, {0.2, 0}), std::invalid_argument);
    q.push_back("e");
    EXPECT_THROW(split_validation(q, {0.0, 0}), std::invalid_argument);
    EXPECT_THROW(split_validation(q, {1.0, 0}), std::invalid_argument);
    EXPECT_NO_THROW(split_validation(q, {0.2, 0}));
}

TEST(Qrels, AddRejectsDuplicates) {
    QrelSet q;
    EXPECT_TRUE(q.add("q1", "d1"));
    EXPECT_FALSE(q.add("q1", "d1"));
    EXPECT_TRUE(q.is_relevant("q1", "d1"));
    EXPECT_FALSE(q.is_relevant("q2", "d1"));
    EXPECT_TRUE(q.relevant("unknown").empty());
}

TEST(Qrels, RoundTrip) {
    testutil::TempDir dir;
    QrelSet q;
    q.add("q1", "d1");
    q.add("q1", "d3");
    q.add("q2", "d2");
    q.save(dir / "qrels.txt");
    EXPECT_EQ(QrelSet::load(dir / "qrels.txt"), q);
}

TEST(Pool, DuplicatesRejectedAndOrderKept) {
    CandidatePool p;
    p.add("q", "d2");
    p.add("q", "d1");
    EXPECT_THROW(p.add("q", "d2"), std::invalid_argument);
    EXPECT_EQ(p.candidates("q"), (std::vector<std::string>{"d2", "d1"}));
    EXPECT_TRUE(p.candidates("none").empty());
    EXPECT_THROW(p.set("r", {"a", "a"}), std::invalid_argument);
}

TEST(Pool, RoundTrip) {
    testutil::TempDir dir;
    CandidatePool p;
    p.set("q1", {"d9", "d1", "d5"});
    p.set("q2", {"d2"});
    p.save(dir / "pools.txt");
    EXPECT_EQ(CandidatePool::load(dir / "pools.txt"), p);
}

TEST(Jsonl, RoundTripAndMalformed) {
    testutil::TempDir dir;
    std::vector<RawDocument> docs{{"a", "first \"quoted\" text"}, {"b", "line\nbreak"}};
    write_jsonl(dir / "c.jsonl", docs);
    EXPECT_EQ(read_jsonl(dir / "c.jsonl"), docs);
    write_file_atomic(dir / "bad.jsonl", "{\"id\": \"x\"}\n");
    EXPECT_THROW(read_jsonl(dir / "bad.jsonl"), DataError);
}

TEST(DocumentStore, LookupAndParagraphKeys) {
    std::vector<RawDocument> raw{{"d1", "a b c d e"}, {"d2", "f g"}};
    std::vector<std::string> texts{raw[0].text, raw[1].text};
    auto v = Vocabulary::build(texts);
    DocumentStore s(raw, v, 2);
    EXPECT_EQ(s.size(), 2u);
    EXPECT_EQ(s.at("d1").paragraphs.size(), 3u);
    EXPECT_THROW(s.at("nope"), DataError);
    EXPECT_EQ(s.find("nope"), nullptr);
    EXPECT_EQ(s.paragraph("d1#2").tokens.size(), 1u);
    EXPECT_THROW(s.paragraph("d1#3"), DataError);
    EXPECT_EQ(parse_paragraph_key(paragraph_key("x#y", 12)), (std::pair<std::string, std::size_t>{"x#y", 12}));
    EXPECT_THROW(parse_paragraph_key("nokey"), DataError);
    EXPECT_THROW(parse_paragraph_key("d#1a"), DataError);
}
