#include "pli/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace pli {

void Bm25Params::validate() const {
    if (!(k1 >= 0.0)) throw std::invalid_argument("bm25: k1 must be >= 0");
    if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("bm25: b must be in [0, 1]");
    if (doc_prefix_len < 1) throw std::invalid_argument("bm25: doc_prefix_len must be >= 1");
}

double bm25_idf(std::size_t n_docs, std::size_t df) {
    const double n = static_cast<double>(n_docs);
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

std::span<const TokenId> bm25_prefix(std::span<const TokenId> tokens, const Bm25Params& params) {
    return tokens.first(std::min(tokens.size(), params.doc_prefix_len));
}

namespace {

/// (term, qtf) pairs for matchable query terms, ascending by term.
std::vector<std::pair<TokenId, std::uint32_t>> query_terms(std::span<const TokenId> query) {
    std::vector<TokenId> sorted;
    sorted.reserve(query.size());
    for (TokenId t : query) {
        if (t >= Vocabulary::kReserved) sorted.push_back(t);
    }
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<TokenId, std::uint32_t>> out;
    for (TokenId t : sorted) {
        if (!out.empty() && out.back().first == t) {
            ++out.back().second;
        } else {
            out.push_back({t, 1});
        }
    }
    return out;
}

inline double term_weight(std::uint32_t qtf, double idf, std::uint32_t tf, double norm, double k1) {
    const double f = static_cast<double>(tf);
    return static_cast<double>(qtf) * idf * (f * (k1 + 1.0)) / (f + norm);
}

inline double length_norm(std::uint32_t dl, double avgdl, const Bm25Params& p) {
    return p.k1 * (1.0 - p.b + p.b * static_cast<double>(dl) / avgdl);
}

}  // namespace

// --- InvertedIndex -----------------------------------------------------------

InvertedIndex InvertedIndex::build(std::span<const Document> docs, const Bm25Params& params) {
    params.validate();
    if (docs.empty()) throw std::invalid_argument("build_index: empty corpus");

    std::vector<std::size_t> order(docs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return docs[a].id < docs[b].id; });

    InvertedIndex ix;
    ix.params_ = params;
    TokenId max_term = 0;
    for (std::uint32_t docno = 0; docno < order.size(); ++docno) {
        const auto& d = docs[order[docno]];
        if (!ix.docnos_.emplace(d.id, docno).second) throw DataError("build_index: duplicate document id " + d.id);
        ix.doc_ids_.push_back(d.id);
        auto prefix = bm25_prefix(d.tokens, params);
        ix.lengths_.push_back(static_cast<std::uint32_t>(prefix.size()));
        for (TokenId t : prefix) max_term = std::max(max_term, t);
    }
    double total = 0.0;
    for (auto l : ix.lengths_) total += l;
    ix.avgdl_ = total / static_cast<double>(ix.lengths_.size());

    // Documents are visited in docno order, so every postings list is sorted.
    ix.postings_.assign(static_cast<std::size_t>(max_term) + 1, {});
    std::vector<TokenId> sorted;
    for (std::uint32_t docno = 0; docno < order.size(); ++docno) {
        auto prefix = bm25_prefix(docs[order[docno]].tokens, params);
        sorted.assign(prefix.begin(), prefix.end());
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
            ix.postings_[sorted[i]].push_back({docno, static_cast<std::uint32_t>(j - i)});
            i = j;
        }
    }
    return ix;
}

std::optional<std::uint32_t> InvertedIndex::docno(const std::string& doc_id) const {
    auto it = docnos_.find(doc_id);
    if (it == docnos_.end()) return std::nullopt;
    return it->second;
}

std::span<const Posting> InvertedIndex::postings(TokenId term) const {
    if (term >= postings_.size()) return {};
    return postings_[term];
}

bool InvertedIndex::operator==(const InvertedIndex& o) const {
    return params_ == o.params_ && doc_ids_ == o.doc_ids_ && lengths_ == o.lengths_ && avgdl_ == o.avgdl_ &&
           postings_ == o.postings_;
}

void InvertedIndex::save(const std::filesystem::path& path) const {
    ByteWriter w;
    w.raw("PLIX");
    w.u32(kFormatVersion);
    w.f64(params_.k1);
    w.f64(params_.b);
    w.u64(params_.doc_prefix_len);
    w.u64(doc_ids_.size());
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
        w.str(doc_ids_[i]);
        w.u32(lengths_[i]);
    }
    w.u64(postings_.size());
    std::uint64_t nonempty = 0;
    for (const auto& p : postings_) nonempty += p.empty() ? 0 : 1;
    w.u64(nonempty);
    for (std::size_t t = 0; t < postings_.size(); ++t) {
        const auto& plist = postings_[t];
        if (plist.empty()) continue;
        w.u32(static_cast<std::uint32_t>(t));
        w.u32(static_cast<std::uint32_t>(plist.size()));
        std::uint32_t prev = 0;
        for (const auto& p : plist) {
            w.u32(p.doc - prev);
            w.u32(p.tf);
            prev = p.doc;
        }
    }
    write_file_atomic(path, w.bytes());
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("index file not found: " + path.string());
    const std::string bytes = read_file(path);
    ByteReader r(bytes, path.string());
    r.expect_magic("PLIX");
    if (auto v = r.u32(); v != kFormatVersion) r.fail("unsupported index version " + std::to_string(v));
    InvertedIndex ix;
    ix.params_.k1 = r.f64();
    ix.params_.b = r.f64();
    ix.params_.doc_prefix_len = r.u64();
    const auto n_docs = r.u64();
    if (n_docs == 0) r.fail("index holds no documents");
    double total = 0.0;
    for (std::uint64_t i = 0; i < n_docs; ++i) {
        auto id = r.str();
        auto len = r.u32();
        if (!ix.docnos_.emplace(id, static_cast<std::uint32_t>(i)).second) r.fail("duplicate document id " + id);
        ix.doc_ids_.push_back(std::move(id));
        ix.lengths_.push_back(len);
        total += len;
    }
    ix.avgdl_ = total / static_cast<double>(n_docs);
    const auto term_space = r.u64();
    const auto n_terms = r.u64();
    if (n_terms > term_space) r.fail("term count exceeds term space");
    ix.postings_.assign(term_space, {});
    for (std::uint64_t k = 0; k < n_terms; ++k) {
        auto term = r.u32();
        auto df = r.u32();
        if (term >= term_space || !ix.postings_[term].empty()) r.fail("bad term id " + std::to_string(term));
        if (df == 0 || df > n_docs) r.fail("bad document frequency");
        auto& plist = ix.postings_[term];
        plist.reserve(df);
        std::uint64_t doc = 0;
        for (std::uint32_t i = 0; i < df; ++i) {
            auto delta = r.u32();
            doc += delta;
            if ((i > 0 && delta == 0) || doc >= n_docs) r.fail("postings out of order");
            plist.push_back({static_cast<std::uint32_t>(doc), r.u32()});
        }
    }
    if (!r.at_end()) r.fail("trailing bytes");
    return ix;
}

// --- scoring -----------------------------------------------------------------

double bm25_score(std::span<const TokenId> query, const std::string& doc_id, const InvertedIndex& index,
                  const Bm25Params& params) {
    auto docno = index.docno(doc_id);
    if (!docno) throw std::invalid_argument("bm25_score: unknown doc id " + doc_id);
    const double norm = length_norm(index.doc_length(*docno), index.avgdl(), params);
    double score = 0.0;
    for (auto [term, qtf] : query_terms(query)) {
        auto plist = index.postings(term);
        auto it = std::lower_bound(plist.begin(), plist.end(), *docno,
                                   [](const Posting& p, std::uint32_t d) { return p.doc < d; });
        if (it == plist.end() || it->doc != *docno) continue;
        score += term_weight(qtf, bm25_idf(index.num_docs(), plist.size()), it->tf, norm, params.k1);
    }
    return score;
}

namespace {

/// Term-at-a-time accumulation; `allowed` restricts the ranked set.
RankedList rank(std::span<const TokenId> query, std::size_t k, const InvertedIndex& index,
                const Bm25Params& params, const std::vector<std::string>* pool) {
    if (k < 1) throw std::invalid_argument("retrieve_topk: K must be >= 1");
    const std::size_t n = index.num_docs();
    std::vector<double> acc(n, 0.0);
    std::vector<double> norm(n);
    for (std::uint32_t d = 0; d < n; ++d) norm[d] = length_norm(index.doc_length(d), index.avgdl(), params);

    for (auto [term, qtf] : query_terms(query)) {
        auto plist = index.postings(term);
        if (plist.empty()) continue;
        const double idf = bm25_idf(n, plist.size());
        for (const auto& p : plist) acc[p.doc] += term_weight(qtf, idf, p.tf, norm[p.doc], params.k1);
    }

    std::vector<std::uint32_t> cands;
    if (pool != nullptr) {
        cands.reserve(pool->size());
        for (const auto& id : *pool) {
            auto d = index.docno(id);
            if (!d) throw DataError("retrieve: pool document not in index: " + id);
            cands.push_back(*d);
        }
    } else {
        cands.resize(n);
        std::iota(cands.begin(), cands.end(), 0u);
    }
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (acc[a] != acc[b]) return acc[a] > acc[b];
        return a < b;
    };
    const std::size_t take = std::min(k, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(), better);

    RankedList out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back({index.doc_id(cands[i]), acc[cands[i]]});
    return out;
}

const std::vector<std::string>* pool_for(const CandidatePool* pools, const std::string& qid) {
    if (pools == nullptr) return nullptr;
    if (!pools->has_query(qid)) throw DataError("retrieve: no candidate pool for query " + qid);
    return &pools->candidates(qid);
}

}  // namespace

RankedList retrieve_topk(std::span<const TokenId> query, std::size_t k, const InvertedIndex& index,
                         const Bm25Params& params, const std::vector<std::string>* pool) {
    return rank(bm25_prefix(query, params), k, index, params, pool);
}

RetrievalRun retrieve_batch(std::span<const Document> queries, std::size_t k, const InvertedIndex& index,
                            const Bm25Params& params, const CandidatePool* pools) {
    std::vector<RankedList> lists(queries.size());
    const auto n = static_cast<std::ptrdiff_t>(queries.size());
    // Exceptions must not escape the parallel region.
    std::vector<std::string> errors(queries.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& q = queries[static_cast<std::size_t>(i)];
        try {
            lists[static_cast<std::size_t>(i)] = retrieve_topk(q.tokens, k, index, params, pool_for(pools, q.id));
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw DataError(e);
    }
    RetrievalRun run;
    for (std::size_t i = 0; i < queries.size(); ++i) run.set(queries[i].id, std::move(lists[i]));
    return run;
}

RetrievalRun retrieve_batch_serial(std::span<const Document> queries, std::size_t k, const InvertedIndex& index,
                                   const Bm25Params& params, const CandidatePool* pools) {
    RetrievalRun run;
    for (const auto& q : queries) run.set(q.id, retrieve_topk(q.tokens, k, index, params, pool_for(pools, q.id)));
    return run;
}

// --- RetrievalRun ------------------------------------------------------------

const RankedList& RetrievalRun::ranked(const std::string& query_id) const {
    auto it = runs_.find(query_id);
    if (it == runs_.end()) throw DataError("run has no query " + query_id);
    return it->second;
}

std::vector<std::string> RetrievalRun::queries() const {
    std::vector<std::string> out;
    for (const auto& [q, _] : runs_) out.push_back(q);
    return out;
}

void RetrievalRun::save(const std::filesystem::path& path, const std::string& tag) const {
    std::string out;
    char buf[64];
    for (const auto& [q, list] : runs_) {
        for (std::size_t i = 0; i < list.size(); ++i) {
            std::snprintf(buf, sizeof buf, " %zu %.9f ", i + 1, list[i].score);
            out += q + " Q0 " + list[i].doc_id + buf + tag + "\n";
        }
    }
    write_file_atomic(path, out);
}

RetrievalRun RetrievalRun::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("run file not found: " + path.string());
    std::istringstream in(read_file(path));
    std::map<std::string, std::vector<std::pair<std::size_t, ScoredDoc>>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string q, q0, d, tag;
        std::size_t rank = 0;
        double score = 0.0;
        if (!(ls >> q)) continue;
        if (!(ls >> q0 >> d >> rank >> score >> tag) || rank == 0) {
            throw DataError(path.string() + ": malformed run line " + std::to_string(lineno));
        }
        rows[q].push_back({rank, {d, score}});
    }
    RetrievalRun run;
    for (auto& [q, v] : rows) {
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        RankedList list;
        for (auto& [_, sd] : v) list.push_back(std::move(sd));
        run.set(q, std::move(list));
    }
    return run;
}

// --- diagnostics and pools ---------------------------------------------------

double recall_at_k(const RetrievalRun& run, const QrelSet& qrels, std::size_t k) {
    std::size_t hit = 0;
    std::size_t total = 0;
    for (const auto& [q, list] : run.entries()) {
        const auto& rel = qrels.relevant(q);
        if (rel.empty()) continue;
        total += rel.size();
        for (std::size_t i = 0; i < std::min(k, list.size()); ++i) hit += rel.contains(list[i].doc_id) ? 1 : 0;
    }
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

CandidatePool augment_training_pool(const RetrievalRun& run, const QrelSet& qrels, std::size_t target_size,
                                    std::uint64_t seed) {
    CandidatePool pool;
    for (const auto& [q, list] : run.entries()) {
        const auto& rel = qrels.relevant(q);
        if (rel.size() > target_size) {
            throw std::invalid_argument("augment_training_pool: query " + q + " has " + std::to_string(rel.size()) +
                                        " relevant documents, more than target size " + std::to_string(target_size));
        }
        std::vector<std::string> docs(rel.begin(), rel.end());
        std::vector<std::string> negatives;
        for (const auto& sd : list) {
            if (!rel.contains(sd.doc_id)) negatives.push_back(sd.doc_id);
        }
        Rng rng(derive_seed(seed, q));
        const std::size_t want = std::min(target_size - docs.size(), negatives.size());
        for (auto i : rng.sample_without_replacement(negatives.size(), want)) docs.push_back(negatives[i]);
        pool.set(q, std::move(docs));
    }
    return pool;
}

CandidatePool pool_from_run(const RetrievalRun& run, std::size_t k) {
    CandidatePool pool;
    for (const auto& [q, list] : run.entries()) {
        std::vector<std::string> docs;
        for (std::size_t i = 0; i < std::min(k, list.size()); ++i) docs.push_back(list[i].doc_id);
        pool.set(q, std::move(docs));
    }
    return pool;
}

}  // namespace pli
