#include "pli/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace pli {

namespace {

const char* const kReservedTokens[Vocabulary::kReserved] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

}  // namespace

// --- Vocabulary --------------------------------------------------------------

Vocabulary::Vocabulary() {
    for (const char* t : kReservedTokens) add(t);
}

TokenId Vocabulary::add(std::string_view token) {
    std::string key(token);
    if (auto it = ids_.find(key); it != ids_.end()) return it->second;
    auto id = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(key);
    ids_.emplace(std::move(key), id);
    return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
    if (auto it = ids_.find(std::string(token)); it != ids_.end()) return it->second;
    return std::nullopt;
}

TokenId Vocabulary::lookup(std::string_view token) const { return find(token).value_or(kUnk); }

const std::string& Vocabulary::token(TokenId id) const {
    if (id >= tokens_.size()) throw std::out_of_range("Vocabulary::token: id out of range");
    return tokens_[id];
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, bool lowercase) {
    Vocabulary v;
    for (const auto& text : texts) {
        for (const auto& w : split_words(text, lowercase)) v.add(w);
    }
    return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::string out;
    for (std::size_t i = kReserved; i < tokens_.size(); ++i) {
        out += tokens_[i];
        out += '\n';
    }
    write_file_atomic(path, out);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    Vocabulary v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) throw DataError(path.string() + ": empty token on line " + std::to_string(lineno));
        if (v.find(line)) throw DataError(path.string() + ": duplicate token on line " + std::to_string(lineno));
        v.add(line);
    }
    return v;
}

// --- tokenization ------------------------------------------------------------

std::vector<std::string> split_words(std::string_view text, bool lowercase) {
    std::vector<std::string> words;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    };
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (is_space(c)) {
            flush();
        } else if (is_punct(c)) {
            flush();
            words.emplace_back(1, ch);
        } else {
            cur.push_back(lowercase && c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
        }
    }
    flush();
    return words;
}

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab, bool lowercase) {
    TokenSeq out;
    for (const auto& w : split_words(text, lowercase)) out.push_back(vocab.lookup(w));
    return out;
}

std::vector<Paragraph> chunk_document(const Document& doc, std::size_t paragraph_len) {
    if (paragraph_len == 0) throw std::invalid_argument("chunk_document: paragraph_len must be >= 1");
    std::vector<Paragraph> out;
    const auto& t = doc.tokens;
    for (std::size_t start = 0, idx = 0; start < t.size(); start += paragraph_len, ++idx) {
        std::size_t end = std::min(t.size(), start + paragraph_len);
        out.push_back(Paragraph{doc.id, idx, TokenSeq(t.begin() + static_cast<std::ptrdiff_t>(start),
                                                      t.begin() + static_cast<std::ptrdiff_t>(end))});
    }
    return out;
}

Document make_document(std::string id, std::string text, const Vocabulary& vocab,
                       std::size_t paragraph_len, bool lowercase) {
    Document d;
    d.id = std::move(id);
    d.tokens = tokenize(text, vocab, lowercase);
    d.text = std::move(text);
    d.paragraphs = chunk_document(d, paragraph_len);
    return d;
}

std::pair<std::size_t, std::size_t> truncated_pair_lengths(std::size_t q, std::size_t c,
                                                           std::size_t max_total) {
    if (max_total < kPairSpecialTokens + 1) {
        throw std::invalid_argument("truncate_pair_symmetric: max_total must be >= 4");
    }
    const std::size_t budget = max_total - kPairSpecialTokens;
    if (q + c <= budget) return {q, c};
    std::size_t excess = q + c - budget;
    // Trim the longer side down to the shorter one first.
    std::size_t gap = q > c ? q - c : c - q;
    std::size_t first = std::min(excess, gap);
    if (q > c) {
        q -= first;
    } else {
        c -= first;
    }
    excess -= first;
    // Then alternate, candidate first on ties.
    c -= (excess + 1) / 2;
    q -= excess / 2;
    return {q, c};
}

std::pair<TokenSeq, TokenSeq> truncate_pair_symmetric(std::span<const TokenId> q,
                                                      std::span<const TokenId> c,
                                                      std::size_t max_total) {
    auto [ql, cl] = truncated_pair_lengths(q.size(), c.size(), max_total);
    return {TokenSeq(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(ql)),
            TokenSeq(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(cl))};
}

QuerySplit split_validation(std::span<const std::string> queries, const SplitSpec& spec) {
    const double f = spec.validation_fraction;
    if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument("split_validation: fraction must be in (0, 1)");
    const std::size_t n = queries.size();
    if (n < 5) throw std::invalid_argument("split_validation: need at least 5 queries, got " + std::to_string(n));

    // The epsilon keeps products like 0.2 * 285 from rounding up past an integer.
    auto n_val = static_cast<std::size_t>(std::ceil(f * static_cast<double>(n) - 1e-9));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

    Rng rng(spec.seed);
    auto picked = rng.sample_without_replacement(n, n_val);
    std::vector<char> is_val(n, 0);
    for (auto i : picked) is_val[i] = 1;

    QuerySplit out;
    for (std::size_t i = 0; i < n; ++i) (is_val[i] ? out.validation : out.train).push_back(queries[i]);
    return out;
}

// --- QrelSet -----------------------------------------------------------------

bool QrelSet::add(const std::string& query_id, const std::string& doc_id) {
    return rel_[query_id].insert(doc_id).second;
}

bool QrelSet::is_relevant(const std::string& query_id, const std::string& doc_id) const {
    auto it = rel_.find(query_id);
    return it != rel_.end() && it->second.contains(doc_id);
}

const std::set<std::string>& QrelSet::relevant(const std::string& query_id) const {
    static const std::set<std::string> empty;
    auto it = rel_.find(query_id);
    return it == rel_.end() ? empty : it->second;
}

std::vector<std::string> QrelSet::queries() const {
    std::vector<std::string> out;
    for (const auto& [q, _] : rel_) out.push_back(q);
    return out;
}

std::size_t QrelSet::total_relevant() const {
    std::size_t n = 0;
    for (const auto& [_, docs] : rel_) n += docs.size();
    return n;
}

void QrelSet::save(const std::filesystem::path& path) const {
    std::string out;
    for (const auto& [q, docs] : rel_) {
        for (const auto& d : docs) out += q + " 0 " + d + " 1\n";
    }
    write_file_atomic(path, out);
}

QrelSet QrelSet::load(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    QrelSet qs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string q, iter, d;
        int rel = 0;
        if (!(ls >> q)) continue;
        if (!(ls >> iter >> d >> rel) || (rel != 0 && rel != 1)) {
            throw DataError(path.string() + ": malformed qrels line " + std::to_string(lineno));
        }
        if (rel == 1) {
            if (!qs.add(q, d)) {
                throw DataError(path.string() + ": duplicate judgement on line " + std::to_string(lineno));
            }
        } else {
            qs.touch(q);
        }
    }
    return qs;
}

// --- CandidatePool -----------------------------------------------------------

void CandidatePool::add(const std::string& query_id, const std::string& doc_id) {
    auto& v = pools_[query_id];
    if (std::find(v.begin(), v.end(), doc_id) != v.end()) {
        throw std::invalid_argument("CandidatePool: duplicate candidate " + doc_id + " for query " + query_id);
    }
    v.push_back(doc_id);
}

void CandidatePool::set(const std::string& query_id, std::vector<std::string> docs) {
    std::set<std::string> seen(docs.begin(), docs.end());
    if (seen.size() != docs.size()) {
        throw std::invalid_argument("CandidatePool: duplicate candidate for query " + query_id);
    }
    pools_[query_id] = std::move(docs);
}

const std::vector<std::string>& CandidatePool::candidates(const std::string& query_id) const {
    static const std::vector<std::string> empty;
    auto it = pools_.find(query_id);
    return it == pools_.end() ? empty : it->second;
}

bool CandidatePool::contains(const std::string& query_id, const std::string& doc_id) const {
    const auto& v = candidates(query_id);
    return std::find(v.begin(), v.end(), doc_id) != v.end();
}

std::vector<std::string> CandidatePool::queries() const {
    std::vector<std::string> out;
    for (const auto& [q, _] : pools_) out.push_back(q);
    return out;
}

void CandidatePool::save(const std::filesystem::path& path) const {
    std::string out;
    for (const auto& [q, docs] : pools_) {
        for (const auto& d : docs) out += q + " " + d + "\n";
    }
    write_file_atomic(path, out);
}

CandidatePool CandidatePool::load(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    CandidatePool pool;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string q, d;
        if (!(ls >> q)) continue;
        if (!(ls >> d)) throw DataError(path.string() + ": malformed pool line " + std::to_string(lineno));
        if (pool.contains(q, d)) {
            throw DataError(path.string() + ": duplicate candidate on line " + std::to_string(lineno));
        }
        pool.add(q, d);
    }
    return pool;
}

// --- JSONL -------------------------------------------------------------------

std::vector<RawDocument> read_jsonl(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<RawDocument> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            docs.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ": bad record on line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return docs;
}

void write_jsonl(const std::filesystem::path& path, std::span<const RawDocument> docs) {
    std::string out;
    for (const auto& d : docs) {
        out += nlohmann::json{{"id", d.id}, {"text", d.text}}.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

// --- DocumentStore -----------------------------------------------------------

DocumentStore::DocumentStore(std::span<const RawDocument> raw, const Vocabulary& vocab,
                             std::size_t paragraph_len, bool lowercase) {
    std::vector<Document> docs(raw.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(raw.size()); ++i) {
        const auto& r = raw[static_cast<std::size_t>(i)];
        docs[static_cast<std::size_t>(i)] = make_document(r.id, r.text, vocab, paragraph_len, lowercase);
    }
    for (auto& d : docs) add(std::move(d));
}

void DocumentStore::add(Document doc) {
    if (by_id_.contains(doc.id)) throw DataError("duplicate document id: " + doc.id);
    by_id_.emplace(doc.id, docs_.size());
    docs_.push_back(std::move(doc));
}

const Document* DocumentStore::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

const Document& DocumentStore::at(const std::string& id) const {
    if (const auto* d = find(id)) return *d;
    throw DataError("unknown document id: " + id);
}

const Paragraph& DocumentStore::paragraph(const std::string& key) const {
    auto [doc_id, idx] = parse_paragraph_key(key);
    const auto& d = at(doc_id);
    if (idx >= d.paragraphs.size()) throw DataError("paragraph index out of range: " + key);
    return d.paragraphs[idx];
}

std::string paragraph_key(std::string_view doc_id, std::size_t index) {
    return std::string(doc_id) + "#" + std::to_string(index);
}

std::pair<std::string, std::size_t> parse_paragraph_key(std::string_view key) {
    auto pos = key.rfind('#');
    if (pos == std::string_view::npos || pos == 0 || pos + 1 == key.size()) {
        throw DataError("malformed paragraph key: " + std::string(key));
    }
    std::size_t idx = 0;
    for (char c : key.substr(pos + 1)) {
        if (c < '0' || c > '9') throw DataError("malformed paragraph key: " + std::string(key));
        idx = idx * 10 + static_cast<std::size_t>(c - '0');
    }
    return {std::string(key.substr(0, pos)), idx};
}

std::vector<std::string> read_id_list(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<std::string> ids;
    std::string id;
    while (in >> id) ids.push_back(id);
    return ids;
}

void write_id_list(const std::filesystem::path& path, std::span<const std::string> ids) {
    std::string out;
    for (const auto& id : ids) out += id + "\n";
    write_file_atomic(path, out);
}

}  // namespace pli
