#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pli/common.hpp"

namespace pli {

inline constexpr std::size_t kDefaultParagraphLen = 256;
inline constexpr std::size_t kDefaultPairBudget = 512;
/// CLS + two SEP positions of a packed pair input.
inline constexpr std::size_t kPairSpecialTokens = 3;

struct Paragraph {
    std::string doc_id;
    std::size_t index = 0;
    TokenSeq tokens;
};

struct Document {
    std::string id;
    std::string text;
    TokenSeq tokens;
    std::vector<Paragraph> paragraphs;
};

/// Token <-> id map with four reserved ids at the front.
class Vocabulary {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kUnk = 1;
    static constexpr TokenId kCls = 2;
    static constexpr TokenId kSep = 3;
    static constexpr std::size_t kReserved = 4;

    Vocabulary();

    /// Id of `token`, inserting it when absent.
    TokenId add(std::string_view token);
    std::optional<TokenId> find(std::string_view token) const;
    /// Id of `token`, or kUnk.
    TokenId lookup(std::string_view token) const;
    const std::string& token(TokenId id) const;
    std::size_t size() const { return tokens_.size(); }

    /// Builds a vocabulary over `texts` in first-occurrence order.
    static Vocabulary build(std::span<const std::string> texts, bool lowercase = true);

    /// One token per line; line k holds id kReserved + k.
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> ids_;
};

/// Whitespace + ASCII punctuation word split. Each punctuation character is
/// its own word; bytes >= 0x80 are treated as word characters.
std::vector<std::string> split_words(std::string_view text, bool lowercase = true);

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab, bool lowercase = true);

std::vector<Paragraph> chunk_document(const Document& doc,
                                      std::size_t paragraph_len = kDefaultParagraphLen);

/// Tokenizes `text` and chunks it into paragraphs.
Document make_document(std::string id, std::string text, const Vocabulary& vocab,
                       std::size_t paragraph_len = kDefaultParagraphLen, bool lowercase = true);

/// Trims the pair to (max_total - 3) tokens by repeatedly dropping the last
/// token of the currently longer segment; ties drop from the candidate.
std::pair<TokenSeq, TokenSeq> truncate_pair_symmetric(std::span<const TokenId> q,
                                                      std::span<const TokenId> c,
                                                      std::size_t max_total = kDefaultPairBudget);

/// Lengths truncate_pair_symmetric would produce, without copying.
std::pair<std::size_t, std::size_t> truncated_pair_lengths(std::size_t q_len, std::size_t c_len,
                                                           std::size_t max_total = kDefaultPairBudget);

struct SplitSpec {
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct QuerySplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
};

/// Seeded partition with ceil(f * n) validation queries. Both halves keep
/// the input order.
QuerySplit split_validation(std::span<const std::string> queries, const SplitSpec& spec);

// --- judgements and pools ----------------------------------------------------

/// Binary relevance judgements, query -> relevant ids.
class QrelSet {
public:
    /// Returns false for a duplicate (query, doc) entry.
    bool add(const std::string& query_id, const std::string& doc_id);
    /// Registers a query with no relevant documents.
    void touch(const std::string& query_id) { rel_[query_id]; }

    bool is_relevant(const std::string& query_id, const std::string& doc_id) const;
    const std::set<std::string>& relevant(const std::string& query_id) const;
    bool has_query(const std::string& query_id) const { return rel_.contains(query_id); }
    std::vector<std::string> queries() const;
    std::size_t total_relevant() const;

    const std::map<std::string, std::set<std::string>>& entries() const { return rel_; }

    /// TREC qrels: `query_id 0 doc_id relevance`.
    void save(const std::filesystem::path& path) const;
    static QrelSet load(const std::filesystem::path& path);

    bool operator==(const QrelSet&) const = default;

private:
    std::map<std::string, std::set<std::string>> rel_;
};

/// Ordered per-query candidate lists.
class CandidatePool {
public:
    /// Throws std::invalid_argument on a duplicate candidate within a query.
    void add(const std::string& query_id, const std::string& doc_id);
    void set(const std::string& query_id, std::vector<std::string> docs);

    const std::vector<std::string>& candidates(const std::string& query_id) const;
    bool has_query(const std::string& query_id) const { return pools_.contains(query_id); }
    bool contains(const std::string& query_id, const std::string& doc_id) const;
    std::vector<std::string> queries() const;
    std::size_t pool_size(const std::string& query_id) const { return candidates(query_id).size(); }

    const std::map<std::string, std::vector<std::string>>& entries() const { return pools_; }

    /// `query_id doc_id` per line.
    void save(const std::filesystem::path& path) const;
    static CandidatePool load(const std::filesystem::path& path);

    bool operator==(const CandidatePool&) const = default;

private:
    std::map<std::string, std::vector<std::string>> pools_;
};

// --- raw corpus files --------------------------------------------------------

struct RawDocument {
    std::string id;
    std::string text;
    bool operator==(const RawDocument&) const = default;
};

/// Newline-delimited JSON records with `id` and `text`.
std::vector<RawDocument> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, std::span<const RawDocument> docs);

/// Tokenized documents addressable by id.
class DocumentStore {
public:
    DocumentStore() = default;
    DocumentStore(std::span<const RawDocument> raw, const Vocabulary& vocab,
                  std::size_t paragraph_len = kDefaultParagraphLen, bool lowercase = true);

    void add(Document doc);
    const Document& at(const std::string& id) const;
    const Document* find(const std::string& id) const;
    bool contains(const std::string& id) const { return by_id_.contains(id); }
    std::size_t size() const { return docs_.size(); }
    const std::vector<Document>& documents() const { return docs_; }

    /// Paragraph addressed by a `doc_id#index` key.
    const Paragraph& paragraph(const std::string& key) const;

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

std::string paragraph_key(std::string_view doc_id, std::size_t index);
/// Inverse of paragraph_key; throws DataError on malformed keys.
std::pair<std::string, std::size_t> parse_paragraph_key(std::string_view key);

/// Reads a whitespace-separated list of ids, one per line.
std::vector<std::string> read_id_list(const std::filesystem::path& path);
void write_id_list(const std::filesystem::path& path, std::span<const std::string> ids);

}  // namespace pli
