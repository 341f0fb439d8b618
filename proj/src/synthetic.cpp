#include "pli/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace pli {

namespace {

std::string word(char prefix, std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%c%05zu", prefix, i);
    return buf;
}

std::string id_of(char prefix, std::size_t i, int width) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
    return buf;
}

/// Zipf(1) sampler over background words.
class ZipfSampler {
public:
    explicit ZipfSampler(std::size_t n) : cdf_(n) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += 1.0 / static_cast<double>(i + 1);
            cdf_[i] = acc;
        }
        for (auto& c : cdf_) c /= acc;
    }

    std::size_t draw(Rng& rng) const {
        double u = rng.uniform01();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    }

private:
    std::vector<double> cdf_;
};

struct Generator {
    const SyntheticConfig& cfg;
    Rng rng;
    ZipfSampler background;
    std::vector<std::string> bg_words;
    std::vector<std::string> topic_words;

    Generator(const SyntheticConfig& c, std::size_t n_bg, std::size_t n_topic)
        : cfg(c), rng(c.seed), background(n_bg) {
        for (std::size_t i = 0; i < n_bg; ++i) bg_words.push_back(word('w', i));
        for (std::size_t i = 0; i < n_topic; ++i) topic_words.push_back(word('t', i));
    }

    /// One paragraph: each token is a topic word with probability `density`.
    void paragraph(std::string& out, std::size_t len, const std::vector<std::size_t>* topic, double density) {
        for (std::size_t k = 0; k < len; ++k) {
            if (!out.empty()) out.push_back(' ');
            if (topic != nullptr && rng.bernoulli(density)) {
                out += topic_words[(*topic)[rng.uniform_index(topic->size())]];
            } else {
                out += bg_words[background.draw(rng)];
            }
        }
    }

    /// Document of `n_paras` paragraphs; `dense` maps paragraph index to (topic, density).
    std::string document(std::size_t n_paras,
                         const std::vector<std::pair<std::size_t, std::pair<const std::vector<std::size_t>*, double>>>& topical) {
        std::string text;
        std::size_t remaining = cfg.doc_len_tokens;
        for (std::size_t p = 0; p < n_paras; ++p) {
            std::size_t len = std::min(cfg.paragraph_len, remaining);
            remaining -= len;
            const std::vector<std::size_t>* topic = nullptr;
            double density = 0.0;
            for (const auto& [idx, td] : topical) {
                if (idx == p) {
                    topic = td.first;
                    density = td.second;
                }
            }
            paragraph(text, len, topic, density);
        }
        return text;
    }
};

}  // namespace

SyntheticBenchmark generate_synthetic_benchmark(const SyntheticConfig& cfg) {
    if (cfg.n_queries == 0 || cfg.pool_size == 0 || cfg.n_relevant_per_query == 0 || cfg.vocab_size == 0 ||
        cfg.doc_len_tokens == 0 || cfg.paragraph_len == 0 || cfg.topic_words_per_query == 0) {
        throw std::invalid_argument("generate_synthetic_benchmark: all counts must be positive");
    }
    if (cfg.n_relevant_per_query >= cfg.pool_size) {
        throw std::invalid_argument("generate_synthetic_benchmark: n_relevant_per_query must be < pool_size");
    }
    if (cfg.n_relevant_per_query + cfg.decoys_per_query + cfg.offtopic_per_query > cfg.pool_size) {
        throw std::invalid_argument("generate_synthetic_benchmark: relevant + decoys + off-topic exceed pool_size");
    }
    if (!(cfg.topic_density > 0.0 && cfg.topic_density <= 1.0) || cfg.decoy_density < 0.0 ||
        cfg.decoy_density > 1.0) {
        throw std::invalid_argument("generate_synthetic_benchmark: densities must lie in (0, 1]");
    }
    if (!(cfg.para_hard_negative_fraction >= 0.0 && cfg.para_hard_negative_fraction <= 1.0)) {
        throw std::invalid_argument("generate_synthetic_benchmark: para_hard_negative_fraction must lie in [0, 1]");
    }
    const auto n_topic = static_cast<std::size_t>(std::floor(cfg.topic_vocab_fraction * static_cast<double>(cfg.vocab_size)));
    const std::size_t n_bg = cfg.vocab_size - std::min(n_topic, cfg.vocab_size);
    if (n_topic < 2 * cfg.topic_words_per_query || n_bg < 4 * cfg.topic_words_per_query) {
        throw std::invalid_argument("generate_synthetic_benchmark: vocabulary of " + std::to_string(cfg.vocab_size) +
                                    " is too small to separate topic words from the background");
    }
    const std::size_t n_paras = (cfg.doc_len_tokens + cfg.paragraph_len - 1) / cfg.paragraph_len;
    const std::size_t prefix_paras =
        std::clamp<std::size_t>(cfg.prefix_tokens / cfg.paragraph_len, 1, n_paras);
    if (cfg.query_topical_paragraphs == 0 || cfg.query_topical_paragraphs > n_paras) {
        throw std::invalid_argument("generate_synthetic_benchmark: query_topical_paragraphs out of range");
    }

    Generator gen(cfg, n_bg, n_topic);
    SyntheticBenchmark out;
    const int qwidth = 4;
    const int dwidth = 6;

    std::vector<std::vector<std::size_t>> topics(cfg.n_queries);
    for (auto& t : topics) {
        t = gen.rng.sample_without_replacement(n_topic, cfg.topic_words_per_query);
        std::sort(t.begin(), t.end());
    }
    for (const auto& t : topics) {
        std::vector<std::string> words;
        for (auto w : t) words.push_back(gen.topic_words[w]);
        out.query_topics.push_back(std::move(words));
    }

    std::size_t next_doc = 0;
    for (std::size_t qi = 0; qi < cfg.n_queries; ++qi) {
        const std::string qid = id_of('q', qi, qwidth);
        const auto* topic = &topics[qi];

        // Query document: a few dense topical paragraphs among background ones,
        // inside the retrieval prefix when they fit.
        auto qparas = gen.rng.sample_without_replacement(
            cfg.query_topical_paragraphs <= prefix_paras ? prefix_paras : n_paras, cfg.query_topical_paragraphs);
        std::sort(qparas.begin(), qparas.end());
        std::vector<std::pair<std::size_t, std::pair<const std::vector<std::size_t>*, double>>> qtopical;
        for (auto p : qparas) qtopical.push_back({p, {topic, cfg.topic_density}});
        out.queries.push_back({qid, gen.document(n_paras, qtopical)});
        out.qrels.touch(qid);

        // Candidate roles, shuffled into pool order.
        enum Role : char { kRelevant, kDecoy, kOffTopic, kBackground };
        std::vector<Role> roles;
        roles.insert(roles.end(), cfg.n_relevant_per_query, kRelevant);
        roles.insert(roles.end(), cfg.decoys_per_query, kDecoy);
        roles.insert(roles.end(), cfg.offtopic_per_query, kOffTopic);
        roles.resize(cfg.pool_size, kBackground);
        gen.rng.shuffle(roles);

        std::vector<std::string> pool;
        std::vector<std::string> injected;          // relevant paragraph keys
        std::vector<std::string> negative_paras;    // candidates for the paragraph task
        std::vector<std::string> hard_paras;        // topical paragraphs of decoys and off-topic docs
        for (Role role : roles) {
            const std::string did = id_of('d', next_doc++, dwidth);
            std::vector<std::pair<std::size_t, std::pair<const std::vector<std::size_t>*, double>>> topical;
            std::size_t injected_at = n_paras;
            switch (role) {
            case kRelevant:
                injected_at = gen.rng.uniform_index(prefix_paras);
                topical.push_back({injected_at, {topic, cfg.topic_density}});
                break;
            case kDecoy:
                for (std::size_t p = 0; p < prefix_paras; ++p) topical.push_back({p, {topic, cfg.decoy_density}});
                break;
            case kOffTopic: {
                std::size_t other = gen.rng.uniform_index(cfg.n_queries);
                if (cfg.n_queries > 1 && other == qi) other = (other + 1) % cfg.n_queries;
                if (other != qi) topical.push_back({gen.rng.uniform_index(n_paras), {&topics[other], cfg.topic_density}});
                break;
            }
            case kBackground:
                break;
            }
            out.documents.push_back({did, gen.document(n_paras, topical)});
            pool.push_back(did);
            if (role == kRelevant) {
                out.qrels.add(qid, did);
                injected.push_back(paragraph_key(did, injected_at));
            }
            for (std::size_t p = 0; p < n_paras; ++p) {
                if (p != injected_at) negative_paras.push_back(paragraph_key(did, p));
            }
            for (const auto& [p, _] : topical) {
                if (role != kRelevant) hard_paras.push_back(paragraph_key(did, p));
            }
        }
        out.pools.set(qid, std::move(pool));

        // Paragraph task: the query's first topical paragraph against a small
        // pool holding one (sometimes two) injected paragraphs.
        const std::string qkey = paragraph_key(qid, qparas.front());
        std::size_t n_pos = 1;
        if (injected.size() > 1 && gen.rng.bernoulli(cfg.para_extra_relevant_prob)) n_pos = 2;
        n_pos = std::min(n_pos, cfg.para_pool_size);
        std::vector<std::string> ppool;
        for (auto i : gen.rng.sample_without_replacement(injected.size(), n_pos)) {
            ppool.push_back(injected[i]);
            out.para_qrels.add(qkey, injected[i]);
        }
        const std::size_t n_neg = std::min(cfg.para_pool_size - n_pos, negative_paras.size());
        const auto n_hard = std::min<std::size_t>(
            hard_paras.size(),
            static_cast<std::size_t>(std::llround(cfg.para_hard_negative_fraction * static_cast<double>(n_neg))));
        std::set<std::string> chosen;
        for (auto i : gen.rng.sample_without_replacement(hard_paras.size(), n_hard)) chosen.insert(hard_paras[i]);
        std::vector<std::string> easy;
        for (const auto& k : negative_paras) {
            if (!chosen.contains(k)) easy.push_back(k);
        }
        ppool.insert(ppool.end(), chosen.begin(), chosen.end());
        for (auto i : gen.rng.sample_without_replacement(easy.size(), std::min(n_neg - n_hard, easy.size()))) {
            ppool.push_back(easy[i]);
        }
        gen.rng.shuffle(ppool);
        out.para_pools.set(qkey, std::move(ppool));
    }

    std::vector<std::string> qids;
    for (const auto& q : out.queries) qids.push_back(q.id);
    const auto n_test = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(cfg.test_fraction * static_cast<double>(qids.size()) - 1e-9)), 1,
        qids.size() > 1 ? qids.size() - 1 : 1);
    auto test_idx = gen.rng.sample_without_replacement(qids.size(), n_test);
    std::vector<char> is_test(qids.size(), 0);
    for (auto i : test_idx) is_test[i] = 1;
    for (std::size_t i = 0; i < qids.size(); ++i) (is_test[i] ? out.test_queries : out.train_queries).push_back(qids[i]);
    return out;
}

void write_benchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_jsonl(dir / "queries.jsonl", bench.queries);
    write_jsonl(dir / "corpus.jsonl", bench.documents);
    bench.qrels.save(dir / "qrels.txt");
    bench.pools.save(dir / "pools.txt");
    bench.para_qrels.save(dir / "para_qrels.txt");
    bench.para_pools.save(dir / "para_pools.txt");
    write_id_list(dir / "train_queries.txt", bench.train_queries);
    write_id_list(dir / "test_queries.txt", bench.test_queries);
}

SyntheticBenchmark read_benchmark(const std::filesystem::path& dir) {
    SyntheticBenchmark b;
    b.queries = read_jsonl(dir / "queries.jsonl");
    b.documents = read_jsonl(dir / "corpus.jsonl");
    b.qrels = QrelSet::load(dir / "qrels.txt");
    b.pools = CandidatePool::load(dir / "pools.txt");
    b.para_qrels = QrelSet::load(dir / "para_qrels.txt");
    b.para_pools = CandidatePool::load(dir / "para_pools.txt");
    b.train_queries = read_id_list(dir / "train_queries.txt");
    b.test_queries = read_id_list(dir / "test_queries.txt");
    return b;
}

}  // namespace pli
