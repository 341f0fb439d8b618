#include "pli/config.hpp"

#include <cstdlib>

#include "pli/common.hpp"

namespace pli {

using nlohmann::json;

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = {
        {"seed", 0, "base seed for every random stream"},
        {"domain", "domain", "domain label recorded in reports"},
        {"threads", 0, "OpenMP threads; 0 uses all cores"},
        {"corpus.paragraph_len", 256, "tokens per paragraph"},
        {"corpus.lowercase", true, "fold ASCII case before lookup"},
        {"bm25.k1", 0.9, "BM25 term-frequency saturation"},
        {"bm25.b", 0.4, "BM25 length normalisation"},
        {"bm25.doc_prefix_len", 250, "leading tokens indexed and queried"},
        {"retrieval.top_k", 50, "candidates kept per query"},
        {"retrieval.train_pool", "topk", "training pools: topk or augment"},
        {"retrieval.train_pool_size", 20, "pool size when augmenting"},
        {"encoder.d_embed", 32, "token embedding width"},
        {"encoder.d_repr", 64, "relevance vector width"},
        {"encoder.init_scale", 0.1, "uniform init half-width"},
        {"encoder.max_pair_tokens", 512, "pair budget including 3 special positions"},
        {"stage1.lr", 1e-5, "encoder learning rate"},
        {"stage1.batch_size", 2, "encoder batch size"},
        {"stage1.epochs", 3, "encoder epochs"},
        {"stage1.sampling", "all", "negatives: all or random_k"},
        {"stage1.k", 5, "negatives per positive for random_k"},
        {"stage1.merge_paragraph_splits", false, "train the encoder on train and test paragraphs"},
        {"interaction.max_query_paragraphs", 54, "N"},
        {"interaction.max_cand_paragraphs", 40, "M"},
        {"aggregator.cell", "lstm", "lstm or gru"},
        {"aggregator.hidden", 128, "hidden width"},
        {"aggregator.lr", 1e-4, "aggregator learning rate"},
        {"aggregator.epochs", 10, "aggregator epochs"},
        {"aggregator.batch_size", 16, "aggregator batch size"},
        {"aggregator.init_scale", 0.08, "uniform init half-width"},
        {"evaluation.cutoff", 5, "ranks declared relevant for the BM25 baseline"},
        {"evaluation.alpha", 0.05, "significance level"},
        {"evaluation.empty_query_f1", 1.0, "F1 of a query with nothing relevant and nothing predicted"},
        {"split.validation_fraction", 0.2, "share of training queries held out for model selection"},
        {"synth.n_queries", 50, "queries"},
        {"synth.pool_size", 200, "candidates per query"},
        {"synth.n_relevant_per_query", 5, "relevant candidates per query"},
        {"synth.vocab_size", 4000, "distinct words"},
        {"synth.doc_len_tokens", 512, "tokens per document"},
        {"synth.paragraph_len", 64, "paragraph length used for paragraph judgements"},
        {"synth.test_fraction", 0.2, "held-out query share"},
    };
    return schema;
}

namespace {

const ConfigKey* find_key(const std::string& key) {
    for (const auto& k : config_schema()) {
        if (k.key == key) return &k;
    }
    return nullptr;
}

bool compatible(const json& def, const json& v) {
    if (def.is_boolean()) return v.is_boolean();
    if (def.is_string()) return v.is_string();
    if (def.is_number_integer()) return v.is_number_integer() || (v.is_number_float() && v.get<double>() == std::floor(v.get<double>()));
    if (def.is_number()) return v.is_number();
    return false;
}

void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object()) {
            flatten(*it, key, out);
        } else {
            out[key] = *it;
        }
    }
}

}  // namespace

Config::Config() {
    for (const auto& k : config_schema()) values_[k.key] = k.default_value;
}

void Config::set_checked(const std::string& key, const json& value, const std::string& origin) {
    const auto* k = find_key(key);
    if (k == nullptr) throw ConfigError(origin + ": unknown configuration key '" + key + "'");
    if (!compatible(k->default_value, value)) {
        throw ConfigError(origin + ": '" + key + "' expects a value like " + k->default_value.dump() + ", got " +
                          value.dump());
    }
    if (k->default_value.is_number_integer()) {
        if (value.get<double>() < 0.0) throw ConfigError(origin + ": '" + key + "' must be non-negative");
        values_[key] = static_cast<std::uint64_t>(value.get<double>());
    } else if (k->default_value.is_number_float()) {
        values_[key] = value.get<double>();
    } else {
        values_[key] = value;
    }
}

void Config::merge_json(const json& nested, const std::string& origin) {
    if (!nested.is_object()) throw ConfigError(origin + ": configuration must be a JSON object");
    std::map<std::string, json> flat;
    flatten(nested, "", flat);
    for (const auto& [k, v] : flat) set_checked(k, v, origin);
}

void Config::merge_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    merge_json(j, path.string());
}

void Config::set_from_string(const std::string& key, const std::string& value) {
    const auto* k = find_key(key);
    if (k == nullptr) throw ConfigError("unknown configuration key '" + key + "'");
    const std::string origin = "--" + key;
    if (k->default_value.is_string()) {
        set_checked(key, value, origin);
        return;
    }
    if (k->default_value.is_boolean()) {
        if (value == "true" || value == "1") {
            set_checked(key, true, origin);
        } else if (value == "false" || value == "0") {
            set_checked(key, false, origin);
        } else {
            throw ConfigError(origin + ": expected true or false, got '" + value + "'");
        }
        return;
    }
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size()) {
        throw ConfigError(origin + ": expected a number, got '" + value + "'");
    }
    if (k->default_value.is_number_integer() && v == std::floor(v)) {
        set_checked(key, static_cast<std::int64_t>(v), origin);
    } else {
        set_checked(key, v, origin);
    }
}

const json& Config::at(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
    return it->second;
}

std::uint64_t Config::u64(const std::string& key) const { return at(key).get<std::uint64_t>(); }

std::size_t Config::count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

std::string Config::canonical() const {
    json j = json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j.dump();
}

std::string Config::hash() const { return hex64(fnv1a64(canonical())); }

json Config::nested() const {
    json root = json::object();
    for (const auto& [k, v] : values_) {
        json* node = &root;
        std::size_t start = 0;
        for (std::size_t dot = k.find('.'); dot != std::string::npos; dot = k.find('.', start)) {
            node = &(*node)[k.substr(start, dot - start)];
            start = dot + 1;
        }
        (*node)[k.substr(start)] = v;
    }
    return root;
}

void PipelineConfig::validate() const {
    bm25.validate();
    if (paragraph_len < 1) throw ConfigError("corpus.paragraph_len must be >= 1");
    if (top_k < 1) throw ConfigError("retrieval.top_k must be >= 1");
    if (train_pool == TrainPoolMode::kAugment && train_pool_size < 1) {
        throw ConfigError("retrieval.train_pool_size must be >= 1");
    }
    if (encoder.d_embed < 1 || encoder.d_repr < 1) throw ConfigError("encoder dimensions must be >= 1");
    if (encoder.max_pair_tokens < 4) throw ConfigError("encoder.max_pair_tokens must be >= 4");
    if (!(stage1.lr >= 0.0) || stage1.batch_size < 1) throw ConfigError("stage1.lr must be >= 0 and batch_size >= 1");
    if (sampling.kind == NegativeSampling::kRandomKPerPositive && sampling.k < 1) throw ConfigError("stage1.k must be >= 1");
    interaction.validate();
    if (!(aggregator.lr >= 0.0) || aggregator.batch_size < 1 || aggregator.hidden < 1) {
        throw ConfigError("aggregator.lr must be >= 0, batch_size and hidden >= 1");
    }
    cutoff.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("evaluation.alpha must lie in (0, 1)");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("split.validation_fraction must lie in [0, 1)");
    }
}

PipelineConfig pipeline_config(const Config& c) {
    PipelineConfig p;
    try {
        p.seed = c.u64("seed");
        p.domain = c.text("domain");
        p.paragraph_len = c.count("corpus.paragraph_len");
        p.lowercase = c.flag("corpus.lowercase");
        p.bm25.k1 = c.number("bm25.k1");
        p.bm25.b = c.number("bm25.b");
        p.bm25.doc_prefix_len = c.count("bm25.doc_prefix_len");
        p.top_k = c.count("retrieval.top_k");
        const auto mode = c.text("retrieval.train_pool");
        if (mode == "topk") {
            p.train_pool = TrainPoolMode::kTopK;
        } else if (mode == "augment") {
            p.train_pool = TrainPoolMode::kAugment;
        } else {
            throw ConfigError("retrieval.train_pool must be topk or augment, got '" + mode + "'");
        }
        p.train_pool_size = c.count("retrieval.train_pool_size");
        p.encoder.d_embed = c.count("encoder.d_embed");
        p.encoder.d_repr = c.count("encoder.d_repr");
        p.encoder.init_scale = c.number("encoder.init_scale");
        p.encoder.max_pair_tokens = c.count("encoder.max_pair_tokens");
        p.encoder.seed = derive_seed(p.seed, "encoder");
        p.stage1.lr = c.number("stage1.lr");
        p.stage1.batch_size = c.count("stage1.batch_size");
        p.stage1.epochs = c.count("stage1.epochs");
        p.stage1.seed = derive_seed(p.seed, "stage1");
        p.sampling.kind = parse_negative_sampling(c.text("stage1.sampling"));
        p.sampling.k = c.count("stage1.k");
        p.sampling.seed = derive_seed(p.seed, "sampling");
        p.merge_paragraph_splits = c.flag("stage1.merge_paragraph_splits");
        p.interaction.max_query_paragraphs = c.count("interaction.max_query_paragraphs");
        p.interaction.max_cand_paragraphs = c.count("interaction.max_cand_paragraphs");
        p.aggregator.cell = parse_rnn_cell(c.text("aggregator.cell"));
        p.aggregator.hidden = c.count("aggregator.hidden");
        p.aggregator.lr = c.number("aggregator.lr");
        p.aggregator.epochs = c.count("aggregator.epochs");
        p.aggregator.batch_size = c.count("aggregator.batch_size");
        p.aggregator.init_scale = c.number("aggregator.init_scale");
        p.aggregator.seed = derive_seed(p.seed, "aggregator");
        p.cutoff.cutoff = c.count("evaluation.cutoff");
        p.alpha = c.number("evaluation.alpha");
        p.empty_query_f1 = c.number("evaluation.empty_query_f1");
        p.validation_fraction = c.number("split.validation_fraction");
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return p;
}

SyntheticConfig synthetic_config(const Config& c) {
    SyntheticConfig s;
    s.seed = c.u64("seed");
    s.n_queries = c.count("synth.n_queries");
    s.pool_size = c.count("synth.pool_size");
    s.n_relevant_per_query = c.count("synth.n_relevant_per_query");
    s.vocab_size = c.count("synth.vocab_size");
    s.doc_len_tokens = c.count("synth.doc_len_tokens");
    s.paragraph_len = c.count("synth.paragraph_len");
    s.test_fraction = c.number("synth.test_fraction");
    return s;
}

}  // namespace pli
