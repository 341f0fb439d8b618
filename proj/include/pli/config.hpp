#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "pli/aggregator.hpp"
#include "pli/bm25.hpp"
#include "pli/evaluation.hpp"
#include "pli/interaction.hpp"
#include "pli/pair_encoder.hpp"
#include "pli/synthetic.hpp"

namespace pli {

struct ConfigKey {
    std::string key;  ///< dotted name, also the flag name
    nlohmann::json default_value;
    std::string help;
};

/// Every recognised scalar with its default. The config file is a JSON
/// object whose nesting mirrors the dots, e.g. {"bm25": {"k1": 0.9}}.
const std::vector<ConfigKey>& config_schema();

/// Flat dotted-key view of a configuration.
class Config {
public:
    /// All schema defaults.
    Config();

    /// Merges a JSON file over the current values. Unknown keys or values of
    /// the wrong type raise ConfigError.
    void merge_file(const std::filesystem::path& path);
    void merge_json(const nlohmann::json& nested, const std::string& origin);
    /// Sets one key from its textual flag value.
    void set_from_string(const std::string& key, const std::string& value);

    const nlohmann::json& at(const std::string& key) const;
    double number(const std::string& key) const { return at(key).get<double>(); }
    std::uint64_t u64(const std::string& key) const;
    std::size_t count(const std::string& key) const;
    bool flag(const std::string& key) const { return at(key).get<bool>(); }
    std::string text(const std::string& key) const { return at(key).get<std::string>(); }

    /// Sorted single-line JSON of all values.
    std::string canonical() const;
    /// FNV-1a of canonical(); independent of key order in the source file.
    std::string hash() const;
    nlohmann::json nested() const;

private:
    void set_checked(const std::string& key, const nlohmann::json& value, const std::string& origin);

    std::map<std::string, nlohmann::json> values_;
};

enum class TrainPoolMode { kTopK, kAugment };

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::string domain = "domain";
    std::size_t paragraph_len = kDefaultParagraphLen;
    bool lowercase = true;
    Bm25Params bm25;
    std::size_t top_k = 50;
    TrainPoolMode train_pool = TrainPoolMode::kTopK;
    std::size_t train_pool_size = 20;
    EncoderConfig encoder;
    NegativeSamplingStrategy sampling;
    Stage1TrainConfig stage1;
    bool merge_paragraph_splits = false;
    InteractionConfig interaction;
    AggTrainingConfig aggregator;
    CutoffConfig cutoff;
    double alpha = 0.05;
    double empty_query_f1 = 1.0;
    double validation_fraction = 0.2;

    void validate() const;
};

PipelineConfig pipeline_config(const Config& cfg);
SyntheticConfig synthetic_config(const Config& cfg);

}  // namespace pli
