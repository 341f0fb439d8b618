#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pli/aggregator.hpp"
#include "pli/pair_encoder.hpp"

namespace pli {

/// One JSON object per example: query_key, cand_key, label, query and
/// candidate token ids (already truncated).
void save_stage1_dataset(const std::filesystem::path& path, std::span<const Stage1Example> data);
std::vector<Stage1Example> load_stage1_dataset(const std::filesystem::path& path);

/// Tab-separated `query_id cand_id probability decision`, probability as %.17g.
void save_predictions(const std::filesystem::path& path, std::span<const Prediction> preds);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

/// Digest of a file's bytes as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

/// Reproducibility record of one command.
struct RunManifest {
    std::string command;
    std::string config_hash;
    std::string config_json;  ///< canonical config
    std::map<std::string, std::string> inputs;   ///< path -> digest
    std::map<std::string, std::string> outputs;  ///< path -> digest
    std::map<std::string, std::string> versions;
    double wall_clock_seconds = 0.0;

    std::string to_json() const;
    /// Written atomically.
    void write(const std::filesystem::path& path) const;
};

/// Versions of every artifact format, for manifests.
std::map<std::string, std::string> artifact_versions();

}  // namespace pli
