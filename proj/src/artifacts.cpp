#include "pli/artifacts.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "json.hpp"

#include "pli/bm25.hpp"
#include "pli/checkpoint.hpp"
#include "pli/common.hpp"
#include "pli/interaction.hpp"
#include "pli/vector_store.hpp"

namespace pli {

using nlohmann::json;

void save_stage1_dataset(const std::filesystem::path& path, std::span<const Stage1Example> data) {
    std::string out;
    for (const auto& ex : data) {
        json j;
        j["query_key"] = ex.query_key;
        j["cand_key"] = ex.cand_key;
        j["label"] = ex.label;
        j["query"] = ex.query;
        j["candidate"] = ex.candidate;
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<Stage1Example> load_stage1_dataset(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("stage-1 dataset not found: " + path.string());
    std::istringstream in(read_file(path));
    std::vector<Stage1Example> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            Stage1Example ex;
            ex.query_key = j.at("query_key").get<std::string>();
            ex.cand_key = j.at("cand_key").get<std::string>();
            ex.label = j.at("label").get<int>();
            ex.query = j.at("query").get<TokenSeq>();
            ex.candidate = j.at("candidate").get<TokenSeq>();
            if (ex.label != 0 && ex.label != 1) throw DataError("label must be 0 or 1");
            out.push_back(std::move(ex));
        } catch (const std::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_predictions(const std::filesystem::path& path, std::span<const Prediction> preds) {
    std::string out;
    char buf[64];
    for (const auto& p : preds) {
        std::snprintf(buf, sizeof buf, "\t%.17g\t%d\n", p.prob, p.relevant ? 1 : 0);
        out += p.query_id + "\t" + p.cand_id + buf;
    }
    write_file_atomic(path, out);
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("predictions file not found: " + path.string());
    std::istringstream in(read_file(path));
    std::vector<Prediction> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        Prediction p;
        std::string prob;
        int decision = -1;
        if (!(ls >> p.query_id >> p.cand_id >> prob >> decision) || (decision != 0 && decision != 1)) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed prediction line");
        }
        p.prob = std::strtod(prob.c_str(), nullptr);
        p.relevant = decision == 1;
        out.push_back(std::move(p));
    }
    return out;
}

std::string file_digest(const std::filesystem::path& path) { return hex64(fnv1a64(read_file(path))); }

std::string RunManifest::to_json() const {
    json j;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["config"] = json::parse(config_json.empty() ? "{}" : config_json);
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["versions"] = versions;
    j["wall_clock_seconds"] = wall_clock_seconds;
    return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) const { write_file_atomic(path, to_json()); }

std::map<std::string, std::string> artifact_versions() {
    return {
        {"index", "PLIX/" + std::to_string(InvertedIndex::kFormatVersion)},
        {"vector_store", "PLIV/" + std::to_string(ExternalVectorStore::kFormatVersion)},
        {"interaction_cache", "PLIM/" + std::to_string(kInteractionCacheVersion)},
        {"checkpoint", "PLIC/" + std::to_string(Checkpoint::kFormatVersion)},
    };
}

}  // namespace pli
