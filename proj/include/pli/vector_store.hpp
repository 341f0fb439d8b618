#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pli {

/// (query, candidate, query paragraph, candidate paragraph)
struct CellKey {
    std::string query_id;
    std::string cand_id;
    std::uint16_t i = 0;
    std::uint16_t j = 0;

    auto operator<=>(const CellKey&) const = default;
    bool operator==(const CellKey&) const = default;
};

std::string to_string(const CellKey& key);

/// Externally computed pair relevance vectors, e.g. CLS outputs of a real
/// language model, that can stand in for the built-in encoder.
///
/// File layout: "PLIV", u32 version, u32 d_repr, u64 count, then per record
/// str query_id, str cand_id, u16 i, u16 j, d_repr x f32. Strings are u32
/// length-prefixed UTF-8; all integers little-endian.
class ExternalVectorStore {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    explicit ExternalVectorStore(std::uint32_t dim);

    std::uint32_t dim() const { return dim_; }
    std::size_t size() const { return vectors_.size(); }

    /// Throws std::invalid_argument on a dimension mismatch.
    void put(const CellKey& key, std::span<const float> v);
    const std::vector<float>* find(const CellKey& key) const;
    const std::map<CellKey, std::vector<float>>& entries() const { return vectors_; }

    void save(const std::filesystem::path& path) const;
    /// DataError on truncation, bad magic or version, duplicate keys, or when
    /// the stored dimension differs from `expected_dim`.
    static ExternalVectorStore load(const std::filesystem::path& path,
                                    std::optional<std::uint32_t> expected_dim = std::nullopt);

    bool operator==(const ExternalVectorStore&) const = default;

private:
    std::uint32_t dim_;
    std::map<CellKey, std::vector<float>> vectors_;
};

}  // namespace pli
