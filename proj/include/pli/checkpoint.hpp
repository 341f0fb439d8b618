#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace pli {

/// Named slice of a flat parameter vector.
struct ParamSlice {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// Ordered table of named tensors packed into one flat vector. Models keep
/// parameters and gradients as flat vectors with a shared layout so the
/// optimizer and the gradient checker can treat them uniformly.
class ParamLayout {
public:
    std::size_t add(std::string name, std::vector<std::size_t> shape);
    const ParamSlice& slice(const std::string& name) const;
    const std::vector<ParamSlice>& slices() const { return slices_; }
    std::size_t total() const { return total_; }

private:
    std::vector<ParamSlice> slices_;
    std::size_t total_ = 0;
};

struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> data;
};

/// Versioned binary checkpoint: "PLIC", u32 version, str kind, u64 n_meta,
/// n_meta x (str key, str value), u64 n_tensors, per tensor: str name,
/// u32 ndim, ndim x u64 dim, prod(dims) x f64. Little-endian throughout.
struct Checkpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    std::string kind;
    std::map<std::string, std::string> meta;
    std::vector<Tensor> tensors;

    std::string serialize() const;
    static Checkpoint deserialize(std::string_view bytes, const std::string& what);

    void save(const std::filesystem::path& path) const;
    /// Throws DataError on version mismatch or when `expected_kind` differs.
    static Checkpoint load(const std::filesystem::path& path, const std::string& expected_kind);

    /// Packs the flat vector according to `layout`.
    static std::vector<Tensor> pack(const ParamLayout& layout, std::span<const double> flat);
    /// Copies tensors into `flat`; refuses missing names or shape mismatches.
    void unpack(const ParamLayout& layout, std::span<double> flat) const;

    const std::string& meta_at(const std::string& key) const;
};

}  // namespace pli
