#include "pli/vector_store.hpp"

#include "pli/common.hpp"

namespace pli {

std::string to_string(const CellKey& key) {
    return "(" + key.query_id + ", " + key.cand_id + ", " + std::to_string(key.i) + ", " + std::to_string(key.j) + ")";
}

ExternalVectorStore::ExternalVectorStore(std::uint32_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("ExternalVectorStore: dimension must be >= 1");
}

void ExternalVectorStore::put(const CellKey& key, std::span<const float> v) {
    if (v.size() != dim_) {
        throw std::invalid_argument("ExternalVectorStore: vector of dimension " + std::to_string(v.size()) +
                                    " for store of dimension " + std::to_string(dim_));
    }
    vectors_[key].assign(v.begin(), v.end());
}

const std::vector<float>* ExternalVectorStore::find(const CellKey& key) const {
    auto it = vectors_.find(key);
    return it == vectors_.end() ? nullptr : &it->second;
}

void ExternalVectorStore::save(const std::filesystem::path& path) const {
    ByteWriter w;
    w.raw("PLIV");
    w.u32(kFormatVersion);
    w.u32(dim_);
    w.u64(vectors_.size());
    for (const auto& [k, v] : vectors_) {
        w.str(k.query_id);
        w.str(k.cand_id);
        w.u16(k.i);
        w.u16(k.j);
        for (float x : v) w.f32(x);
    }
    write_file_atomic(path, w.bytes());
}

ExternalVectorStore ExternalVectorStore::load(const std::filesystem::path& path,
                                              std::optional<std::uint32_t> expected_dim) {
    if (!std::filesystem::exists(path)) throw DataError("vector store not found: " + path.string());
    const std::string bytes = read_file(path);
    ByteReader r(bytes, path.string());
    r.expect_magic("PLIV");
    if (auto v = r.u32(); v != kFormatVersion) r.fail("unsupported vector store version " + std::to_string(v));
    const auto dim = r.u32();
    if (dim == 0) r.fail("zero vector dimension");
    if (expected_dim && dim != *expected_dim) {
        r.fail("dimension mismatch: file has " + std::to_string(dim) + ", expected " + std::to_string(*expected_dim));
    }
    const auto count = r.u64();
    ExternalVectorStore store(dim);
    std::vector<float> v(dim);
    for (std::uint64_t n = 0; n < count; ++n) {
        CellKey k;
        k.query_id = r.str();
        k.cand_id = r.str();
        k.i = r.u16();
        k.j = r.u16();
        for (auto& x : v) x = r.f32();
        if (store.vectors_.contains(k)) r.fail("duplicate record " + to_string(k));
        store.vectors_.emplace(std::move(k), v);
    }
    if (!r.at_end()) r.fail("trailing bytes");
    return store;
}

}  // namespace pli
