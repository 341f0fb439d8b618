#include "pli/checkpoint.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "pli/common.hpp"

namespace pli {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + ")";
}

}  // namespace

std::size_t ParamLayout::add(std::string name, std::vector<std::size_t> shape) {
    for (const auto& s : slices_) {
        if (s.name == name) throw std::invalid_argument("ParamLayout: duplicate tensor " + name);
    }
    const std::size_t size = product(shape);
    slices_.push_back({std::move(name), std::move(shape), total_, size});
    total_ += size;
    return slices_.back().offset;
}

const ParamSlice& ParamLayout::slice(const std::string& name) const {
    for (const auto& s : slices_) {
        if (s.name == name) return s;
    }
    throw std::invalid_argument("ParamLayout: no tensor " + name);
}

std::string Checkpoint::serialize() const {
    ByteWriter w;
    w.raw("PLIC");
    w.u32(kFormatVersion);
    w.str(kind);
    w.u64(meta.size());
    for (const auto& [k, v] : meta) {
        w.str(k);
        w.str(v);
    }
    w.u64(tensors.size());
    for (const auto& t : tensors) {
        w.str(t.name);
        w.u32(static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) w.u64(d);
        for (double x : t.data) w.f64(x);
    }
    return w.take();
}

Checkpoint Checkpoint::deserialize(std::string_view bytes, const std::string& what) {
    ByteReader r(bytes, what);
    r.expect_magic("PLIC");
    if (auto v = r.u32(); v != kFormatVersion) r.fail("unsupported checkpoint version " + std::to_string(v));
    Checkpoint c;
    c.kind = r.str();
    const auto n_meta = r.u64();
    for (std::uint64_t i = 0; i < n_meta; ++i) {
        auto k = r.str();
        c.meta[k] = r.str();
    }
    const auto n_tensors = r.u64();
    for (std::uint64_t i = 0; i < n_tensors; ++i) {
        Tensor t;
        t.name = r.str();
        const auto ndim = r.u32();
        for (std::uint32_t d = 0; d < ndim; ++d) t.shape.push_back(r.u64());
        const std::size_t n = product(t.shape);
        if (n > r.remaining() / 8) r.fail("tensor " + t.name + " exceeds file size");
        t.data.resize(n);
        for (auto& x : t.data) x = r.f64();
        c.tensors.push_back(std::move(t));
    }
    if (!r.at_end()) r.fail("trailing bytes");
    return c;
}

void Checkpoint::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path, const std::string& expected_kind) {
    if (!std::filesystem::exists(path)) throw DataError("checkpoint not found: " + path.string());
    auto c = deserialize(read_file(path), path.string());
    if (c.kind != expected_kind) {
        throw DataError(path.string() + ": checkpoint kind '" + c.kind + "', expected '" + expected_kind + "'");
    }
    return c;
}

std::vector<Tensor> Checkpoint::pack(const ParamLayout& layout, std::span<const double> flat) {
    std::vector<Tensor> out;
    for (const auto& s : layout.slices()) {
        auto part = flat.subspan(s.offset, s.size);
        out.push_back({s.name, s.shape, std::vector<double>(part.begin(), part.end())});
    }
    return out;
}

void Checkpoint::unpack(const ParamLayout& layout, std::span<double> flat) const {
    if (tensors.size() != layout.slices().size()) {
        throw DataError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model expects " +
                        std::to_string(layout.slices().size()));
    }
    for (const auto& s : layout.slices()) {
        auto it = std::find_if(tensors.begin(), tensors.end(), [&](const Tensor& t) { return t.name == s.name; });
        if (it == tensors.end()) throw DataError("checkpoint is missing tensor " + s.name);
        if (it->shape != s.shape) {
            throw DataError("checkpoint tensor " + s.name + " has shape " + shape_str(it->shape) + ", expected " +
                            shape_str(s.shape));
        }
        std::copy(it->data.begin(), it->data.end(), flat.begin() + static_cast<std::ptrdiff_t>(s.offset));
    }
}

const std::string& Checkpoint::meta_at(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError("checkpoint is missing metadata key " + key);
    return it->second;
}

}  // namespace pli
