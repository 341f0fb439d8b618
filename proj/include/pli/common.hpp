#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pli {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

// Error taxonomy. The CLI maps these onto exit codes:
// std::invalid_argument / ConfigError -> 1, DataError -> 2, NumericalError -> 3.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Seeded random source with platform-independent draws.
///
/// std::uniform_int_distribution and friends are implementation-defined, so
/// draws are derived directly from the 64-bit engine output to keep generated
/// corpora and sampled pools byte-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices from [0, n), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
};

/// Derive an independent stream seed from a base seed and a label.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

/// 64-bit FNV-1a digest.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

// Thread control for the OpenMP kernels. 0 restores the runtime default.
void set_num_threads(int n);
int num_threads();

// --- files -----------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);

/// Write via a sibling temp file and rename, so readers never observe a
/// partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// --- little-endian binary encoding -----------------------------------------

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void f64(double v);
    void raw(std::string_view bytes) { buf_.append(bytes); }
    /// u32 byte length followed by UTF-8 bytes.
    void str(std::string_view s);

    const std::string& bytes() const { return buf_; }
    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(std::string_view bytes, std::string what) : data_(bytes), what_(std::move(what)) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    std::string_view raw(std::size_t n);
    std::string str();

    /// Consume `magic` or throw DataError.
    void expect_magic(std::string_view magic);

    std::size_t offset() const { return pos_; }
    bool at_end() const { return pos_ == data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }

    [[noreturn]] void fail(const std::string& msg) const;

private:
    void need(std::size_t n);

    std::string_view data_;
    std::string what_;
    std::size_t pos_ = 0;
};

// --- small numeric helpers -------------------------------------------------

inline double sigmoid(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

/// Positive-class probability of a two-way softmax over (neg, pos) logits.
inline double softmax2_positive(double neg, double pos) { return sigmoid(pos - neg); }

}  // namespace pli
