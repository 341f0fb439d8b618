#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "pli/aggregator.hpp"
#include "pli/common.hpp"
#include "pli/corpus.hpp"
#include "pli/interaction.hpp"

namespace pli::testutil {

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("pli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

struct GradCheck {
    double max_rel = 0.0;
    std::size_t worst = 0;
};

/// Central differences of `loss` with respect to every entry of `params`.
inline GradCheck check_gradient(std::span<double> params, std::span<const double> analytic,
                                const std::function<double()>& loss, double eps = 1e-5) {
    GradCheck r;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + eps;
        const double up = loss();
        params[i] = keep - eps;
        const double down = loss();
        params[i] = keep;
        const double numeric = (up - down) / (2.0 * eps);
        const double e = relative_error(analytic[i], numeric);
        if (e > r.max_rel) {
            r.max_rel = e;
            r.worst = i;
        }
    }
    return r;
}

inline DocRelevanceSequence random_sequence(std::mt19937_64& gen, std::size_t n, std::size_t dim,
                                            const std::string& q = "q", const std::string& c = "c") {
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    DocRelevanceSequence s;
    s.query_id = q;
    s.cand_id = c;
    s.n = n;
    s.dim = dim;
    s.values.resize(n * dim);
    for (auto& v : s.values) v = u(gen);
    return s;
}

inline InteractionMatrix random_matrix(std::mt19937_64& gen, std::size_t n, std::size_t m, std::size_t dim,
                                       const std::string& q = "q", const std::string& c = "c") {
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    InteractionMatrix mat;
    mat.query_id = q;
    mat.cand_id = c;
    mat.n = n;
    mat.m = m;
    mat.dim = dim;
    mat.values.resize(n * m * dim);
    for (auto& v : mat.values) v = u(gen);
    return mat;
}

/// Document with the given token ids chunked at `paragraph_len`.
inline Document make_token_document(const std::string& id, TokenSeq tokens, std::size_t paragraph_len) {
    Document d;
    d.id = id;
    d.tokens = std::move(tokens);
    d.paragraphs = chunk_document(d, paragraph_len);
    return d;
}

}  // namespace pli::testutil
