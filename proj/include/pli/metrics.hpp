#pragma once

#include <cstddef>

namespace pli {

/// Confusion counts of a binary decision with P/R/F1 of the positive class.
struct BinaryCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    void add(bool predicted, bool actual) {
        if (predicted && actual) {
            ++tp;
        } else if (predicted) {
            ++fp;
        } else if (actual) {
            ++fn;
        } else {
            ++tn;
        }
    }

    std::size_t total() const { return tp + fp + fn + tn; }

    /// 0 when nothing is predicted positive.
    double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
    double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
    double f1() const {
        const double p = precision();
        const double r = recall();
        return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }

    BinaryCounts& operator+=(const BinaryCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }

    bool operator==(const BinaryCounts&) const = default;
};

}  // namespace pli
