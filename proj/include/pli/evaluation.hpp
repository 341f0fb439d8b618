#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pli/aggregator.hpp"
#include "pli/bm25.hpp"
#include "pli/corpus.hpp"
#include "pli/metrics.hpp"

namespace pli {

/// Pooled classification report of the positive class.
struct EvalReport {
    BinaryCounts counts;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    std::size_t total_pairs() const { return counts.total(); }
    static EvalReport from_counts(const BinaryCounts& c);

    bool operator==(const EvalReport&) const = default;
};

/// query id -> candidate id -> predicted relevant.
using Decisions = std::map<std::string, std::map<std::string, bool>>;

Decisions decisions_from_predictions(std::span<const Prediction> preds);

/// Top `cutoff` of each ranked list marked relevant, the remainder irrelevant.
Decisions cutoff_decisions(const RetrievalRun& run, std::size_t cutoff);

/// Micro-averaged metrics over every (query, candidate) pair of `pools`.
/// Pool pairs without a decision count as predicted irrelevant; relevant
/// documents missing from a query's pool count as false negatives. Throws
/// DataError for a decision outside its query's pool.
EvalReport pooled_binary_metrics(const Decisions& decisions, const QrelSet& qrels, const CandidatePool& pools);

struct CutoffConfig {
    std::size_t cutoff = 5;
    void validate() const;
};

EvalReport cutoff_evaluate(const RetrievalRun& run, const QrelSet& qrels, const CutoffConfig& cfg,
                           const CandidatePool& pools);

/// F1 per query in `queries`. A query with nothing relevant and nothing
/// predicted scores `empty_value`.
std::map<std::string, double> per_query_f1(const Decisions& decisions, const QrelSet& qrels,
                                           std::span<const std::string> queries, double empty_value = 1.0);

struct SignificanceResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    double mean_diff = 0.0;
    std::size_t n = 0;
    bool significant = false;
    /// Differences with zero variance and a nonzero mean; p is set to 0.
    bool degenerate = false;
};

/// Two-sided Student's paired t-test on d = a - b (sample sd, df = n - 1).
SignificanceResult paired_t_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

/// Aligns two per-query maps on `a`'s keys; both must cover the same queries.
SignificanceResult paired_t_test(const std::map<std::string, double>& a, const std::map<std::string, double>& b,
                                 double alpha = 0.05);

// --- cross-domain grid -------------------------------------------------------

/// Encoders in grid order: untrained, domain A, domain B.
enum class EncoderRole { kOrg = 0, kDomainA = 1, kDomainB = 2 };
/// Aggregators in grid order: trained on domain A, trained on domain B.
enum class AggregatorRole { kDomainA = 0, kDomainB = 1 };

/// R1..R6 row-major over (encoder, aggregator).
std::string grid_label(EncoderRole enc, AggregatorRole agg);

struct GridCell {
    std::string label;
    std::string encoder;
    std::string aggregator;
    EvalReport report;
    std::map<std::string, double> per_query_f1;
    std::optional<SignificanceResult> vs_baseline;
};

struct GridTestSet {
    std::string name;
    EvalReport baseline;
    std::map<std::string, double> baseline_per_query_f1;
    std::array<GridCell, 6> cells;
};

struct CrossDomainGrid {
    std::string domain_a;
    std::string domain_b;
    std::vector<GridTestSet> test_sets;
};

// --- report emission ---------------------------------------------------------

struct ReportRow {
    std::string model;
    EvalReport report;
    std::optional<SignificanceResult> vs_baseline;
};

/// Fixed columns: Model, Precision, Recall, F1 and a `†` marker when the row
/// differs significantly from the baseline.
std::string format_report_table(std::span<const ReportRow> rows);

/// One JSON object per row.
std::string format_report_ndjson(std::span<const ReportRow> rows, const std::string& test_set);

std::vector<ReportRow> grid_rows(const GridTestSet& ts, const std::string& baseline_name);

}  // namespace pli
