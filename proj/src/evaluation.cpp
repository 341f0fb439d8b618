#include "pli/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include "json.hpp"

#include "pli/common.hpp"

namespace pli {

EvalReport EvalReport::from_counts(const BinaryCounts& c) {
    return {c, c.precision(), c.recall(), c.f1()};
}

Decisions decisions_from_predictions(std::span<const Prediction> preds) {
    Decisions d;
    for (const auto& p : preds) d[p.query_id][p.cand_id] = p.relevant;
    return d;
}

Decisions cutoff_decisions(const RetrievalRun& run, std::size_t cutoff) {
    Decisions d;
    for (const auto& [qid, list] : run.entries()) {
        auto& q = d[qid];
        for (std::size_t r = 0; r < list.size(); ++r) q[list[r].doc_id] = r < cutoff;
    }
    return d;
}

EvalReport pooled_binary_metrics(const Decisions& decisions, const QrelSet& qrels, const CandidatePool& pools) {
    for (const auto& [qid, dec] : decisions) {
        if (!pools.has_query(qid)) throw DataError("evaluation: decisions for query " + qid + " which has no pool");
        for (const auto& [cid, _] : dec) {
            if (!pools.contains(qid, cid)) {
                throw DataError("evaluation: decision for (" + qid + ", " + cid + ") outside the candidate pool");
            }
        }
    }
    BinaryCounts c;
    for (const auto& [qid, pool] : pools.entries()) {
        const auto dit = decisions.find(qid);
        for (const auto& cid : pool) {
            bool predicted = false;
            if (dit != decisions.end()) {
                auto it = dit->second.find(cid);
                predicted = it != dit->second.end() && it->second;
            }
            c.add(predicted, qrels.is_relevant(qid, cid));
        }
        if (qrels.has_query(qid)) {
            for (const auto& rel : qrels.relevant(qid)) {
                if (!pools.contains(qid, rel)) c.add(false, true);
            }
        }
    }
    return EvalReport::from_counts(c);
}

void CutoffConfig::validate() const {
    if (cutoff < 1) throw std::invalid_argument("cutoff must be >= 1");
}

EvalReport cutoff_evaluate(const RetrievalRun& run, const QrelSet& qrels, const CutoffConfig& cfg,
                           const CandidatePool& pools) {
    cfg.validate();
    return pooled_binary_metrics(cutoff_decisions(run, cfg.cutoff), qrels, pools);
}

std::map<std::string, double> per_query_f1(const Decisions& decisions, const QrelSet& qrels,
                                           std::span<const std::string> queries, double empty_value) {
    std::map<std::string, double> out;
    for (const auto& qid : queries) {
        BinaryCounts c;
        std::set<std::string> seen;
        if (auto dit = decisions.find(qid); dit != decisions.end()) {
            for (const auto& [cid, pred] : dit->second) {
                c.add(pred, qrels.is_relevant(qid, cid));
                seen.insert(cid);
            }
        }
        if (qrels.has_query(qid)) {
            for (const auto& rel : qrels.relevant(qid)) {
                if (!seen.contains(rel)) c.add(false, true);
            }
        }
        out[qid] = (c.tp + c.fn == 0 && c.tp + c.fp == 0) ? empty_value : c.f1();
    }
    return out;
}

SignificanceResult paired_t_test(std::span<const double> a, std::span<const double> b, double alpha) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: samples differ in length");
    if (a.size() < 2) throw std::invalid_argument("paired_t_test: at least two pairs are required");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("paired_t_test: alpha must lie in (0, 1)");
    SignificanceResult r;
    r.n = a.size();
    r.df = static_cast<double>(r.n - 1);
    std::vector<double> d(r.n);
    double sum = 0.0;
    for (std::size_t i = 0; i < r.n; ++i) {
        d[i] = a[i] - b[i];
        sum += d[i];
    }
    const double mean = sum / static_cast<double>(r.n);
    double ss = 0.0;
    for (double x : d) ss += (x - mean) * (x - mean);
    r.mean_diff = mean;
    const double sd = std::sqrt(ss / r.df);
    if (sd == 0.0) {
        if (mean == 0.0) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
            r.p = 0.0;
            r.degenerate = true;
        }
    } else {
        r.t = mean / (sd / std::sqrt(static_cast<double>(r.n)));
        boost::math::students_t dist(r.df);
        r.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t))), 0.0, 1.0);
    }
    r.significant = r.p < alpha;
    return r;
}

SignificanceResult paired_t_test(const std::map<std::string, double>& a, const std::map<std::string, double>& b,
                                 double alpha) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: samples cover different queries");
    std::vector<double> va, vb;
    for (const auto& [q, x] : a) {
        auto it = b.find(q);
        if (it == b.end()) throw std::invalid_argument("paired_t_test: query " + q + " missing from second sample");
        va.push_back(x);
        vb.push_back(it->second);
    }
    return paired_t_test(va, vb, alpha);
}

std::string grid_label(EncoderRole enc, AggregatorRole agg) {
    return "R" + std::to_string(2 * static_cast<int>(enc) + static_cast<int>(agg) + 1);
}

std::string format_report_table(std::span<const ReportRow> rows) {
    std::size_t width = 5;
    for (const auto& r : rows) width = std::max(width, r.model.size());
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-*s  %9s  %9s  %9s\n", static_cast<int>(width), "Model", "Precision", "Recall",
                  "F1");
    os << buf;
    for (const auto& r : rows) {
        const bool mark = r.vs_baseline && r.vs_baseline->significant;
        std::snprintf(buf, sizeof buf, "%-*s  %9.4f  %9.4f  %9.4f", static_cast<int>(width), r.model.c_str(),
                      r.report.precision, r.report.recall, r.report.f1);
        os << buf << (mark ? " †" : "") << '\n';
    }
    return os.str();
}

namespace {

nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

}  // namespace

std::string format_report_ndjson(std::span<const ReportRow> rows, const std::string& test_set) {
    std::string out;
    for (const auto& r : rows) {
        nlohmann::json j;
        j["test_set"] = test_set;
        j["model"] = r.model;
        j["precision"] = r.report.precision;
        j["recall"] = r.report.recall;
        j["f1"] = r.report.f1;
        j["tp"] = r.report.counts.tp;
        j["fp"] = r.report.counts.fp;
        j["fn"] = r.report.counts.fn;
        j["tn"] = r.report.counts.tn;
        j["total"] = r.report.total_pairs();
        if (r.vs_baseline) {
            j["t"] = finite_or_null(r.vs_baseline->t);
            j["df"] = r.vs_baseline->df;
            j["p"] = r.vs_baseline->p;
            j["significant"] = r.vs_baseline->significant;
            j["degenerate"] = r.vs_baseline->degenerate;
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<ReportRow> grid_rows(const GridTestSet& ts, const std::string& baseline_name) {
    std::vector<ReportRow> rows;
    rows.push_back({baseline_name, ts.baseline, std::nullopt});
    for (const auto& c : ts.cells) {
        rows.push_back({c.label + " " + c.encoder + " + " + c.aggregator, c.report, c.vs_baseline});
    }
    return rows;
}

}  // namespace pli
