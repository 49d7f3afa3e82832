#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tgr/engine.hpp"
#include "tgr/queries.hpp"

namespace tgr {

// Ranked-retrieval metrics plus the evaluation harness: per-query runs,
// means, fallback rate, per-logic-pattern breakdown, and the structural vs
// textual attribution ratios of the top-20.

int hit_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& answers,
             size_t k);
double recall_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& answers,
                   size_t k); // answers must be non-empty
double mrr(const std::vector<std::string>& ranked, const std::set<std::string>& answers);

struct QueryMetrics {
    std::string id;
    int h1 = 0;
    int h5 = 0;
    double r20 = 0.0;
    double mrr = 0.0;
    bool fallback = false;
    std::string pattern;
    double reasoning_seconds = 0.0;
    double organizing_seconds = 0.0;
};

struct PatternStats {
    size_t count = 0;
    double h1 = 0.0, h5 = 0.0, r20 = 0.0, mrr = 0.0;
};

// Per-query slice of what ratio_analysis consumes.
struct RatioInput {
    std::vector<std::pair<std::string, StepKind>> top; // candidate id + final-step kind
    std::set<std::string> answers;
    bool fallback = false;
    double plan_struct_words = 0.0; // category mentions in the plan
    double plan_text_words = 0.0;   // restriction tokens in the plan
};

struct RatioReport {
    // Fractions of top-20 candidates by final retrieval kind, over
    // non-fallback queries; they sum to 1.
    double structure_all = 0.0, text_all = 0.0;
    // Same fractions over the retrieved answers only; undefined (omitted)
    // when no answer appears in any top-20.
    std::optional<double> structure_answer, text_answer;
    // Word-count ratio of structural vs textual requirements in the gold
    // plans; an approximation of the dataset-side information split.
    double structure_info = 0.0, text_info = 0.0;
    size_t counted_queries = 0;
    size_t answer_hits = 0;
};

RatioReport ratio_analysis(const std::vector<RatioInput>& inputs);

struct MetricsReport {
    double h1 = 0.0, h5 = 0.0, r20 = 0.0, mrr = 0.0;
    double fallback_rate = 0.0;
    size_t n_queries = 0;
    std::vector<QueryMetrics> per_query;
    std::map<std::string, PatternStats> per_pattern;
    std::optional<RatioReport> ratios;
    std::string variant;
};

struct EvalOptions {
    Variant variant = Variant::Full;
    FeatureMask mask;
    const RerankerModel* model = nullptr; // required for Variant::Full
    int workers = 1;
    bool with_ratios = true;
    size_t top_k = 20; // ratio-analysis window
};

MetricsReport evaluate(const RetrievalEngine& engine, const std::vector<QueryRecord>& queries,
                       const EvalOptions& opts);

// Plain-text table in the column order H@1, H@5, R@20, MRR.
std::string format_report_table(const MetricsReport& report);
void write_report_json(const MetricsReport& report, std::ostream& out);

} // namespace tgr
