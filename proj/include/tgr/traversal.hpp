#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tgr/kb.hpp"
#include "tgr/plan.hpp"
#include "tgr/scorer.hpp"

namespace tgr {

// The reasoning stage: per-path traversal interleaving category-constrained
// neighbor expansion with top-K textual matching, a per-layer union of the
// two, and a final cross-path intersection. Every retained candidate carries
// the trajectory that reached it.

struct TraversalConfig {
    int n_seeds = 5;        // layer-1 textual seeds per path
    int per_layer_text = 10; // textual top-K merged at layers >= 2; 0 disables
    int fallback_k = 20;    // plan-free textual fallback size
    int rerank_pool = 100;  // candidates kept for the organizing stage
    // Replaces top-K seeding with the full restriction-matched category pool;
    // paired with per_layer_text = 0 this makes the traversal match the
    // exhaustive reference exactly (used by oracle comparisons and ablations).
    bool full_restricted_seeding = false;
    bool enable_structural = true; // false drops neighbor expansion entirely
};

enum class StepKind { Structural, Textual, Seed };

const char* step_kind_name(StepKind k);

struct TrajectoryStep {
    std::string node;
    std::string category;
    StepKind kind = StepKind::Textual;
    // Restriction of the planning-graph node governing this layer; feature
    // extraction rebuilds the expanded query from it.
    std::optional<std::string> restriction;

    bool operator==(const TrajectoryStep&) const = default;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
    int path_index = -1; // -1 for fallback trajectories

    size_t structural_steps() const;
    bool operator==(const Trajectory&) const = default;
};

// True when a is the more informative record of how a candidate was reached:
// more steps, then more structural steps, then lexicographically smaller node
// sequence (determinism).
bool trajectory_preferred(const Trajectory& a, const Trajectory& b);

// candidate id -> retained trajectory; the key is always the trajectory's
// final node.
using CandidateSet = std::map<std::string, Trajectory>;

struct LayerTrace {
    int path_index = 0;
    int layer = 0;        // 1-based
    size_t structural = 0; // size of the neighbor-expansion part
    size_t textual = 0;    // size of the textual-matching part
    size_t merged = 0;     // size of their union
};

struct TraversalResult {
    CandidateSet candidates;
    bool fallback = false;       // invalid plan fallback OR empty-intersection degrade
    bool degraded_union = false; // specifically the empty-intersection case
    std::vector<LayerTrace> trace;
};

// Union over prev of category-c neighbors; each new candidate extends the
// trajectory of its smallest-id parent with one Structural step.
CandidateSet expand_structural(const Tgkb& kb, const CandidateSet& prev,
                               const std::string& category,
                               const std::optional<std::string>& restriction = std::nullopt);

// Top-t positive-score nodes of one category under the expanded query
// (query + " " + restriction); each candidate starts a fresh single-step
// trajectory of the given kind. Zero-score nodes are not textual matches.
CandidateSet expand_textual(const Tgkb& kb, const TextScorer& scorer, const std::string& query,
                            const std::optional<std::string>& restriction,
                            const std::string& category, int t,
                            StepKind kind = StepKind::Textual, int path_index = -1);

// Full single-path traversal: textual seeding at layer 1, then per layer the
// union of structural expansion and textual matching. Returns the last
// layer's candidate set. layer_debug, when given, captures every layer's
// merged set (index 0 = layer 1).
CandidateSet traverse_path(const Tgkb& kb, const TextScorer& scorer, const std::string& query,
                           const ReasoningPath& path, const TraversalConfig& cfg,
                           int path_index = 0, std::vector<LayerTrace>* trace = nullptr,
                           std::vector<CandidateSet>* layer_debug = nullptr);

// The whole reasoning stage for one query. Invalid plans fall back to
// plan-free textual retrieval over all nodes (flagged); an empty cross-path
// intersection degrades to the union (also flagged).
TraversalResult mixed_traverse(const Tgkb& kb, const TextScorer& scorer, const std::string& query,
                               const PlanOutcome& plan, const TraversalConfig& cfg);

// Exhaustive reference: enumerates every KB walk matching each path's
// category sequence, keeping nodes whose documents contain all tokens of the
// restriction at every restricted position, and intersects the per-path
// endpoint sets. Exponential-time; test oracle only.
std::set<std::string> brute_force_retrieve(const Tgkb& kb, const PlanningGraph& plan);

// True when doc's token set contains every token of restriction.
bool document_matches_restriction(const std::string& document, const std::string& restriction);

} // namespace tgr
