#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tgr/kb.hpp"
#include "tgr/llm_planner.hpp"
#include "tgr/plan.hpp"
#include "tgr/queries.hpp"
#include "tgr/reranker.hpp"
#include "tgr/scorer.hpp"
#include "tgr/traversal.hpp"

namespace tgr {

// One retrieval pipeline instance over a shared KB: planning (gold plan if
// the query carries one, otherwise the configured planner), mixed traversal,
// pool selection by initial semantic score, and ranking.

enum class Variant {
    Full,     // trained reranker orders the pool
    NoRerank, // pool ordered by the initial semantic score
    NoText,   // per-layer textual matching off (seeding retained), no reranker
    NoStruct, // neighbor expansion off, no reranker
    Oracle,   // exhaustive reference endpoints, id order; needs a valid plan
};

const char* variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& name);

struct PlannerSetup {
    enum class Mode { Gold, Template, Llm };
    Mode mode = Mode::Gold;
    std::vector<TemplateRule> rules;
    std::optional<LlmEndpoint> endpoint;
    std::vector<PlannerDemo> demos;
};

struct EngineSetup {
    TraversalConfig traversal;
    size_t max_path_len = 3;
    PlannerSetup planner;
};

struct QueryRun {
    PlanOutcome plan = PlanOutcome::invalid("not planned");
    bool fallback = false;
    bool degraded_union = false;
    std::vector<RankedCandidate> ranking; // the whole ranked pool
    std::vector<StepKind> final_kinds;    // final-step kind, parallel to ranking
    std::string pattern;                  // plan category signature, or "(fallback)"
    CandidateSet pool;                    // retained trajectories of pooled candidates
    std::vector<LayerTrace> trace;
    double reasoning_seconds = 0.0;
    double organizing_seconds = 0.0;
};

class RetrievalEngine {
public:
    RetrievalEngine(const Tgkb& kb, const TextScorer& scorer,
                    const HashedEmbeddingScorer& semantic, EngineSetup setup)
        : kb_(&kb), scorer_(&scorer), semantic_(&semantic), setup_(std::move(setup)) {}

    // Planner precedence: the query's gold plan when present, then the
    // configured planner; validation failures surface as Invalid so the
    // traversal fallback owns them.
    PlanOutcome make_plan(const QueryRecord& q) const;

    QueryRun run(const QueryRecord& q, Variant variant = Variant::Full,
                 const RerankerModel* model = nullptr, const FeatureMask& mask = {}) const;

    const Tgkb& kb() const { return *kb_; }
    const TextScorer& scorer() const { return *scorer_; }
    const HashedEmbeddingScorer& semantic() const { return *semantic_; }
    const EngineSetup& setup() const { return setup_; }

private:
    const Tgkb* kb_;
    const TextScorer* scorer_;
    const HashedEmbeddingScorer* semantic_;
    EngineSetup setup_;
};

// Category-sequence signature of a plan, e.g.
// "Field-of-Study->Paper;Institution->Author->Paper".
std::string plan_signature(const PlanningGraph& g);

// Training data for the reranker: per query, positives are pooled answers and
// negatives the highest-initial-score non-answers, up to negative_ratio times
// as many. Queries whose pool holds no answer are skipped.
std::vector<TrainExample> build_training_set(const RetrievalEngine& engine,
                                             const std::vector<QueryRecord>& queries,
                                             int negative_ratio = 5);

} // namespace tgr
