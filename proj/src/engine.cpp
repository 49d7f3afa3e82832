#include "tgr/engine.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace tgr {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoRerank: return "no_rerank";
        case Variant::NoText: return "no_text";
        case Variant::NoStruct: return "no_struct";
        case Variant::Oracle: return "oracle";
    }
    return "?";
}

std::optional<Variant> variant_from_name(const std::string& name) {
    if (name == "full") return Variant::Full;
    if (name == "no_rerank") return Variant::NoRerank;
    if (name == "no_text") return Variant::NoText;
    if (name == "no_struct") return Variant::NoStruct;
    if (name == "oracle") return Variant::Oracle;
    return std::nullopt;
}

std::string plan_signature(const PlanningGraph& g) {
    std::string out;
    for (size_t i = 0; i < g.paths().size(); ++i) {
        if (i > 0) out += ";";
        const auto& nodes = g.paths()[i].nodes;
        for (size_t j = 0; j < nodes.size(); ++j) {
            if (j > 0) out += "->";
            out += nodes[j].category;
        }
    }
    return out;
}

PlanOutcome RetrievalEngine::make_plan(const QueryRecord& q) const {
    PlanOutcome outcome = PlanOutcome::invalid("no plan source");
    if (q.gold_plan) {
        outcome = parse_plan(*q.gold_plan);
    } else {
        switch (setup_.planner.mode) {
            case PlannerSetup::Mode::Gold:
                outcome = PlanOutcome::invalid("no gold plan attached to query " + q.id);
                break;
            case PlannerSetup::Mode::Template:
                outcome = plan_template(q.text, setup_.planner.rules);
                break;
            case PlannerSetup::Mode::Llm: {
                if (!setup_.planner.endpoint) {
                    outcome = PlanOutcome::invalid("no planner endpoint configured");
                    break;
                }
                std::vector<std::string> schema(kb_->schema().begin(), kb_->schema().end());
                outcome = plan_llm(q.text, *setup_.planner.endpoint, schema,
                                   setup_.planner.demos);
                break;
            }
        }
    }
    if (!outcome.ok()) return outcome;
    return validate_plan(outcome.graph(), *kb_, setup_.max_path_len);
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

QueryRun RetrievalEngine::run(const QueryRecord& q, Variant variant, const RerankerModel* model,
                              const FeatureMask& mask) const {
    QueryRun out;
    out.plan = make_plan(q);
    out.pattern = out.plan.ok() ? plan_signature(out.plan.graph()) : "(fallback)";

    TraversalConfig tcfg = setup_.traversal;
    if (variant == Variant::NoText) tcfg.per_layer_text = 0;
    if (variant == Variant::NoStruct) tcfg.enable_structural = false;

    const auto t0 = std::chrono::steady_clock::now();
    TraversalResult tr = mixed_traverse(*kb_, *scorer_, q.text, out.plan, tcfg);
    out.reasoning_seconds = seconds_since(t0);
    out.fallback = tr.fallback;
    out.degraded_union = tr.degraded_union;
    out.trace = std::move(tr.trace);

    const auto t1 = std::chrono::steady_clock::now();

    if (variant == Variant::Oracle) {
        if (!out.plan.ok())
            throw std::runtime_error("oracle ranking needs a valid plan for query " + q.id);
        for (const auto& id : brute_force_retrieve(*kb_, out.plan.graph()))
            out.ranking.push_back({id, 0.0, 0.0});
        out.organizing_seconds = seconds_since(t1);
        return out;
    }

    // Initial semantic score selects the rerank pool (and is itself the
    // ranking when no reranker runs).
    std::vector<std::string> ids;
    ids.reserve(tr.candidates.size());
    for (const auto& [id, traj] : tr.candidates) ids.push_back(id);
    const auto initial = semantic_->score_many(q.text, ids);

    std::vector<ScoredNode> by_initial;
    by_initial.reserve(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) by_initial.push_back({ids[i], initial[i]});
    std::sort(by_initial.begin(), by_initial.end(), scored_before);
    if (by_initial.size() > static_cast<size_t>(tcfg.rerank_pool))
        by_initial.resize(static_cast<size_t>(tcfg.rerank_pool));

    const bool use_model = variant == Variant::Full;
    if (use_model && model == nullptr)
        throw std::runtime_error("reranker model required for the full pipeline");

    std::vector<PoolEntry> pool;
    pool.reserve(by_initial.size());
    for (const auto& sn : by_initial) {
        const Trajectory& traj = tr.candidates.at(sn.id);
        out.pool.emplace(sn.id, traj);
        if (use_model) {
            pool.push_back({sn.id, extract_features(traj, q.text, *scorer_, sn.score), sn.score});
        } else {
            out.ranking.push_back({sn.id, sn.score, sn.score});
        }
    }
    if (use_model) out.ranking = rerank(*model, pool, pool.size(), mask);

    out.final_kinds.reserve(out.ranking.size());
    for (const auto& rc : out.ranking)
        out.final_kinds.push_back(out.pool.at(rc.id).steps.back().kind);
    out.organizing_seconds = seconds_since(t1);
    return out;
}

std::vector<TrainExample> build_training_set(const RetrievalEngine& engine,
                                             const std::vector<QueryRecord>& queries,
                                             int negative_ratio) {
    std::vector<TrainExample> out;
    for (const auto& q : queries) {
        QueryRun run = engine.run(q, Variant::NoRerank);
        size_t positives = 0;
        for (const auto& rc : run.ranking)
            if (q.answers.count(rc.id)) ++positives;
        if (positives == 0) continue;

        const size_t max_neg = positives * static_cast<size_t>(std::max(1, negative_ratio));
        size_t negatives = 0;
        for (const auto& rc : run.ranking) { // already ordered by initial score
            const bool is_answer = q.answers.count(rc.id) != 0;
            if (!is_answer && negatives >= max_neg) continue;
            if (!is_answer) ++negatives;
            TrainExample ex;
            ex.query_id = q.id;
            ex.features = extract_features(run.pool.at(rc.id), q.text, engine.scorer(),
                                           rc.initial_score);
            ex.label = is_answer ? 1 : 0;
            out.push_back(std::move(ex));
        }
    }
    return out;
}

} // namespace tgr
