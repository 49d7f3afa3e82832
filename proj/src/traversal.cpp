#include "tgr/traversal.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace tgr {

const char* step_kind_name(StepKind k) {
    switch (k) {
        case StepKind::Structural: return "structural";
        case StepKind::Textual: return "textual";
        case StepKind::Seed: return "seed";
    }
    return "?";
}

size_t Trajectory::structural_steps() const {
    size_t n = 0;
    for (const auto& s : steps)
        if (s.kind == StepKind::Structural) ++n;
    return n;
}

bool trajectory_preferred(const Trajectory& a, const Trajectory& b) {
    if (a.steps.size() != b.steps.size()) return a.steps.size() > b.steps.size();
    if (a.structural_steps() != b.structural_steps())
        return a.structural_steps() > b.structural_steps();
    for (size_t i = 0; i < a.steps.size(); ++i) {
        if (a.steps[i].node != b.steps[i].node) return a.steps[i].node < b.steps[i].node;
    }
    // Same node sequence; fall through to kind order for a stable choice.
    for (size_t i = 0; i < a.steps.size(); ++i) {
        if (a.steps[i].kind != b.steps[i].kind)
            return static_cast<int>(a.steps[i].kind) < static_cast<int>(b.steps[i].kind);
    }
    return false;
}

namespace {

void merge_candidate(CandidateSet& into, const std::string& id, Trajectory traj) {
    auto it = into.find(id);
    if (it == into.end()) {
        into.emplace(id, std::move(traj));
    } else if (trajectory_preferred(traj, it->second)) {
        it->second = std::move(traj);
    }
}

void merge_sets(CandidateSet& into, const CandidateSet& from) {
    for (const auto& [id, traj] : from) merge_candidate(into, id, traj);
}

std::string expanded_query(const std::string& query, const std::optional<std::string>& restriction) {
    if (!restriction || restriction->empty()) return query;
    return query + " " + *restriction;
}

} // namespace

bool document_matches_restriction(const std::string& document, const std::string& restriction) {
    auto doc_tokens = tokenize(document);
    std::unordered_set<std::string> have(doc_tokens.begin(), doc_tokens.end());
    for (const auto& t : distinct_tokens(restriction)) {
        if (!have.count(t)) return false;
    }
    return true;
}

CandidateSet expand_structural(const Tgkb& kb, const CandidateSet& prev,
                               const std::string& category,
                               const std::optional<std::string>& restriction) {
    CandidateSet out;
    // prev iterates in ascending id order, so the first parent reaching a
    // child is the smallest-id parent.
    for (const auto& [parent_id, parent_traj] : prev) {
        for (const auto& u : kb.neighbors_of_category(parent_id, category)) {
            if (out.count(u)) continue;
            Trajectory traj = parent_traj;
            traj.steps.push_back({u, category, StepKind::Structural, restriction});
            out.emplace(u, std::move(traj));
        }
    }
    return out;
}

CandidateSet expand_textual(const Tgkb& kb, const TextScorer& scorer, const std::string& query,
                            const std::optional<std::string>& restriction,
                            const std::string& category, int t, StepKind kind, int path_index) {
    CandidateSet out;
    if (t < 1) return out;
    for (const auto& sn : topk_by_category(kb, scorer, expanded_query(query, restriction),
                                           category, t)) {
        if (sn.score <= 0.0) continue; // no overlap means no textual match
        Trajectory traj;
        traj.path_index = path_index;
        traj.steps.push_back({sn.id, category, kind, restriction});
        out.emplace(sn.id, std::move(traj));
    }
    return out;
}

namespace {

CandidateSet full_restricted_seeds(const Tgkb& kb, const PathNode& head, int path_index) {
    CandidateSet out;
    for (const auto& id : kb.nodes_in_category(head.category)) {
        if (head.restriction &&
            !document_matches_restriction(kb.node(id).document, *head.restriction))
            continue;
        Trajectory traj;
        traj.path_index = path_index;
        traj.steps.push_back({id, head.category, StepKind::Seed, head.restriction});
        out.emplace(id, std::move(traj));
    }
    return out;
}

} // namespace

CandidateSet traverse_path(const Tgkb& kb, const TextScorer& scorer, const std::string& query,
                           const ReasoningPath& path, const TraversalConfig& cfg, int path_index,
                           std::vector<LayerTrace>* trace,
                           std::vector<CandidateSet>* layer_debug) {
    const auto& head = path.nodes.front();
    CandidateSet layer =
        cfg.full_restricted_seeding
            ? full_restricted_seeds(kb, head, path_index)
            : expand_textual(kb, scorer, query, head.restriction, head.category, cfg.n_seeds,
                             StepKind::Seed, path_index);
    if (trace) trace->push_back({path_index, 1, 0, layer.size(), layer.size()});
    if (layer_debug) layer_debug->push_back(layer);

    for (size_t l = 1; l < path.nodes.size(); ++l) {
        const auto& step_node = path.nodes[l];
        CandidateSet merged;
        size_t structural_count = 0;
        if (cfg.enable_structural) {
            merged = expand_structural(kb, layer, step_node.category, step_node.restriction);
            for (auto& [id, traj] : merged) traj.path_index = path_index;
            structural_count = merged.size();
        }
        CandidateSet textual = expand_textual(kb, scorer, query, step_node.restriction,
                                              step_node.category, cfg.per_layer_text,
                                              StepKind::Textual, path_index);
        size_t textual_count = textual.size();
        merge_sets(merged, textual);
        if (trace)
            trace->push_back({path_index, static_cast<int>(l + 1), structural_count,
                              textual_count, merged.size()});
        if (layer_debug) layer_debug->push_back(merged);
        layer = std::move(merged);
    }
    return layer;
}

TraversalResult mixed_traverse(const Tgkb& kb, const TextScorer& scorer, const std::string& query,
                               const PlanOutcome& plan, const TraversalConfig& cfg) {
    TraversalResult result;
    if (!plan.ok()) {
        // Plan-free fallback: textual matching over all nodes, no category filter.
        for (const auto& sn : topk_all(kb, scorer, query, cfg.fallback_k)) {
            if (sn.score <= 0.0) continue;
            Trajectory traj;
            traj.steps.push_back(
                {sn.id, kb.node(sn.id).category, StepKind::Textual, std::nullopt});
            result.candidates.emplace(sn.id, std::move(traj));
        }
        result.fallback = true;
        return result;
    }

    const auto& paths = plan.graph().paths();
    std::vector<CandidateSet> per_path;
    per_path.reserve(paths.size());
    for (size_t i = 0; i < paths.size(); ++i) {
        per_path.push_back(traverse_path(kb, scorer, query, paths[i], cfg,
                                         static_cast<int>(i), &result.trace));
    }

    // Intersection of per-path key sets; each survivor keeps its most
    // informative trajectory across paths.
    CandidateSet intersection;
    for (const auto& [id, traj] : per_path.front()) {
        bool everywhere = true;
        for (size_t i = 1; i < per_path.size(); ++i) {
            if (!per_path[i].count(id)) {
                everywhere = false;
                break;
            }
        }
        if (!everywhere) continue;
        Trajectory best = traj;
        for (size_t i = 1; i < per_path.size(); ++i) {
            const auto& other = per_path[i].at(id);
            if (trajectory_preferred(other, best)) best = other;
        }
        intersection.emplace(id, std::move(best));
    }

    if (intersection.empty()) {
        // No candidate satisfies every path; degrade to the union so the
        // organizing stage still has material to rank. Flagged for slicing.
        for (const auto& set : per_path) merge_sets(result.candidates, set);
        result.fallback = true;
        result.degraded_union = true;
    } else {
        result.candidates = std::move(intersection);
    }
    return result;
}

std::set<std::string> brute_force_retrieve(const Tgkb& kb, const PlanningGraph& plan) {
    std::set<std::string> out;
    bool first = true;
    for (const auto& path : plan.paths()) {
        std::set<std::string> layer;
        const auto& head = path.nodes.front();
        for (const auto& id : kb.nodes_in_category(head.category)) {
            if (!head.restriction ||
                document_matches_restriction(kb.node(id).document, *head.restriction))
                layer.insert(id);
        }
        for (size_t l = 1; l < path.nodes.size(); ++l) {
            const auto& step = path.nodes[l];
            std::set<std::string> next;
            for (const auto& v : layer) {
                for (const auto& u : kb.neighbors_of_category(v, step.category)) {
                    if (!step.restriction ||
                        document_matches_restriction(kb.node(u).document, *step.restriction))
                        next.insert(u);
                }
            }
            layer = std::move(next);
        }
        if (first) {
            out = std::move(layer);
            first = false;
        } else {
            std::set<std::string> kept;
            std::set_intersection(out.begin(), out.end(), layer.begin(), layer.end(),
                                  std::inserter(kept, kept.begin()));
            out = std::move(kept);
        }
    }
    return out;
}

} // namespace tgr
