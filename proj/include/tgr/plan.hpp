#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tgr/kb.hpp"

namespace tgr {

// Planning graphs: a query's logic as one or more reasoning paths, each an
// ordered category chain ending at the target category, with optional textual
// restrictions on individual nodes.
//
// Concrete syntax: paths separated by ";", nodes by "->", restriction in
// "<...>" immediately after its category. "\<", "\>", "\;" (and "\\", "\-")
// escape literal characters. "<-" reverses an arrow; parse normalizes every
// path to read source -> ... -> target, splitting converging chains like
// "A -> C <- B" into the two paths A->C and B->C.

struct PathNode {
    std::string category;
    std::optional<std::string> restriction;

    auto operator<=>(const PathNode&) const = default;
};

struct ReasoningPath {
    std::vector<PathNode> nodes; // length >= 1; last node is the target

    const PathNode& target() const { return nodes.back(); }
    auto operator<=>(const ReasoningPath&) const = default;
};

class PlanningGraph {
public:
    // Canonicalizes: deduplicates paths and sorts them by serialized form.
    // Throws std::invalid_argument when empty or when the paths disagree on
    // the target category.
    static PlanningGraph make(std::vector<ReasoningPath> paths);

    const std::vector<ReasoningPath>& paths() const { return paths_; }
    const std::string& target_category() const { return paths_.front().target().category; }

    bool operator==(const PlanningGraph&) const = default;

private:
    std::vector<ReasoningPath> paths_;
};

struct PlanOutcome {
    static PlanOutcome valid(PlanningGraph g) {
        PlanOutcome o;
        o.graph_ = std::move(g);
        return o;
    }
    static PlanOutcome invalid(std::string reason) {
        PlanOutcome o;
        o.reason_ = std::move(reason);
        return o;
    }

    bool ok() const { return graph_.has_value(); }
    const PlanningGraph& graph() const { return *graph_; }
    const std::string& reason() const { return reason_; }

private:
    std::optional<PlanningGraph> graph_;
    std::string reason_; // non-empty iff invalid
};

// Never throws; every syntax violation maps to an Invalid outcome.
PlanOutcome parse_plan(std::string_view text);

// Canonical DSL text: paths sorted lexicographically, single spaces around
// "->" and ";". parse_plan(serialize_plan(g)) reproduces g exactly.
std::string serialize_plan(const PlanningGraph& g);
std::string serialize_path(const ReasoningPath& p);

// Escapes '\', '<', '>', ';' and any '-' that would otherwise form an arrow.
std::string escape_plan_text(std::string_view raw);

// Invalid when any category is missing from the KB schema or any path is
// longer than max_path_len.
PlanOutcome validate_plan(const PlanningGraph& g, const Tgkb& kb, size_t max_path_len = 3);

// Pattern with {name} capture slots paired with a plan skeleton whose
// restrictions may reference the same slots.
struct TemplateRule {
    std::string pattern;
    std::string plan_skeleton;
};

// First rule whose pattern matches the query instantiates its skeleton with
// the captured spans; Invalid when nothing matches.
PlanOutcome plan_template(const std::string& query, const std::vector<TemplateRule>& rules);

} // namespace tgr
