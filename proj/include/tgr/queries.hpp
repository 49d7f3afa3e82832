#pragma once

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tgr {

struct QueryRecord {
    std::string id;
    std::string text;
    std::set<std::string> answers;         // non-empty for evaluation queries
    std::optional<std::string> gold_plan;  // plan DSL

    bool operator==(const QueryRecord&) const = default;
};

// One JSON object per line: {"id", "text", "answers", "plan"?}. Save emits
// keys in that order with answers sorted, byte-stably.
std::vector<QueryRecord> load_queries(std::istream& in);
void save_queries(const std::vector<QueryRecord>& queries, std::ostream& out);

} // namespace tgr
