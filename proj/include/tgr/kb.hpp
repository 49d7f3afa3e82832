#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace tgr {

// Text-rich graph knowledge base: nodes carry a category label and a text
// document; edges are undirected for traversal, with the relation label
// preserved as written. Immutable once built and safe to share read-only
// across threads.

struct NodeRecord {
    std::string id;
    std::string category;
    std::string document; // may be empty, never absent
    std::map<std::string, std::string> metadata;

    bool operator==(const NodeRecord&) const = default;
};

struct EdgeRecord {
    std::string src;
    std::string dst;
    std::string relation; // may be empty

    auto operator<=>(const EdgeRecord&) const = default;
};

struct ValidationReport {
    std::vector<std::string> isolated_nodes;   // no neighbors at all
    std::vector<std::string> empty_documents;  // document is ""
    std::map<std::string, size_t> category_counts;

    bool operator==(const ValidationReport&) const = default;
};

class Tgkb {
public:
    Tgkb() = default;

    // Line-delimited JSON sources (see save() for the exact format). Throws
    // std::runtime_error on malformed lines (with line number), duplicate
    // node ids, or edges referencing unknown ids.
    static Tgkb load(std::istream& nodes_source, std::istream& edges_source);

    // Build from in-memory records under the same validation rules.
    static Tgkb from_records(std::vector<NodeRecord> nodes, std::vector<EdgeRecord> edges);

    bool contains(const std::string& id) const { return nodes_.count(id) != 0; }
    const NodeRecord& node(const std::string& id) const; // throws on unknown id
    size_t node_count() const { return nodes_.size(); }
    size_t edge_count() const { return edges_.size(); }

    // Neighbors of v whose category is c, sorted ascending. Throws on unknown
    // node id; an id/category pair with no neighbors yields an empty list.
    const std::vector<std::string>& neighbors_of_category(const std::string& id,
                                                          const std::string& category) const;

    // All neighbors of v regardless of category, sorted ascending.
    std::vector<std::string> neighbors(const std::string& id) const;

    // Node ids of one category, sorted ascending; empty for unknown categories.
    const std::vector<std::string>& nodes_in_category(const std::string& category) const;

    const std::vector<std::string>& ids() const { return ids_; } // all ids, sorted
    const std::set<std::string>& schema() const { return schema_; }
    const std::vector<EdgeRecord>& edges() const { return edges_; }

    ValidationReport validate() const;

    // Byte-stable canonical emit: node lines sorted by id with keys
    // id/category/text/meta, edge lines sorted by (src,dst,rel) with keys
    // src/dst/rel. load(save(kb)) reproduces the same content.
    void save(std::ostream& nodes_out, std::ostream& edges_out) const;

private:
    std::unordered_map<std::string, NodeRecord> nodes_;
    std::vector<std::string> ids_;
    // node id -> category -> sorted neighbor ids
    std::unordered_map<std::string, std::map<std::string, std::vector<std::string>>> adjacency_;
    std::map<std::string, std::vector<std::string>> category_index_;
    std::set<std::string> schema_;
    std::vector<EdgeRecord> edges_; // deduplicated, sorted by (src,dst,rel)
};

// Operation-style aliases used throughout the pipeline code.
Tgkb load_kb(std::istream& nodes_source, std::istream& edges_source);
ValidationReport validate_kb(const Tgkb& kb);

} // namespace tgr
