#include "tgr/kb.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace tgr {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void malformed(const char* which, size_t line_no, const std::string& detail) {
    throw std::runtime_error(std::string("malformed ") + which + " line " +
                             std::to_string(line_no) + ": " + detail);
}

NodeRecord parse_node_line(const std::string& line, size_t line_no) {
    auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) malformed("node", line_no, "not a JSON object");
    if (!j.contains("id") || !j["id"].is_string()) malformed("node", line_no, "missing string 'id'");
    if (!j.contains("category") || !j["category"].is_string())
        malformed("node", line_no, "missing string 'category'");
    if (!j.contains("text") || !j["text"].is_string())
        malformed("node", line_no, "missing string 'text'");

    NodeRecord rec;
    rec.id = j["id"].get<std::string>();
    rec.category = j["category"].get<std::string>();
    rec.document = j["text"].get<std::string>();
    if (rec.id.empty()) malformed("node", line_no, "empty id");
    if (rec.category.empty()) malformed("node", line_no, "empty category");
    if (j.contains("meta")) {
        if (!j["meta"].is_object()) malformed("node", line_no, "'meta' must be an object");
        for (auto& [k, v] : j["meta"].items()) {
            if (!v.is_string()) malformed("node", line_no, "meta values must be strings");
            rec.metadata[k] = v.get<std::string>();
        }
    }
    return rec;
}

EdgeRecord parse_edge_line(const std::string& line, size_t line_no) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) malformed("edge", line_no, "not a JSON object");
    if (!j.contains("src") || !j["src"].is_string()) malformed("edge", line_no, "missing string 'src'");
    if (!j.contains("dst") || !j["dst"].is_string()) malformed("edge", line_no, "missing string 'dst'");
    EdgeRecord e;
    e.src = j["src"].get<std::string>();
    e.dst = j["dst"].get<std::string>();
    if (j.contains("rel")) {
        if (!j["rel"].is_string()) malformed("edge", line_no, "'rel' must be a string");
        e.relation = j["rel"].get<std::string>();
    }
    return e;
}

bool blank(const std::string& s) {
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

} // namespace

Tgkb Tgkb::load(std::istream& nodes_source, std::istream& edges_source) {
    std::vector<NodeRecord> nodes;
    std::vector<EdgeRecord> edges;
    std::string line;
    size_t line_no = 0;
    while (std::getline(nodes_source, line)) {
        ++line_no;
        if (blank(line)) continue;
        nodes.push_back(parse_node_line(line, line_no));
    }
    line_no = 0;
    while (std::getline(edges_source, line)) {
        ++line_no;
        if (blank(line)) continue;
        edges.push_back(parse_edge_line(line, line_no));
    }
    return from_records(std::move(nodes), std::move(edges));
}

Tgkb Tgkb::from_records(std::vector<NodeRecord> nodes, std::vector<EdgeRecord> edges) {
    Tgkb kb;
    for (auto& n : nodes) {
        if (n.id.empty()) throw std::runtime_error("empty node id");
        if (n.category.empty()) throw std::runtime_error("empty category for node " + n.id);
        auto [it, inserted] = kb.nodes_.emplace(n.id, std::move(n));
        if (!inserted) throw std::runtime_error("duplicate node id: " + it->first);
    }
    for (auto& [id, rec] : kb.nodes_) {
        kb.ids_.push_back(id);
        kb.category_index_[rec.category].push_back(id);
        kb.schema_.insert(rec.category);
    }
    std::sort(kb.ids_.begin(), kb.ids_.end());
    for (auto& [cat, list] : kb.category_index_) std::sort(list.begin(), list.end());

    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (const auto& e : edges) {
        if (!kb.contains(e.src)) throw std::runtime_error("unknown node id in edge: " + e.src);
        if (!kb.contains(e.dst)) throw std::runtime_error("unknown node id in edge: " + e.dst);
        kb.adjacency_[e.src][kb.nodes_.at(e.dst).category].push_back(e.dst);
        if (e.src != e.dst)
            kb.adjacency_[e.dst][kb.nodes_.at(e.src).category].push_back(e.src);
    }
    for (auto& [id, buckets] : kb.adjacency_) {
        for (auto& [cat, list] : buckets) {
            std::sort(list.begin(), list.end());
            list.erase(std::unique(list.begin(), list.end()), list.end());
        }
    }
    kb.edges_ = std::move(edges);
    return kb;
}

const NodeRecord& Tgkb::node(const std::string& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw std::runtime_error("unknown node id: " + id);
    return it->second;
}

const std::vector<std::string>& Tgkb::neighbors_of_category(const std::string& id,
                                                            const std::string& category) const {
    static const std::vector<std::string> empty;
    if (!contains(id)) throw std::runtime_error("unknown node id: " + id);
    auto it = adjacency_.find(id);
    if (it == adjacency_.end()) return empty;
    auto jt = it->second.find(category);
    if (jt == it->second.end()) return empty;
    return jt->second;
}

std::vector<std::string> Tgkb::neighbors(const std::string& id) const {
    if (!contains(id)) throw std::runtime_error("unknown node id: " + id);
    std::vector<std::string> out;
    auto it = adjacency_.find(id);
    if (it == adjacency_.end()) return out;
    for (const auto& [cat, list] : it->second) out.insert(out.end(), list.begin(), list.end());
    std::sort(out.begin(), out.end());
    return out;
}

const std::vector<std::string>& Tgkb::nodes_in_category(const std::string& category) const {
    static const std::vector<std::string> empty;
    auto it = category_index_.find(category);
    return it == category_index_.end() ? empty : it->second;
}

ValidationReport Tgkb::validate() const {
    ValidationReport rep;
    for (const auto& id : ids_) {
        const auto& rec = nodes_.at(id);
        rep.category_counts[rec.category]++;
        if (rec.document.empty()) rep.empty_documents.push_back(id);
        auto it = adjacency_.find(id);
        if (it == adjacency_.end() || it->second.empty()) rep.isolated_nodes.push_back(id);
    }
    return rep;
}

void Tgkb::save(std::ostream& nodes_out, std::ostream& edges_out) const {
    for (const auto& id : ids_) {
        const auto& rec = nodes_.at(id);
        ordered_json j;
        j["id"] = rec.id;
        j["category"] = rec.category;
        j["text"] = rec.document;
        if (!rec.metadata.empty()) {
            ordered_json meta;
            for (const auto& [k, v] : rec.metadata) meta[k] = v;
            j["meta"] = meta;
        }
        nodes_out << j.dump() << '\n';
    }
    for (const auto& e : edges_) { // already sorted by (src,dst,rel)
        ordered_json j;
        j["src"] = e.src;
        j["dst"] = e.dst;
        if (!e.relation.empty()) j["rel"] = e.relation;
        edges_out << j.dump() << '\n';
    }
}

Tgkb load_kb(std::istream& nodes_source, std::istream& edges_source) {
    return Tgkb::load(nodes_source, edges_source);
}

ValidationReport validate_kb(const Tgkb& kb) { return kb.validate(); }

} // namespace tgr
