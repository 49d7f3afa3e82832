#include "tgr/synth.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "tgr/plan.hpp"
#include "tgr/rng.hpp"
#include "tgr/traversal.hpp"

namespace tgr {

namespace {

std::string compact(const std::string& category) {
    std::string out;
    for (unsigned char c : category)
        if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
    return out;
}

std::string replace_all(std::string text, const std::string& what, const std::string& with) {
    size_t at = 0;
    while ((at = text.find(what, at)) != std::string::npos) {
        text.replace(at, what.size(), with);
        at += with.size();
    }
    return text;
}

struct Builder {
    const SynthConfig& cfg;
    Rng graph_rng;
    Rng query_rng;
    std::vector<NodeRecord> nodes;
    std::vector<EdgeRecord> edges;
    std::unordered_map<std::string, std::vector<std::string>> ids_by_cat;
    std::unordered_map<std::string, std::string> name_token;  // id -> name token
    std::unordered_map<std::string, std::string> group_token; // id -> group token ("" if none)
    std::unordered_map<std::string, size_t> node_index;       // id -> position in nodes

    explicit Builder(const SynthConfig& c)
        : cfg(c), graph_rng(c.seed), query_rng(mix64(c.seed ^ 0x9d2c5680ULL)) {}

    void build_nodes() {
        for (const auto& cat : cfg.categories) {
            if (cat.count < 0) throw std::invalid_argument("negative node count for " + cat.name);
            const std::string base = compact(cat.name);
            for (int i = 0; i < cat.count; ++i) {
                NodeRecord rec;
                rec.id = base + std::to_string(i);
                rec.category = cat.name;
                std::ostringstream doc;
                doc << base; // category marker
                doc << " " << rec.id;
                name_token[rec.id] = rec.id;
                if (cat.groups > 0) {
                    const std::string gtok = "g" + base + std::to_string(i % cat.groups);
                    doc << " " << gtok;
                    group_token[rec.id] = gtok;
                } else {
                    group_token[rec.id] = "";
                }
                for (int n = 0; n < cfg.noise_tokens; ++n)
                    doc << " w"
                        << graph_rng.below(static_cast<uint64_t>(std::max(1, cfg.vocab_size)));
                rec.document = doc.str();
                node_index[rec.id] = nodes.size();
                ids_by_cat[rec.category].push_back(rec.id);
                nodes.push_back(std::move(rec));
            }
        }
    }

    void build_edges() {
        for (const auto& rule : cfg.edges) {
            const auto& from = ids_by_cat[rule.from_cat];
            const auto& to = ids_by_cat[rule.to_cat];
            if (to.empty()) continue;
            for (const auto& src : from) {
                const int want =
                    static_cast<int>(graph_rng.between(rule.min_links, rule.max_links));
                std::set<size_t> picked;
                const size_t limit =
                    std::min<size_t>(static_cast<size_t>(std::max(0, want)), to.size());
                while (picked.size() < limit)
                    picked.insert(static_cast<size_t>(graph_rng.below(to.size())));
                for (size_t idx : picked)
                    edges.push_back({src, to[idx], rule.from_cat + "_" + rule.to_cat});
            }
        }
    }

    void apply_doc_leaks() {
        // Static query-independent text signal. Hash-gated by the knob so a
        // higher setting adds tokens strictly on top of a lower one under the
        // same seed.
        std::unordered_map<std::string, std::vector<std::string>> nbrs;
        for (const auto& e : edges) {
            nbrs[e.src].push_back(e.dst);
            nbrs[e.dst].push_back(e.src);
        }
        for (const auto& leak : cfg.doc_leaks) {
            for (const auto& id : ids_by_cat[leak.cat]) {
                auto it = nbrs.find(id);
                if (it == nbrs.end()) continue;
                std::vector<std::string> sorted = it->second;
                std::sort(sorted.begin(), sorted.end());
                sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
                for (const auto& nb : sorted) {
                    if (nodes[node_index[nb]].category != leak.neighbor_cat) continue;
                    if (unit_hash("leak|" + id + "|" + nb, cfg.seed) < cfg.text_informativeness)
                        nodes[node_index[id]].document += " " + name_token[nb];
                }
            }
        }
    }

    // Walks backwards from the anchor along the path's category sequence;
    // returns the reached head node id, or empty when stuck.
    std::string walk_to_head(const Tgkb& kb, const ReasoningPath& path,
                             const std::string& anchor) {
        std::string cur = anchor;
        for (size_t l = path.nodes.size() - 1; l > 0; --l) {
            const auto& cands = kb.neighbors_of_category(cur, path.nodes[l - 1].category);
            if (cands.empty()) return "";
            cur = cands[static_cast<size_t>(query_rng.below(cands.size()))];
        }
        return cur;
    }

    std::string slot_value(const std::string& head_id, const std::string& attr) {
        if (attr == "name") return name_token.at(head_id);
        if (attr == "group") {
            const auto& g = group_token.at(head_id);
            if (g.empty())
                throw std::invalid_argument(
                    "template requests a group token for an ungrouped category");
            return g;
        }
        throw std::invalid_argument("unknown template slot attribute: " + attr);
    }
};

struct SlotRef {
    std::string placeholder; // "{Category.attr}"
    std::string category;
    std::string attr;
};

std::vector<SlotRef> find_slots(const std::string& text) {
    std::vector<SlotRef> out;
    size_t at = 0;
    while ((at = text.find('{', at)) != std::string::npos) {
        size_t close = text.find('}', at);
        if (close == std::string::npos) break;
        std::string body = text.substr(at + 1, close - at - 1);
        size_t dot = body.find('.');
        if (dot != std::string::npos)
            out.push_back(
                {text.substr(at, close - at + 1), body.substr(0, dot), body.substr(dot + 1)});
        at = close + 1;
    }
    return out;
}

} // namespace

SynthOutput synth_generate(const SynthConfig& cfg) {
    if (cfg.templates.empty()) throw std::invalid_argument("synth config needs templates");
    for (const auto& t : cfg.templates) {
        auto parsed = parse_plan(t.plan_skeleton);
        if (!parsed.ok())
            throw std::invalid_argument("bad template skeleton '" + t.plan_skeleton +
                                        "': " + parsed.reason());
        for (const auto& p : parsed.graph().paths()) {
            for (size_t i = 1; i < p.nodes.size(); ++i) {
                if (p.nodes[i].restriction &&
                    p.nodes[i].restriction->find('{') != std::string::npos)
                    throw std::invalid_argument(
                        "template restriction slots are only allowed on path heads: " +
                        t.plan_skeleton);
            }
        }
    }

    Builder b(cfg);
    b.build_nodes();
    b.build_edges();
    b.apply_doc_leaks();

    // Answer sets depend only on restriction matching against head-category
    // documents, which the per-query marker injection below never touches, so
    // this intermediate build already fixes them.
    Tgkb kb = Tgkb::from_records(b.nodes, b.edges);

    SynthOutput out;
    std::vector<std::pair<std::string, std::string>> marker_injections; // (node id, token)

    for (int qi = 0; qi < cfg.n_queries; ++qi) {
        const std::string qid = "q" + std::to_string(qi);
        bool emitted = false;
        for (int attempt = 0; attempt < cfg.max_resample && !emitted; ++attempt) {
            const auto& tmpl =
                cfg.templates[static_cast<size_t>(b.query_rng.below(cfg.templates.size()))];
            auto skeleton = parse_plan(tmpl.plan_skeleton);
            const std::string target_cat = skeleton.graph().target_category();
            const auto& anchors = kb.nodes_in_category(target_cat);
            if (anchors.empty()) break;
            const std::string anchor =
                anchors[static_cast<size_t>(b.query_rng.below(anchors.size()))];

            std::map<std::string, std::string> resolved; // placeholder -> value
            std::vector<ReasoningPath> paths = skeleton.graph().paths();
            bool ok = true;
            for (auto& path : paths) {
                std::string head =
                    path.nodes.size() == 1 ? anchor : b.walk_to_head(kb, path, anchor);
                if (head.empty()) {
                    ok = false;
                    break;
                }
                auto& head_node = path.nodes.front();
                if (head_node.restriction) {
                    std::string restr = *head_node.restriction;
                    for (const auto& slot : find_slots(restr)) {
                        const std::string value = b.slot_value(head, slot.attr);
                        restr = replace_all(restr, slot.placeholder, value);
                        resolved[slot.placeholder] = value;
                    }
                    head_node.restriction = restr;
                }
            }
            if (!ok) continue;

            PlanningGraph plan = PlanningGraph::make(std::move(paths));
            auto answers = brute_force_retrieve(kb, plan);
            if (answers.empty()) continue; // unsatisfiable instantiation

            std::string text = tmpl.query_text;
            for (const auto& [placeholder, value] : resolved)
                text = replace_all(text, placeholder, value);
            text = replace_all(text, "{q}", qid);

            for (const auto& ans : answers) {
                if (unit_hash("qa|" + qid + "|" + ans, cfg.seed) < cfg.text_informativeness)
                    marker_injections.emplace_back(ans, qid);
            }

            QueryRecord rec;
            rec.id = qid;
            rec.text = text;
            rec.answers = std::move(answers);
            rec.gold_plan = serialize_plan(plan);
            out.queries.push_back(std::move(rec));
            emitted = true;
        }
        if (!emitted)
            out.warnings.push_back("query " + qid + " skipped: no satisfiable instantiation");
    }

    for (const auto& [id, token] : marker_injections)
        b.nodes[b.node_index[id]].document += " " + token;

    out.kb = Tgkb::from_records(std::move(b.nodes), std::move(b.edges));
    return out;
}

SynthConfig synth_small_config(uint64_t seed, int n_queries) {
    SynthConfig cfg;
    cfg.categories = {{"Institution", 24, 8},
                      {"Author", 110, 0},
                      {"Paper", 280, 0},
                      {"Field-of-Study", 30, 0}};
    cfg.edges = {{"Author", "Institution", 1, 1},
                 {"Paper", "Author", 1, 2},
                 {"Paper", "Field-of-Study", 1, 2}};
    cfg.doc_leaks = {{"Paper", "Field-of-Study"}};
    cfg.templates = {
        {"Institution<{Institution.group}> -> Author -> Paper",
         "papers written by authors from {Institution.group} institutions {q}"},
        {"Institution<{Institution.group}> -> Author -> Paper ; "
         "Field-of-Study<{Field-of-Study.name}> -> Paper",
         "papers from {Institution.group} institutions about {Field-of-Study.name} {q}"},
        {"Field-of-Study<{Field-of-Study.name}> -> Paper",
         "papers in the field {Field-of-Study.name} {q}"},
        {"Institution<{Institution.name}> -> Author -> Paper",
         "papers written by {Institution.name} authors {q}"}};
    cfg.vocab_size = 160;
    cfg.noise_tokens = 3;
    cfg.n_queries = n_queries;
    cfg.text_informativeness = 0.3;
    cfg.seed = seed;
    return cfg;
}

SynthConfig synth_benchmark_config(uint64_t seed, double text_informativeness, int n_queries) {
    SynthConfig cfg;
    cfg.categories = {{"Institution", 700, 100},
                      {"Author", 2800, 0},
                      {"Paper", 6000, 0},
                      {"Field-of-Study", 500, 0}};
    cfg.edges = {{"Author", "Institution", 1, 1},
                 {"Paper", "Author", 1, 2},
                 {"Paper", "Field-of-Study", 1, 2}};
    cfg.doc_leaks = {{"Paper", "Field-of-Study"}};
    cfg.templates = {
        {"Institution<{Institution.group}> -> Author -> Paper",
         "papers written by authors from {Institution.group} institutions {q}"},
        {"Institution<{Institution.group}> -> Author -> Paper ; "
         "Field-of-Study<{Field-of-Study.name}> -> Paper",
         "papers from {Institution.group} institutions about {Field-of-Study.name} {q}"},
        {"Field-of-Study<{Field-of-Study.name}> -> Paper",
         "papers in the field {Field-of-Study.name} {q}"}};
    cfg.vocab_size = 900;
    cfg.noise_tokens = 4;
    cfg.n_queries = n_queries;
    cfg.text_informativeness = text_informativeness;
    cfg.seed = seed;
    return cfg;
}

} // namespace tgr
