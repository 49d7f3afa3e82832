#include "tgr/plan.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <stdexcept>

namespace tgr {

namespace {

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

struct ParseError {
    std::string reason;
};

[[noreturn]] void fail(std::string reason) { throw ParseError{std::move(reason)}; }

// Splits on unescaped ';'. A backslash escapes the next character.
std::vector<std::string> split_path_exprs(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) {
            cur.push_back(text[i]);
            cur.push_back(text[i + 1]);
            ++i;
        } else if (text[i] == ';') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(text[i]);
        }
    }
    out.push_back(cur);
    return out;
}

struct ChainNode {
    std::string category;
    std::optional<std::string> restriction;
};

enum class Arrow { Forward, Backward };

// One ";"-delimited expression: node (arrow node)*, arrows may point either
// way. Escape handling: '\' makes the following character literal.
void parse_chain(std::string_view expr, std::vector<ChainNode>& nodes, std::vector<Arrow>& arrows) {
    size_t pos = 0;
    auto skip_ws = [&] {
        while (pos < expr.size() && std::isspace(static_cast<unsigned char>(expr[pos]))) ++pos;
    };
    auto at_forward_arrow = [&] {
        return pos + 1 < expr.size() && expr[pos] == '-' && expr[pos + 1] == '>';
    };
    auto at_backward_arrow = [&] {
        return pos + 1 < expr.size() && expr[pos] == '<' && expr[pos + 1] == '-';
    };

    while (true) {
        skip_ws();
        if (pos >= expr.size()) {
            if (nodes.empty()) fail("empty path");
            fail("dangling arrow");
        }
        if (at_forward_arrow() || at_backward_arrow()) fail("dangling arrow");

        // Category text runs until an arrow or a restriction opens. '<'
        // directly after a category character opens a restriction; '<'
        // preceded by whitespace can only begin a "<-" arrow.
        ChainNode node;
        std::string cat;
        bool restriction_done = false;
        while (pos < expr.size()) {
            char c = expr[pos];
            if (c == '\\') {
                cat.push_back(pos + 1 < expr.size() ? expr[pos + 1] : '\\');
                pos += pos + 1 < expr.size() ? 2 : 1;
                continue;
            }
            if (at_forward_arrow()) break;
            if (c == '<') {
                bool after_space = trim(cat).empty() ||
                                   (pos > 0 && std::isspace(static_cast<unsigned char>(expr[pos - 1])));
                if (at_backward_arrow() && after_space && !trim(cat).empty()) break;
                if (at_backward_arrow() && trim(cat).empty()) fail("dangling arrow");
                // restriction body
                ++pos;
                std::string restr;
                bool closed = false;
                while (pos < expr.size()) {
                    if (expr[pos] == '\\' && pos + 1 < expr.size()) {
                        restr.push_back(expr[pos + 1]);
                        pos += 2;
                    } else if (expr[pos] == '>') {
                        ++pos;
                        closed = true;
                        break;
                    } else {
                        restr.push_back(expr[pos]);
                        ++pos;
                    }
                }
                if (!closed) fail("unterminated restriction");
                std::string trimmed = trim(restr);
                if (trimmed.empty()) fail("empty restriction");
                node.restriction = trimmed;
                restriction_done = true;
                // Only whitespace may separate a closed restriction from the
                // next arrow or the end of the expression.
                skip_ws();
                if (pos < expr.size() && !at_forward_arrow() && !at_backward_arrow())
                    fail("unexpected text after restriction");
                break;
            }
            cat.push_back(c);
            ++pos;
        }
        node.category = trim(cat);
        if (node.category.empty()) fail(restriction_done ? "empty category" : "empty path");
        nodes.push_back(std::move(node));

        skip_ws();
        if (pos >= expr.size()) return;
        if (at_forward_arrow()) {
            arrows.push_back(Arrow::Forward);
            pos += 2;
        } else if (at_backward_arrow()) {
            arrows.push_back(Arrow::Backward);
            pos += 2;
        } else {
            fail("expected arrow between path nodes");
        }
    }
}

PathNode to_path_node(const ChainNode& c) { return PathNode{c.category, c.restriction}; }

// Decomposes a mixed-direction chain into maximal same-direction runs, each
// oriented source -> target. Adjacent runs share their boundary node.
std::vector<ReasoningPath> decompose_chain(const std::vector<ChainNode>& nodes,
                                           const std::vector<Arrow>& arrows) {
    std::vector<ReasoningPath> paths;
    if (arrows.empty()) {
        paths.push_back(ReasoningPath{{to_path_node(nodes[0])}});
        return paths;
    }
    size_t i = 0;
    while (i < arrows.size()) {
        size_t j = i;
        while (j < arrows.size() && arrows[j] == arrows[i]) ++j;
        ReasoningPath p;
        for (size_t k = i; k <= j; ++k) p.nodes.push_back(to_path_node(nodes[k]));
        if (arrows[i] == Arrow::Backward) std::reverse(p.nodes.begin(), p.nodes.end());
        paths.push_back(std::move(p));
        i = j;
    }
    return paths;
}

} // namespace

PlanningGraph PlanningGraph::make(std::vector<ReasoningPath> paths) {
    if (paths.empty()) throw std::invalid_argument("empty plan");
    for (const auto& p : paths) {
        if (p.nodes.empty()) throw std::invalid_argument("empty path");
        for (const auto& n : p.nodes)
            if (n.category.empty()) throw std::invalid_argument("empty category");
    }
    const std::string& target = paths.front().target().category;
    for (const auto& p : paths) {
        if (p.target().category != target)
            throw std::invalid_argument("mixed target categories: " + target + " vs " +
                                        p.target().category);
    }
    std::sort(paths.begin(), paths.end(), [](const ReasoningPath& a, const ReasoningPath& b) {
        return serialize_path(a) < serialize_path(b);
    });
    paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
    PlanningGraph g;
    g.paths_ = std::move(paths);
    return g;
}

PlanOutcome parse_plan(std::string_view text) {
    try {
        std::vector<ReasoningPath> all;
        for (const auto& expr : split_path_exprs(text)) {
            std::vector<ChainNode> nodes;
            std::vector<Arrow> arrows;
            parse_chain(expr, nodes, arrows);
            auto paths = decompose_chain(nodes, arrows);
            all.insert(all.end(), paths.begin(), paths.end());
        }
        return PlanOutcome::valid(PlanningGraph::make(std::move(all)));
    } catch (const ParseError& e) {
        return PlanOutcome::invalid(e.reason);
    } catch (const std::invalid_argument& e) {
        return PlanOutcome::invalid(e.what());
    }
}

std::string escape_plan_text(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (c == '\\' || c == '<' || c == '>' || c == ';') {
            out.push_back('\\');
        } else if (c == '-' && i + 1 < raw.size() && raw[i + 1] == '>') {
            out.push_back('\\');
        }
        out.push_back(c);
    }
    return out;
}

std::string serialize_path(const ReasoningPath& p) {
    std::string out;
    for (size_t i = 0; i < p.nodes.size(); ++i) {
        if (i > 0) out += " -> ";
        out += escape_plan_text(p.nodes[i].category);
        if (p.nodes[i].restriction)
            out += "<" + escape_plan_text(*p.nodes[i].restriction) + ">";
    }
    return out;
}

std::string serialize_plan(const PlanningGraph& g) {
    std::string out;
    for (size_t i = 0; i < g.paths().size(); ++i) {
        if (i > 0) out += " ; ";
        out += serialize_path(g.paths()[i]);
    }
    return out;
}

PlanOutcome validate_plan(const PlanningGraph& g, const Tgkb& kb, size_t max_path_len) {
    for (const auto& p : g.paths()) {
        if (p.nodes.size() > max_path_len)
            return PlanOutcome::invalid("path too long: " + serialize_path(p) + " exceeds " +
                                        std::to_string(max_path_len) + " nodes");
        for (const auto& n : p.nodes) {
            if (!kb.schema().count(n.category))
                return PlanOutcome::invalid("unknown category " + n.category);
        }
    }
    return PlanOutcome::valid(g);
}

namespace {

std::string regex_escape(std::string_view s) {
    static const std::string meta = R"(\.^$|()[]{}*+?)";
    std::string out;
    for (char c : s) {
        if (meta.find(c) != std::string::npos) out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

struct CompiledRule {
    std::regex re;
    std::vector<std::string> slots;
};

// "{name}" slots become capture groups; literal text is matched
// case-insensitively. The final slot captures greedily so a trailing slot
// swallows the rest of the query.
CompiledRule compile_pattern(const std::string& pattern) {
    CompiledRule out;
    std::string rx;
    size_t i = 0;
    std::vector<size_t> slot_positions;
    while (i < pattern.size()) {
        if (pattern[i] == '{') {
            size_t close = pattern.find('}', i);
            if (close == std::string::npos) {
                rx += regex_escape(pattern.substr(i));
                break;
            }
            out.slots.push_back(pattern.substr(i + 1, close - i - 1));
            slot_positions.push_back(rx.size());
            rx += "(.+?)";
            i = close + 1;
        } else {
            rx += regex_escape(std::string_view(&pattern[i], 1));
            ++i;
        }
    }
    if (!slot_positions.empty() && slot_positions.back() + 5 == rx.size())
        rx.replace(slot_positions.back(), 5, "(.+)");
    out.re = std::regex(rx, std::regex::ECMAScript | std::regex::icase);
    return out;
}

} // namespace

PlanOutcome plan_template(const std::string& query, const std::vector<TemplateRule>& rules) {
    for (const auto& rule : rules) {
        CompiledRule compiled;
        try {
            compiled = compile_pattern(rule.pattern);
        } catch (const std::regex_error&) {
            continue;
        }
        std::smatch m;
        if (!std::regex_search(query, m, compiled.re)) continue;

        std::string instantiated = rule.plan_skeleton;
        for (size_t s = 0; s < compiled.slots.size(); ++s) {
            const std::string slot = "{" + compiled.slots[s] + "}";
            const std::string value = escape_plan_text(trim(m[s + 1].str()));
            size_t at = 0;
            while ((at = instantiated.find(slot, at)) != std::string::npos) {
                instantiated.replace(at, slot.size(), value);
                at += value.size();
            }
        }
        return parse_plan(instantiated);
    }
    return PlanOutcome::invalid("no matching template");
}

} // namespace tgr
