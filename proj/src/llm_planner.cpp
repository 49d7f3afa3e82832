#include "tgr/llm_planner.hpp"

#include <cstdlib>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace tgr {

std::string planner_system_message() {
    return "You are a planning graph finder agent. Your role is to:\n"
           "1. Identify the underlying **meta-path** from a given question, which consists of "
           "the **entity types** at each reasoning step.\n"
           "2. Extract the **content restriction** for each **entity type** based on the "
           "question. If there is no restriction for an entity type, leave its value empty.\n"
           "You will be provided with a predefined **Entity Type List**. Only use the entity "
           "types from this list when constructing the meta-path and restrictions. Your "
           "response must be concise and strictly adhere to the specified **output format**.";
}

std::string planner_user_message(const std::string& query, const std::vector<std::string>& schema,
                                 const std::vector<PlannerDemo>& demos) {
    std::ostringstream out;
    out << "Entity Type List: [";
    for (size_t i = 0; i < schema.size(); ++i) {
        if (i > 0) out << ", ";
        out << schema[i];
    }
    out << "]\n";
    if (!demos.empty()) {
        out << "Demonstrations:\n";
        for (const auto& demo : demos) {
            nlohmann::json restr = nlohmann::json::object();
            for (const auto& [k, v] : demo.restrictions) restr[k] = v;
            out << "Question: " << demo.question << "\n"
                << "Metapath: \"" << demo.metapath << "\", Restriction: " << restr.dump()
                << "\n";
        }
    }
    out << "Output Format: Metapath: \"\", Restriction: {}\n";
    out << "Question: " << query;
    return out.str();
}

namespace {

// Balanced-brace slice starting at the first '{' at or after `from`.
std::string extract_json_object(const std::string& text, size_t from) {
    size_t open = text.find('{', from);
    if (open == std::string::npos) return "";
    int depth = 0;
    bool in_string = false;
    for (size_t i = open; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return text.substr(open, i - open + 1);
        }
    }
    return "";
}

std::string find_metapath(const std::string& content) {
    size_t at = content.find("Metapath");
    if (at == std::string::npos) return "";
    size_t q1 = content.find('"', at);
    if (q1 != std::string::npos) {
        size_t q2 = content.find('"', q1 + 1);
        if (q2 != std::string::npos) return content.substr(q1 + 1, q2 - q1 - 1);
    }
    // Unquoted variant: take the rest of the line up to "Restriction".
    size_t colon = content.find(':', at);
    if (colon == std::string::npos) return "";
    size_t end = content.find("Restriction", colon);
    if (end == std::string::npos) end = content.find('\n', colon);
    if (end == std::string::npos) end = content.size();
    std::string raw = content.substr(colon + 1, end - colon - 1);
    while (!raw.empty() && (raw.back() == ',' || raw.back() == ' ' || raw.back() == '\n' ||
                            raw.back() == '\r'))
        raw.pop_back();
    size_t b = raw.find_first_not_of(" \t");
    return b == std::string::npos ? "" : raw.substr(b);
}

} // namespace

PlanOutcome parse_planner_response(const std::string& content) {
    const std::string metapath = find_metapath(content);
    if (metapath.empty())
        return PlanOutcome::invalid("unparseable planner output: " + content);

    PlanOutcome parsed = parse_plan(metapath);
    if (!parsed.ok())
        return PlanOutcome::invalid("unparseable planner output (" + parsed.reason() +
                                    "): " + content);

    std::map<std::string, std::string> restrictions;
    size_t restr_at = content.find("Restriction");
    if (restr_at != std::string::npos) {
        const std::string obj = extract_json_object(content, restr_at);
        if (!obj.empty()) {
            auto j = nlohmann::json::parse(obj, nullptr, false);
            if (j.is_discarded() || !j.is_object())
                return PlanOutcome::invalid("unparseable planner output (bad restriction "
                                            "object): " + content);
            for (auto& [k, v] : j.items()) {
                if (v.is_string() && !v.get<std::string>().empty())
                    restrictions[k] = v.get<std::string>();
            }
        }
    }

    // The restriction map is keyed by category, so it applies to every path
    // node of that category.
    std::vector<ReasoningPath> paths = parsed.graph().paths();
    for (auto& path : paths) {
        for (auto& node : path.nodes) {
            auto it = restrictions.find(node.category);
            if (it != restrictions.end()) node.restriction = it->second;
        }
    }
    try {
        return PlanOutcome::valid(PlanningGraph::make(std::move(paths)));
    } catch (const std::invalid_argument& e) {
        return PlanOutcome::invalid(std::string("unparseable planner output (") + e.what() +
                                    "): " + content);
    }
}

PlanOutcome plan_llm(const std::string& query, const LlmEndpoint& endpoint,
                     const std::vector<std::string>& schema,
                     const std::vector<PlannerDemo>& demos) {
    try {
        if (schema.empty()) return PlanOutcome::invalid("planner schema is empty");

        nlohmann::json request;
        request["model"] = endpoint.model;
        request["temperature"] = endpoint.temperature;
        request["messages"] = nlohmann::json::array(
            {{{"role", "system"}, {"content", planner_system_message()}},
             {{"role", "user"}, {"content", planner_user_message(query, schema, demos)}}});

        httplib::Client client(endpoint.base_url);
        client.set_connection_timeout(0, endpoint.timeout_ms * 1000);
        client.set_read_timeout(endpoint.timeout_ms / 1000, (endpoint.timeout_ms % 1000) * 1000);
        httplib::Headers headers;
        if (const char* token = std::getenv(endpoint.auth_env.c_str());
            token != nullptr && token[0] != '\0') {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }

        auto res = client.Post(endpoint.path, headers, request.dump(), "application/json");
        if (!res)
            return PlanOutcome::invalid("planner endpoint unreachable: " +
                                        httplib::to_string(res.error()));
        if (res->status != 200)
            return PlanOutcome::invalid("planner endpoint error: status " +
                                        std::to_string(res->status) + " " + res->body);

        auto j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() ||
            j["choices"].empty() || !j["choices"][0].contains("message") ||
            !j["choices"][0]["message"].contains("content") ||
            !j["choices"][0]["message"]["content"].is_string())
            return PlanOutcome::invalid("malformed completion response: " + res->body);

        return parse_planner_response(j["choices"][0]["message"]["content"].get<std::string>());
    } catch (const std::exception& e) {
        return PlanOutcome::invalid(std::string("planner request failed: ") + e.what());
    }
}

} // namespace tgr
