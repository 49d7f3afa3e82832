#pragma once

#include <map>
#include <string>
#include <vector>

#include "tgr/plan.hpp"

namespace tgr {

// Plan generation through an OpenAI-style chat-completion endpoint. This is a
// total function into PlanOutcome: every transport, protocol, or parse
// failure maps to Invalid so the caller's textual fallback stays reachable.

struct LlmEndpoint {
    std::string base_url;                          // e.g. "http://127.0.0.1:8089"
    std::string path = "/v1/chat/completions";
    std::string model = "planner";
    std::string auth_env = "TGR_API_TOKEN";        // bearer token env var; never a config value
    int timeout_ms = 10000;
    double temperature = 0.0;
};

struct PlannerDemo {
    std::string question;
    std::string metapath;                           // arrow chain, e.g. "Institution -> Author -> Paper"
    std::map<std::string, std::string> restrictions; // category -> restriction text
};

// Prompt assembly, exposed separately so tests can pin the exact request.
std::string planner_system_message();
std::string planner_user_message(const std::string& query, const std::vector<std::string>& schema,
                                 const std::vector<PlannerDemo>& demos);

// Extracts the Metapath/Restriction fields from a completion's message
// content and builds the plan; Invalid("unparseable planner output: ...")
// with the raw text attached otherwise.
PlanOutcome parse_planner_response(const std::string& content);

PlanOutcome plan_llm(const std::string& query, const LlmEndpoint& endpoint,
                     const std::vector<std::string>& schema,
                     const std::vector<PlannerDemo>& demos);

} // namespace tgr
