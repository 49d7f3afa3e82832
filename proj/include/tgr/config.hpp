#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgr/engine.hpp"
#include "tgr/synth.hpp"

namespace tgr {

// Single JSON config file driving every command, plus dotted-path overrides
// on the command line. All randomness funnels through the named seeds here.

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EngineConfig {
    std::string nodes_path;
    std::string edges_path;
    std::string queries_path;
    std::string train_queries_path;

    std::string scorer_kind = "bm25"; // "bm25" | "hashed"
    Bm25Params bm25;
    int hashed_dim = 256;
    uint64_t hashed_seed = 0x5eedULL;
    int semantic_dim = 256;      // initial-ranking scorer
    uint64_t semantic_seed = 17;

    TraversalConfig traversal;
    size_t max_path_len = 3;

    std::string planner_mode = "gold"; // "gold" | "template" | "llm"
    std::string template_rules_path;
    std::optional<LlmEndpoint> endpoint;
    std::string demos_path;

    RerankerConfig reranker;
    int negative_ratio = 5;
    std::string checkpoint_path = "reranker.json";

    std::optional<SynthConfig> synth;
    int synth_train_queries = 0; // extra training-query file when > 0

    std::string output_dir = "out";
    int workers = 1;
    size_t eval_k = 20;
};

// Reads the file, applies "a.b.c=value" overrides (value parsed as JSON when
// possible, else taken as a string), and validates field shapes. Throws
// ConfigError on usage-level problems.
nlohmann::json load_config_json(const std::string& path,
                                const std::vector<std::string>& overrides);
EngineConfig parse_engine_config(const nlohmann::json& j);

std::vector<TemplateRule> load_template_rules(const std::string& path);
std::vector<PlannerDemo> load_planner_demos(const std::string& path);

// Owns everything a RetrievalEngine points at.
struct EngineBundle {
    Tgkb kb;
    std::unique_ptr<TextScorer> scorer;
    std::unique_ptr<HashedEmbeddingScorer> semantic;
    EngineSetup setup;

    RetrievalEngine engine() const { return RetrievalEngine(kb, *scorer, *semantic, setup); }
};

// Loads the KB from the configured paths and builds the scorers and planner
// setup. Throws ConfigError when inputs are missing.
EngineBundle build_bundle(const EngineConfig& cfg);

} // namespace tgr
