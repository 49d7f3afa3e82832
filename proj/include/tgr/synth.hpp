#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tgr/kb.hpp"
#include "tgr/queries.hpp"

namespace tgr {

// Deterministic scholarly-graph style benchmark generator. Documents are
// keyword bags with category-distinctive tokens; queries are instantiated
// from metapath templates by walking backwards from a sampled anchor node, so
// every emitted query has at least one answer; answer sets come from the
// exhaustive reference retriever.

struct SynthCategory {
    std::string name;
    int count = 0;
    // groups > 0 partitions the category into that many groups; each node's
    // document carries its group token, so a group token is a restriction
    // matched by several nodes.
    int groups = 0;
};

// Every node of from_cat links to [min_links, max_links] distinct to_cat nodes.
struct SynthEdgeRule {
    std::string from_cat;
    std::string to_cat;
    int min_links = 1;
    int max_links = 1;
};

// With probability text_informativeness per (node, neighbor) pair, a node of
// `cat` copies the name token of a `neighbor_cat` neighbor into its document.
struct SynthDocLeak {
    std::string cat;
    std::string neighbor_cat;
};

// plan_skeleton is plan DSL whose restrictions may hold slots; query_text may
// use the same slots plus {q} for the per-query marker token. Slots:
//   {<Category>.name}  - name token of the walked-to node of that category
//   {<Category>.group} - its group token
// Restriction slots are only allowed on the first node of a path.
struct SynthTemplate {
    std::string plan_skeleton;
    std::string query_text;
};

struct SynthConfig {
    std::vector<SynthCategory> categories;
    std::vector<SynthEdgeRule> edges;
    std::vector<SynthDocLeak> doc_leaks;
    std::vector<SynthTemplate> templates;
    int vocab_size = 400;
    int noise_tokens = 4;   // filler tokens per document
    int n_queries = 100;
    // How much answer-identifying signal lives in documents rather than
    // edges: gates both doc leaks and the per-query marker token injected
    // into answer documents.
    double text_informativeness = 0.3;
    uint64_t seed = 1;
    int max_resample = 25;
};

struct SynthOutput {
    Tgkb kb;
    std::vector<QueryRecord> queries; // gold plans attached, answers verified
    std::vector<std::string> warnings;
};

SynthOutput synth_generate(const SynthConfig& cfg);

// Presets used by the test and benchmark harnesses.
SynthConfig synth_small_config(uint64_t seed, int n_queries = 10);                 // < 500 nodes
SynthConfig synth_benchmark_config(uint64_t seed, double text_informativeness,
                                   int n_queries = 200);                           // 10k nodes

} // namespace tgr
