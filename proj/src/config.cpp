#include "tgr/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace tgr {

namespace {

nlohmann::json parse_override_value(const std::string& raw) {
    auto j = nlohmann::json::parse(raw, nullptr, false);
    if (!j.is_discarded()) return j;
    return nlohmann::json(raw);
}

void apply_override(nlohmann::json& root, const std::string& spec) {
    const size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like path.to.key=value: " + spec);
    const std::string path = spec.substr(0, eq);
    nlohmann::json* cur = &root;
    size_t start = 0;
    while (true) {
        const size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) throw ConfigError("empty key segment in override: " + spec);
        if (dot == std::string::npos) {
            (*cur)[key] = parse_override_value(spec.substr(eq + 1));
            return;
        }
        if (!cur->contains(key) || !(*cur)[key].is_object())
            (*cur)[key] = nlohmann::json::object();
        cur = &(*cur)[key];
        start = dot + 1;
    }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value for '") + key + "': " + e.what());
    }
}

SynthConfig parse_synth(const nlohmann::json& j) {
    SynthConfig cfg;
    const std::string preset = get_or<std::string>(j, "preset", "");
    if (preset == "small") {
        cfg = synth_small_config(1);
    } else if (preset == "benchmark") {
        cfg = synth_benchmark_config(1, 0.3);
    } else if (!preset.empty()) {
        throw ConfigError("unknown synth preset: " + preset);
    }
    if (j.contains("categories")) {
        cfg.categories.clear();
        for (const auto& c : j.at("categories"))
            cfg.categories.push_back({c.at("name").get<std::string>(), c.at("count").get<int>(),
                                      get_or<int>(c, "groups", 0)});
    }
    if (j.contains("edges")) {
        cfg.edges.clear();
        for (const auto& e : j.at("edges"))
            cfg.edges.push_back({e.at("from").get<std::string>(), e.at("to").get<std::string>(),
                                 get_or<int>(e, "min", 1), get_or<int>(e, "max", 1)});
    }
    if (j.contains("doc_leaks")) {
        cfg.doc_leaks.clear();
        for (const auto& l : j.at("doc_leaks"))
            cfg.doc_leaks.push_back(
                {l.at("cat").get<std::string>(), l.at("neighbor").get<std::string>()});
    }
    if (j.contains("templates")) {
        cfg.templates.clear();
        for (const auto& t : j.at("templates"))
            cfg.templates.push_back(
                {t.at("plan").get<std::string>(), t.at("query").get<std::string>()});
    }
    cfg.vocab_size = get_or<int>(j, "vocab_size", cfg.vocab_size);
    cfg.noise_tokens = get_or<int>(j, "noise_tokens", cfg.noise_tokens);
    cfg.n_queries = get_or<int>(j, "n_queries", cfg.n_queries);
    cfg.text_informativeness =
        get_or<double>(j, "text_informativeness", cfg.text_informativeness);
    cfg.seed = get_or<uint64_t>(j, "seed", cfg.seed);
    cfg.max_resample = get_or<int>(j, "max_resample", cfg.max_resample);
    return cfg;
}

} // namespace

nlohmann::json load_config_json(const std::string& path,
                                const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("missing input: cannot open config file " + path);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
    for (const auto& o : overrides) apply_override(j, o);
    return j;
}

EngineConfig parse_engine_config(const nlohmann::json& j) {
    EngineConfig cfg;
    if (j.contains("kb")) {
        cfg.nodes_path = get_or<std::string>(j.at("kb"), "nodes", "");
        cfg.edges_path = get_or<std::string>(j.at("kb"), "edges", "");
    }
    cfg.queries_path = get_or<std::string>(j, "queries", "");
    cfg.train_queries_path = get_or<std::string>(j, "train_queries", "");

    if (j.contains("scorer")) {
        const auto& s = j.at("scorer");
        cfg.scorer_kind = get_or<std::string>(s, "kind", cfg.scorer_kind);
        cfg.bm25.k1 = get_or<double>(s, "k1", cfg.bm25.k1);
        cfg.bm25.b = get_or<double>(s, "b", cfg.bm25.b);
        cfg.hashed_dim = get_or<int>(s, "dim", cfg.hashed_dim);
        cfg.hashed_seed = get_or<uint64_t>(s, "seed", cfg.hashed_seed);
    }
    if (cfg.scorer_kind != "bm25" && cfg.scorer_kind != "hashed")
        throw ConfigError("scorer.kind must be \"bm25\" or \"hashed\"");
    if (j.contains("semantic")) {
        cfg.semantic_dim = get_or<int>(j.at("semantic"), "dim", cfg.semantic_dim);
        cfg.semantic_seed = get_or<uint64_t>(j.at("semantic"), "seed", cfg.semantic_seed);
    }

    if (j.contains("traversal")) {
        const auto& t = j.at("traversal");
        cfg.traversal.n_seeds = get_or<int>(t, "n_seeds", cfg.traversal.n_seeds);
        cfg.traversal.per_layer_text = get_or<int>(t, "per_layer_text",
                                                   cfg.traversal.per_layer_text);
        cfg.traversal.fallback_k = get_or<int>(t, "fallback_k", cfg.traversal.fallback_k);
        cfg.traversal.rerank_pool = get_or<int>(t, "rerank_pool", cfg.traversal.rerank_pool);
        if (cfg.traversal.n_seeds < 1 || cfg.traversal.fallback_k < 1 ||
            cfg.traversal.rerank_pool < 1 || cfg.traversal.per_layer_text < 0)
            throw ConfigError("traversal settings must be positive (per_layer_text may be 0)");
    }
    cfg.max_path_len = get_or<size_t>(j, "max_path_len", cfg.max_path_len);

    if (j.contains("planner")) {
        const auto& p = j.at("planner");
        cfg.planner_mode = get_or<std::string>(p, "mode", cfg.planner_mode);
        cfg.template_rules_path = get_or<std::string>(p, "templates", "");
        cfg.demos_path = get_or<std::string>(p, "demos", "");
        if (p.contains("endpoint")) {
            const auto& e = p.at("endpoint");
            LlmEndpoint ep;
            ep.base_url = get_or<std::string>(e, "base_url", "");
            ep.path = get_or<std::string>(e, "path", ep.path);
            ep.model = get_or<std::string>(e, "model", ep.model);
            ep.auth_env = get_or<std::string>(e, "auth_env", ep.auth_env);
            ep.timeout_ms = get_or<int>(e, "timeout_ms", ep.timeout_ms);
            ep.temperature = get_or<double>(e, "temperature", ep.temperature);
            cfg.endpoint = ep;
        }
    }
    if (cfg.planner_mode != "gold" && cfg.planner_mode != "template" &&
        cfg.planner_mode != "llm")
        throw ConfigError("planner.mode must be \"gold\", \"template\", or \"llm\"");
    if (cfg.planner_mode == "llm" && (!cfg.endpoint || cfg.endpoint->base_url.empty()))
        throw ConfigError("planner.mode \"llm\" needs planner.endpoint.base_url");

    if (j.contains("reranker")) {
        const auto& r = j.at("reranker");
        cfg.reranker.embed_dim = get_or<int>(r, "embed_dim", cfg.reranker.embed_dim);
        cfg.reranker.hidden = get_or<int>(r, "hidden", cfg.reranker.hidden);
        cfg.reranker.activation = get_or<std::string>(r, "activation", cfg.reranker.activation);
        cfg.reranker.learning_rate = get_or<double>(r, "learning_rate",
                                                    cfg.reranker.learning_rate);
        cfg.reranker.epochs = get_or<int>(r, "epochs", cfg.reranker.epochs);
        cfg.reranker.batch_size = get_or<int>(r, "batch_size", cfg.reranker.batch_size);
        cfg.reranker.seed = get_or<uint64_t>(r, "seed", cfg.reranker.seed);
        cfg.negative_ratio = get_or<int>(r, "negative_ratio", cfg.negative_ratio);
        cfg.checkpoint_path = get_or<std::string>(r, "checkpoint", cfg.checkpoint_path);
    }

    if (j.contains("synth")) {
        cfg.synth = parse_synth(j.at("synth"));
        cfg.synth_train_queries = get_or<int>(j.at("synth"), "n_train_queries", 0);
    }

    cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir);
    cfg.workers = get_or<int>(j, "workers", cfg.workers);
    cfg.eval_k = get_or<size_t>(j, "eval_k", cfg.eval_k);
    return cfg;
}

std::vector<TemplateRule> load_template_rules(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("missing input: cannot open template rules " + path);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_array())
        throw ConfigError("template rules must be a JSON array: " + path);
    std::vector<TemplateRule> rules;
    for (const auto& r : j)
        rules.push_back({r.at("pattern").get<std::string>(), r.at("plan").get<std::string>()});
    return rules;
}

std::vector<PlannerDemo> load_planner_demos(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("missing input: cannot open planner demos " + path);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_array())
        throw ConfigError("planner demos must be a JSON array: " + path);
    std::vector<PlannerDemo> demos;
    for (const auto& d : j) {
        PlannerDemo demo;
        demo.question = d.at("question").get<std::string>();
        demo.metapath = d.at("metapath").get<std::string>();
        if (d.contains("restriction"))
            for (auto& [k, v] : d.at("restriction").items())
                demo.restrictions[k] = v.get<std::string>();
        demos.push_back(std::move(demo));
    }
    return demos;
}

EngineBundle build_bundle(const EngineConfig& cfg) {
    namespace fs = std::filesystem;
    if (cfg.nodes_path.empty() || cfg.edges_path.empty())
        throw ConfigError("missing input: kb.nodes and kb.edges must be configured");
    if (!fs::exists(cfg.nodes_path))
        throw ConfigError("missing input: nodes file " + cfg.nodes_path);
    if (!fs::exists(cfg.edges_path))
        throw ConfigError("missing input: edges file " + cfg.edges_path);

    EngineBundle bundle;
    {
        std::ifstream nodes(cfg.nodes_path), edges(cfg.edges_path);
        bundle.kb = Tgkb::load(nodes, edges);
    }
    if (cfg.scorer_kind == "bm25") {
        bundle.scorer = std::make_unique<Bm25Index>(Bm25Index::build(bundle.kb, cfg.bm25));
    } else {
        bundle.scorer = std::make_unique<HashedEmbeddingScorer>(bundle.kb, cfg.hashed_dim,
                                                                cfg.hashed_seed);
    }
    bundle.semantic = std::make_unique<HashedEmbeddingScorer>(bundle.kb, cfg.semantic_dim,
                                                              cfg.semantic_seed);
    bundle.setup.traversal = cfg.traversal;
    bundle.setup.max_path_len = cfg.max_path_len;
    if (cfg.planner_mode == "gold") {
        bundle.setup.planner.mode = PlannerSetup::Mode::Gold;
    } else if (cfg.planner_mode == "template") {
        bundle.setup.planner.mode = PlannerSetup::Mode::Template;
        if (!cfg.template_rules_path.empty())
            bundle.setup.planner.rules = load_template_rules(cfg.template_rules_path);
    } else {
        bundle.setup.planner.mode = PlannerSetup::Mode::Llm;
        bundle.setup.planner.endpoint = cfg.endpoint;
        if (!cfg.demos_path.empty())
            bundle.setup.planner.demos = load_planner_demos(cfg.demos_path);
    }
    return bundle;
}

} // namespace tgr
