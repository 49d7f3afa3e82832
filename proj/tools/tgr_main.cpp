// tgr - hybrid structural/textual retrieval over text-rich graph knowledge
// bases. Subcommands: build, plan, retrieve, train, eval, ablate, synth.
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tgr/config.hpp"
#include "tgr/eval.hpp"
#include "tgr/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    int workers = 0;     // 0 = take from config
    std::string out_dir; // empty = take from config
    std::optional<uint64_t> seed;
};

tgr::EngineConfig load_cfg(const GlobalArgs& g) {
    auto j = tgr::load_config_json(g.config_path, g.overrides);
    auto cfg = tgr::parse_engine_config(j);
    if (g.workers > 0) cfg.workers = g.workers;
    if (!g.out_dir.empty()) cfg.output_dir = g.out_dir;
    if (g.seed) {
        cfg.reranker.seed = *g.seed;
        if (cfg.synth) cfg.synth->seed = *g.seed;
    }
    return cfg;
}

void ensure_out_dir(const tgr::EngineConfig& cfg) { fs::create_directories(cfg.output_dir); }

std::vector<tgr::QueryRecord> read_queries_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tgr::ConfigError("missing input: queries file " + path);
    return tgr::load_queries(in);
}

tgr::RerankerModel load_model_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tgr::ConfigError("missing input: checkpoint " + path);
    return tgr::load_checkpoint(in);
}

std::string checkpoint_location(const tgr::EngineConfig& cfg) {
    fs::path p = cfg.checkpoint_path;
    if (p.is_absolute() || p.has_parent_path()) return p.string();
    return (fs::path(cfg.output_dir) / p).string();
}

int cmd_build(const GlobalArgs& g) {
    auto cfg = load_cfg(g);
    auto bundle = tgr::build_bundle(cfg);
    ensure_out_dir(cfg);

    std::ofstream nodes_out(fs::path(cfg.output_dir) / "kb.nodes.jsonl");
    std::ofstream edges_out(fs::path(cfg.output_dir) / "kb.edges.jsonl");
    bundle.kb.save(nodes_out, edges_out);

    auto report = bundle.kb.validate();
    ordered_json v;
    v["nodes"] = bundle.kb.node_count();
    v["edges"] = bundle.kb.edge_count();
    v["isolated_nodes"] = report.isolated_nodes;
    v["empty_documents"] = report.empty_documents;
    ordered_json counts = ordered_json::object();
    for (const auto& [cat, n] : report.category_counts) counts[cat] = n;
    v["category_counts"] = counts;
    std::ofstream(fs::path(cfg.output_dir) / "validation.json") << v.dump(2) << '\n';

    ordered_json meta;
    meta["scorer"] = bundle.scorer->name();
    if (cfg.scorer_kind == "bm25") {
        auto idx = tgr::Bm25Index::build(bundle.kb, cfg.bm25);
        meta["n_docs"] = idx.doc_count();
        meta["avg_doc_len"] = idx.avg_doc_len();
        meta["k1"] = cfg.bm25.k1;
        meta["b"] = cfg.bm25.b;
    } else {
        meta["dim"] = cfg.hashed_dim;
        meta["seed"] = cfg.hashed_seed;
    }
    std::ofstream(fs::path(cfg.output_dir) / "index_meta.json") << meta.dump(2) << '\n';

    std::cout << "built kb: " << bundle.kb.node_count() << " nodes, " << bundle.kb.edge_count()
              << " edges, " << bundle.kb.schema().size() << " categories -> " << cfg.output_dir
              << "\n";
    return 0;
}

std::vector<tgr::QueryRecord> gather_input_queries(const tgr::EngineConfig& cfg,
                                                   const std::string& inline_query,
                                                   const std::string& queries_flag) {
    if (!inline_query.empty()) {
        tgr::QueryRecord q;
        q.id = "q0";
        q.text = inline_query;
        return {q};
    }
    const std::string path = !queries_flag.empty() ? queries_flag : cfg.queries_path;
    if (path.empty())
        throw tgr::ConfigError("missing input: provide --query, --queries, or config queries");
    return read_queries_file(path);
}

int cmd_plan(const GlobalArgs& g, const std::string& inline_query,
             const std::string& queries_flag) {
    auto cfg = load_cfg(g);
    auto bundle = tgr::build_bundle(cfg);
    auto engine = bundle.engine();
    for (const auto& q : gather_input_queries(cfg, inline_query, queries_flag)) {
        auto outcome = engine.make_plan(q);
        ordered_json line;
        line["id"] = q.id;
        line["ok"] = outcome.ok();
        if (outcome.ok())
            line["plan"] = tgr::serialize_plan(outcome.graph());
        else
            line["reason"] = outcome.reason();
        std::cout << line.dump() << "\n";
    }
    return 0;
}

int cmd_retrieve(const GlobalArgs& g, const std::string& inline_query,
                 const std::string& queries_flag, int k, const std::string& variant_flag,
                 const std::string& trace_path) {
    auto cfg = load_cfg(g);
    auto bundle = tgr::build_bundle(cfg);
    auto engine = bundle.engine();

    tgr::Variant variant = tgr::Variant::NoRerank;
    std::optional<tgr::RerankerModel> model;
    if (variant_flag == "auto") {
        if (fs::exists(checkpoint_location(cfg))) {
            model = load_model_checkpoint(checkpoint_location(cfg));
            variant = tgr::Variant::Full;
        }
    } else {
        auto v = tgr::variant_from_name(variant_flag);
        if (!v) throw tgr::ConfigError("unknown variant: " + variant_flag);
        variant = *v;
        if (variant == tgr::Variant::Full)
            model = load_model_checkpoint(checkpoint_location(cfg));
    }

    std::ofstream trace_out;
    if (!trace_path.empty()) trace_out.open(trace_path);

    for (const auto& q : gather_input_queries(cfg, inline_query, queries_flag)) {
        auto run = engine.run(q, variant, model ? &*model : nullptr);
        ordered_json line;
        line["id"] = q.id;
        line["fallback"] = run.fallback;
        line["variant"] = tgr::variant_name(variant);
        ordered_json ranked = ordered_json::array();
        const size_t upto = std::min<size_t>(static_cast<size_t>(std::max(1, k)),
                                             run.ranking.size());
        for (size_t i = 0; i < upto; ++i) {
            const auto& rc = run.ranking[i];
            ordered_json item;
            item["id"] = rc.id;
            item["score"] = rc.score;
            item["initial_score"] = rc.initial_score;
            if (run.pool.count(rc.id)) {
                ordered_json steps = ordered_json::array();
                for (const auto& s : run.pool.at(rc.id).steps)
                    steps.push_back({{"node", s.node},
                                     {"category", s.category},
                                     {"kind", tgr::step_kind_name(s.kind)}});
                item["trajectory"] = steps;
            }
            ranked.push_back(item);
        }
        line["results"] = ranked;
        std::cout << line.dump() << "\n";
        if (trace_out.is_open()) {
            for (const auto& t : run.trace) {
                ordered_json tl;
                tl["id"] = q.id;
                tl["path"] = t.path_index;
                tl["layer"] = t.layer;
                tl["struct_count"] = t.structural;
                tl["text_count"] = t.textual;
                tl["union_count"] = t.merged;
                trace_out << tl.dump() << "\n";
            }
        }
    }
    return 0;
}

int cmd_train(const GlobalArgs& g) {
    auto cfg = load_cfg(g);
    auto bundle = tgr::build_bundle(cfg);
    auto engine = bundle.engine();
    const std::string train_path =
        !cfg.train_queries_path.empty() ? cfg.train_queries_path : cfg.queries_path;
    if (train_path.empty())
        throw tgr::ConfigError("missing input: train_queries (or queries) must be configured");
    auto queries = read_queries_file(train_path);

    auto dataset = tgr::build_training_set(engine, queries, cfg.negative_ratio);
    if (dataset.empty()) throw std::runtime_error("training set is empty; check query answers");
    std::vector<std::string> categories(bundle.kb.schema().begin(), bundle.kb.schema().end());
    auto model = tgr::RerankerModel::init(categories, cfg.reranker);
    auto result = tgr::train(std::move(model), dataset);

    ensure_out_dir(cfg);
    std::ofstream ckpt(checkpoint_location(cfg));
    tgr::save_checkpoint(result.model, ckpt);
    ordered_json curve;
    curve["loss_curve"] = result.loss_curve;
    curve["examples"] = dataset.size();
    std::ofstream(fs::path(cfg.output_dir) / "loss_curve.json") << curve.dump(2) << '\n';
    std::cout << "trained on " << dataset.size() << " examples; mean loss "
              << result.loss_curve.front() << " -> " << result.loss_curve.back() << "; saved "
              << checkpoint_location(cfg) << "\n";
    return 0;
}

int run_eval_variant(const tgr::EngineConfig& cfg, const tgr::RetrievalEngine& engine,
                     const std::vector<tgr::QueryRecord>& queries, tgr::Variant variant,
                     const tgr::FeatureMask& mask, const tgr::RerankerModel* model,
                     const std::string& report_name) {
    tgr::EvalOptions opts;
    opts.variant = variant;
    opts.mask = mask;
    opts.model = model;
    opts.workers = cfg.workers;
    opts.top_k = cfg.eval_k;
    auto report = tgr::evaluate(engine, queries, opts);
    fs::create_directories(cfg.output_dir);
    std::ofstream out(fs::path(cfg.output_dir) / report_name);
    tgr::write_report_json(report, out);
    std::cout << "== " << report.variant << " -> " << report_name << "\n"
              << tgr::format_report_table(report);
    return 0;
}

int cmd_eval(const GlobalArgs& g, const std::string& variant_flag) {
    auto cfg = load_cfg(g);
    if (cfg.queries_path.empty()) throw tgr::ConfigError("missing input: queries");
    auto bundle = tgr::build_bundle(cfg);
    auto engine = bundle.engine();
    auto queries = read_queries_file(cfg.queries_path);
    auto v = tgr::variant_from_name(variant_flag);
    if (!v) throw tgr::ConfigError("unknown variant: " + variant_flag);
    std::optional<tgr::RerankerModel> model;
    if (*v == tgr::Variant::Full) model = load_model_checkpoint(checkpoint_location(cfg));
    return run_eval_variant(cfg, engine, queries, *v, {}, model ? &*model : nullptr,
                            std::string("report_") + tgr::variant_name(*v) + ".json");
}

tgr::FeatureMask parse_mask(const std::string& spec) {
    if (spec.empty()) return {};
    tgr::FeatureMask mask{false, false, false};
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "TF" || item == "tf") mask.tf = true;
        else if (item == "SF" || item == "sf") mask.sf = true;
        else if (item == "TI" || item == "ti") mask.ti = true;
        else throw tgr::ConfigError("unknown feature in mask: " + item);
    }
    return mask;
}

std::string mask_suffix(const tgr::FeatureMask& m) {
    if (m.tf && m.sf && m.ti) return "";
    std::string s = "_";
    if (m.tf) s += "tf";
    if (m.sf) s += "sf";
    if (m.ti) s += "ti";
    return s == "_" ? "_none" : s;
}

int cmd_ablate(const GlobalArgs& g, const std::string& variants_flag,
               const std::string& features_flag) {
    auto cfg = load_cfg(g);
    if (cfg.queries_path.empty()) throw tgr::ConfigError("missing input: queries");
    auto bundle = tgr::build_bundle(cfg);
    auto engine = bundle.engine();
    auto queries = read_queries_file(cfg.queries_path);

    std::vector<tgr::Variant> variants;
    std::stringstream ss(variants_flag);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto v = tgr::variant_from_name(item);
        if (!v) throw tgr::ConfigError("unknown variant: " + item);
        variants.push_back(*v);
    }
    const tgr::FeatureMask mask = parse_mask(features_flag);

    // Reranking variants need a model trained under the same feature mask.
    std::optional<tgr::RerankerModel> model;
    if (std::find(variants.begin(), variants.end(), tgr::Variant::Full) != variants.end()) {
        const std::string train_path =
            !cfg.train_queries_path.empty() ? cfg.train_queries_path : cfg.queries_path;
        auto train_queries = read_queries_file(train_path);
        auto dataset = tgr::build_training_set(engine, train_queries, cfg.negative_ratio);
        if (dataset.empty())
            throw std::runtime_error("training set is empty; check query answers");
        std::vector<std::string> categories(bundle.kb.schema().begin(),
                                            bundle.kb.schema().end());
        model = tgr::train(tgr::RerankerModel::init(categories, cfg.reranker), dataset, mask)
                    .model;
    }

    for (auto v : variants) {
        const std::string name = std::string("report_") + tgr::variant_name(v) +
                                 (v == tgr::Variant::Full ? mask_suffix(mask) : "") + ".json";
        run_eval_variant(cfg, engine, queries, v, mask,
                         v == tgr::Variant::Full ? &*model : nullptr, name);
    }
    return 0;
}

int cmd_synth(const GlobalArgs& g) {
    auto cfg = load_cfg(g);
    if (!cfg.synth) throw tgr::ConfigError("missing input: config has no synth section");
    ensure_out_dir(cfg);

    auto out = tgr::synth_generate(*cfg.synth);
    for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
    std::ofstream nodes(fs::path(cfg.output_dir) / "nodes.jsonl");
    std::ofstream edges(fs::path(cfg.output_dir) / "edges.jsonl");
    out.kb.save(nodes, edges);
    std::ofstream queries(fs::path(cfg.output_dir) / "queries.jsonl");
    tgr::save_queries(out.queries, queries);

    if (cfg.synth_train_queries > 0) {
        auto train_cfg = *cfg.synth;
        train_cfg.n_queries = cfg.synth_train_queries;
        train_cfg.seed = tgr::mix64(cfg.synth->seed ^ 0x7261696eULL);
        auto train_out = tgr::synth_generate(train_cfg);
        std::ofstream tq(fs::path(cfg.output_dir) / "train_queries.jsonl");
        tgr::save_queries(train_out.queries, tq);
    }
    std::cout << "synthesized " << out.kb.node_count() << " nodes, " << out.kb.edge_count()
              << " edges, " << out.queries.size() << " queries -> " << cfg.output_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybrid structural/textual retrieval over text-rich graph knowledge bases"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "JSON config file")->required();
    app.add_option("--set", g.overrides, "dotted-path config override, e.g. traversal.n_seeds=3");
    app.add_option("--workers", g.workers, "parallel query workers");
    app.add_option("--out", g.out_dir, "output directory override");
    uint64_t seed_val = 0;
    auto* seed_opt = app.add_option("--seed", seed_val, "seed override for train/synth");

    auto* build = app.add_subcommand("build", "load, validate, and index the KB");
    auto* plan = app.add_subcommand("plan", "produce planning graphs for queries");
    auto* retrieve = app.add_subcommand("retrieve", "run retrieval for queries");
    auto* train = app.add_subcommand("train", "train the trajectory reranker");
    auto* eval = app.add_subcommand("eval", "evaluate the pipeline on a query file");
    auto* ablate = app.add_subcommand("ablate", "run module/feature ablations");
    auto* synth = app.add_subcommand("synth", "generate a synthetic KB and query set");

    std::string inline_query, queries_flag, variant_flag = "auto", trace_path;
    std::string eval_variant = "full";
    std::string ablate_variants = "full,no_rerank,no_text,no_struct", ablate_features;
    int k = 20;
    plan->add_option("--query", inline_query, "single query text");
    plan->add_option("--queries", queries_flag, "queries JSONL file");
    retrieve->add_option("--query", inline_query, "single query text");
    retrieve->add_option("--queries", queries_flag, "queries JSONL file");
    retrieve->add_option("--k", k, "results per query");
    retrieve->add_option("--variant", variant_flag,
                         "full|no_rerank|no_text|no_struct|oracle|auto");
    retrieve->add_option("--trace", trace_path, "write per-layer traversal trace JSONL here");
    eval->add_option("--variant", eval_variant, "full|no_rerank|no_text|no_struct|oracle");
    ablate->add_option("--variants", ablate_variants, "comma-separated variant list");
    ablate->add_option("--features", ablate_features,
                       "feature mask for the reranker, e.g. TF or TF,SF");

    try {
        app.parse(argc, argv);
        if (seed_opt->count() > 0) g.seed = seed_val;
        if (build->parsed()) return cmd_build(g);
        if (plan->parsed()) return cmd_plan(g, inline_query, queries_flag);
        if (retrieve->parsed())
            return cmd_retrieve(g, inline_query, queries_flag, k, variant_flag, trace_path);
        if (train->parsed()) return cmd_train(g);
        if (eval->parsed()) return cmd_eval(g, eval_variant);
        if (ablate->parsed()) return cmd_ablate(g, ablate_variants, ablate_features);
        if (synth->parsed()) return cmd_synth(g);
        return 2;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const tgr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
