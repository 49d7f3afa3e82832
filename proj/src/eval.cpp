#include "tgr/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "tgr/scorer.hpp"

namespace tgr {

std::vector<QueryRecord> load_queries(std::istream& in) {
    std::vector<QueryRecord> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("text"))
            throw std::runtime_error("malformed query line " + std::to_string(line_no));
        QueryRecord q;
        q.id = j.at("id").get<std::string>();
        q.text = j.at("text").get<std::string>();
        if (j.contains("answers"))
            for (const auto& a : j.at("answers")) q.answers.insert(a.get<std::string>());
        if (j.contains("plan") && j.at("plan").is_string())
            q.gold_plan = j.at("plan").get<std::string>();
        out.push_back(std::move(q));
    }
    return out;
}

void save_queries(const std::vector<QueryRecord>& queries, std::ostream& out) {
    for (const auto& q : queries) {
        nlohmann::ordered_json j;
        j["id"] = q.id;
        j["text"] = q.text;
        j["answers"] = std::vector<std::string>(q.answers.begin(), q.answers.end());
        if (q.gold_plan) j["plan"] = *q.gold_plan;
        out << j.dump() << '\n';
    }
}

int hit_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& answers,
             size_t k) {
    if (k < 1) throw std::invalid_argument("hit@k requires k >= 1");
    const size_t upto = std::min(k, ranked.size());
    for (size_t i = 0; i < upto; ++i)
        if (answers.count(ranked[i])) return 1;
    return 0;
}

double recall_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& answers,
                   size_t k) {
    if (answers.empty()) throw std::invalid_argument("recall@k requires a non-empty answer set");
    const size_t upto = std::min(k, ranked.size());
    size_t hits = 0;
    for (size_t i = 0; i < upto; ++i)
        if (answers.count(ranked[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(answers.size());
}

double mrr(const std::vector<std::string>& ranked, const std::set<std::string>& answers) {
    for (size_t i = 0; i < ranked.size(); ++i)
        if (answers.count(ranked[i])) return 1.0 / static_cast<double>(i + 1);
    return 0.0;
}

RatioReport ratio_analysis(const std::vector<RatioInput>& inputs) {
    RatioReport rep;
    size_t total = 0, structural = 0;
    size_t answer_total = 0, answer_structural = 0;
    double info_struct = 0.0, info_text = 0.0;
    size_t info_queries = 0;
    for (const auto& in : inputs) {
        if (in.fallback) continue;
        rep.counted_queries++;
        for (const auto& [id, kind] : in.top) {
            ++total;
            const bool is_struct = kind == StepKind::Structural;
            if (is_struct) ++structural;
            if (in.answers.count(id)) {
                ++answer_total;
                if (is_struct) ++answer_structural;
            }
        }
        const double words = in.plan_struct_words + in.plan_text_words;
        if (words > 0.0) {
            info_struct += in.plan_struct_words / words;
            info_text += in.plan_text_words / words;
            ++info_queries;
        }
    }
    if (total > 0) {
        rep.structure_all = static_cast<double>(structural) / static_cast<double>(total);
        rep.text_all = 1.0 - rep.structure_all;
    }
    if (answer_total > 0) {
        rep.structure_answer =
            static_cast<double>(answer_structural) / static_cast<double>(answer_total);
        rep.text_answer = 1.0 - *rep.structure_answer;
    }
    if (info_queries > 0) {
        rep.structure_info = info_struct / static_cast<double>(info_queries);
        rep.text_info = info_text / static_cast<double>(info_queries);
    }
    rep.answer_hits = answer_total;
    return rep;
}

namespace {

std::pair<double, double> plan_word_counts(const PlanOutcome& plan) {
    if (!plan.ok()) return {0.0, 0.0};
    double struct_words = 0.0, text_words = 0.0;
    for (const auto& p : plan.graph().paths()) {
        struct_words += static_cast<double>(p.nodes.size());
        for (const auto& n : p.nodes)
            if (n.restriction)
                text_words += static_cast<double>(tokenize(*n.restriction).size());
    }
    return {struct_words, text_words};
}

} // namespace

MetricsReport evaluate(const RetrievalEngine& engine, const std::vector<QueryRecord>& queries,
                       const EvalOptions& opts) {
    if (opts.variant == Variant::Full && opts.model == nullptr)
        throw std::runtime_error("evaluation of the full pipeline needs a reranker model");

    struct Slot {
        QueryMetrics metrics;
        RatioInput ratio;
    };
    std::vector<Slot> slots(queries.size());

    auto work = [&](size_t qi) {
        const auto& q = queries[qi];
        QueryRun run = engine.run(q, opts.variant, opts.model, opts.mask);
        std::vector<std::string> ranked;
        ranked.reserve(run.ranking.size());
        for (const auto& rc : run.ranking) ranked.push_back(rc.id);

        Slot& slot = slots[qi];
        slot.metrics.id = q.id;
        slot.metrics.h1 = hit_at_k(ranked, q.answers, 1);
        slot.metrics.h5 = hit_at_k(ranked, q.answers, 5);
        slot.metrics.r20 = recall_at_k(ranked, q.answers, 20);
        slot.metrics.mrr = mrr(ranked, q.answers);
        slot.metrics.fallback = run.fallback;
        slot.metrics.pattern = run.pattern;
        slot.metrics.reasoning_seconds = run.reasoning_seconds;
        slot.metrics.organizing_seconds = run.organizing_seconds;

        slot.ratio.answers = q.answers;
        slot.ratio.fallback = run.fallback;
        const auto [sw, tw] = plan_word_counts(run.plan);
        slot.ratio.plan_struct_words = sw;
        slot.ratio.plan_text_words = tw;
        const size_t upto = std::min(opts.top_k, ranked.size());
        for (size_t i = 0; i < upto && i < run.final_kinds.size(); ++i)
            slot.ratio.top.emplace_back(ranked[i], run.final_kinds[i]);
    };

    const int workers = std::max(1, opts.workers);
    if (workers == 1) {
        for (size_t i = 0; i < queries.size(); ++i) work(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    const size_t i = next.fetch_add(1);
                    if (i >= queries.size()) return;
                    work(i);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    MetricsReport report;
    report.variant = variant_name(opts.variant);
    report.n_queries = queries.size();
    std::vector<RatioInput> ratio_inputs;
    for (auto& slot : slots) {
        const auto& m = slot.metrics;
        report.h1 += m.h1;
        report.h5 += m.h5;
        report.r20 += m.r20;
        report.mrr += m.mrr;
        report.fallback_rate += m.fallback ? 1.0 : 0.0;
        auto& pat = report.per_pattern[m.pattern];
        pat.count++;
        pat.h1 += m.h1;
        pat.h5 += m.h5;
        pat.r20 += m.r20;
        pat.mrr += m.mrr;
        report.per_query.push_back(std::move(slot.metrics));
        ratio_inputs.push_back(std::move(slot.ratio));
    }
    if (!queries.empty()) {
        const double n = static_cast<double>(queries.size());
        report.h1 /= n;
        report.h5 /= n;
        report.r20 /= n;
        report.mrr /= n;
        report.fallback_rate /= n;
        for (auto& [pattern, stats] : report.per_pattern) {
            const double c = static_cast<double>(stats.count);
            stats.h1 /= c;
            stats.h5 /= c;
            stats.r20 /= c;
            stats.mrr /= c;
        }
    }
    if (opts.with_ratios) report.ratios = ratio_analysis(ratio_inputs);
    return report;
}

std::string format_report_table(const MetricsReport& report) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-24s %8s %8s %8s %8s\n", "slice", "H@1", "H@5", "R@20",
                  "MRR");
    out << buf;
    std::snprintf(buf, sizeof(buf), "%-24s %8.4f %8.4f %8.4f %8.4f\n", "mean", report.h1,
                  report.h5, report.r20, report.mrr);
    out << buf;
    for (const auto& [pattern, stats] : report.per_pattern) {
        std::snprintf(buf, sizeof(buf), "%-24s %8.4f %8.4f %8.4f %8.4f  (n=%zu)\n",
                      pattern.substr(0, 24).c_str(), stats.h1, stats.h5, stats.r20, stats.mrr,
                      stats.count);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "fallback rate %.4f over %zu queries\n",
                  report.fallback_rate, report.n_queries);
    out << buf;
    return out.str();
}

void write_report_json(const MetricsReport& report, std::ostream& out) {
    nlohmann::ordered_json j;
    j["variant"] = report.variant;
    j["n_queries"] = report.n_queries;
    j["mean"] = {{"h1", report.h1}, {"h5", report.h5}, {"r20", report.r20}, {"mrr", report.mrr}};
    j["fallback_rate"] = report.fallback_rate;
    nlohmann::ordered_json patterns = nlohmann::ordered_json::object();
    for (const auto& [pattern, stats] : report.per_pattern)
        patterns[pattern] = {{"count", stats.count},
                             {"h1", stats.h1},
                             {"h5", stats.h5},
                             {"r20", stats.r20},
                             {"mrr", stats.mrr}};
    j["per_pattern"] = patterns;
    if (report.ratios) {
        const auto& r = *report.ratios;
        nlohmann::ordered_json ratios;
        ratios["structure_all"] = r.structure_all;
        ratios["text_all"] = r.text_all;
        if (r.structure_answer) {
            ratios["structure_answer"] = *r.structure_answer;
            ratios["text_answer"] = *r.text_answer;
        } else {
            ratios["structure_answer"] = nullptr;
            ratios["text_answer"] = nullptr;
        }
        ratios["structure_info"] = r.structure_info;
        ratios["text_info"] = r.text_info;
        ratios["info_note"] = "approximate: derived from gold-plan word counts";
        ratios["counted_queries"] = r.counted_queries;
        ratios["answer_hits"] = r.answer_hits;
        j["ratios"] = ratios;
    }
    nlohmann::ordered_json per_query = nlohmann::ordered_json::array();
    for (const auto& m : report.per_query)
        per_query.push_back({{"id", m.id},
                             {"h1", m.h1},
                             {"h5", m.h5},
                             {"r20", m.r20},
                             {"mrr", m.mrr},
                             {"fallback", m.fallback},
                             {"pattern", m.pattern},
                             {"reasoning_seconds", m.reasoning_seconds},
                             {"organizing_seconds", m.organizing_seconds}});
    j["per_query"] = per_query;
    out << j.dump(2) << '\n';
}

} // namespace tgr
