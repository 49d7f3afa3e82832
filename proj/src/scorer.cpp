#include "tgr/scorer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "tgr/rng.hpp"

namespace tgr {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> distinct_tokens(std::string_view text) {
    auto toks = tokenize(text);
    std::sort(toks.begin(), toks.end());
    toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
    return toks;
}

std::vector<double> TextScorer::score_many(const std::string& query,
                                           const std::vector<std::string>& ids) const {
    std::vector<double> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(score(query, id));
    return out;
}

Bm25Index Bm25Index::build(const Tgkb& kb, Bm25Params params) {
    if (params.k1 <= 0.0) throw std::invalid_argument("bm25 k1 must be > 0");
    if (params.b < 0.0 || params.b > 1.0) throw std::invalid_argument("bm25 b must be in [0,1]");
    Bm25Index idx;
    idx.params_ = params;
    idx.n_docs_ = kb.node_count();
    size_t total_len = 0;
    for (const auto& id : kb.ids()) {
        auto toks = tokenize(kb.node(id).document);
        idx.doc_len_[id] = toks.size();
        total_len += toks.size();
        auto& freqs = idx.term_freq_[id];
        for (auto& t : toks) freqs[t]++;
        for (const auto& [term, tf] : freqs) idx.doc_freq_[term]++;
    }
    idx.avg_doc_len_ = idx.n_docs_ == 0 ? 0.0
                                        : static_cast<double>(total_len) /
                                              static_cast<double>(idx.n_docs_);
    return idx;
}

size_t Bm25Index::doc_freq(const std::string& term) const {
    auto it = doc_freq_.find(term);
    return it == doc_freq_.end() ? 0 : it->second;
}

size_t Bm25Index::doc_len(const std::string& id) const {
    auto it = doc_len_.find(id);
    if (it == doc_len_.end()) throw std::runtime_error("unknown node id: " + id);
    return it->second;
}

double Bm25Index::score_terms(const std::vector<std::string>& terms, const std::string& id) const {
    auto node_it = term_freq_.find(id);
    if (node_it == term_freq_.end()) throw std::runtime_error("unknown node id: " + id);
    const auto& freqs = node_it->second;
    const double len = static_cast<double>(doc_len_.at(id));
    double total = 0.0;
    for (const auto& term : terms) {
        auto tf_it = freqs.find(term);
        if (tf_it == freqs.end()) continue;
        const double tf = tf_it->second;
        const double df = static_cast<double>(doc_freq(term));
        const double n = static_cast<double>(n_docs_);
        const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        const double norm = params_.k1 * (1.0 - params_.b + params_.b * len / avg_doc_len_);
        total += idf * tf / (tf + norm);
    }
    return total;
}

double Bm25Index::score(const std::string& query, const std::string& id) const {
    return score_terms(distinct_tokens(query), id);
}

std::vector<double> Bm25Index::score_many(const std::string& query,
                                          const std::vector<std::string>& ids) const {
    auto terms = distinct_tokens(query);
    std::vector<double> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(score_terms(terms, id));
    return out;
}

HashedEmbeddingScorer::HashedEmbeddingScorer(const Tgkb& kb, int dim, uint64_t seed)
    : dim_(dim), seed_(seed) {
    if (dim < 1) throw std::invalid_argument("embedding dim must be >= 1");
    for (const auto& id : kb.ids()) doc_embed_[id] = embed(kb.node(id).document);
}

std::vector<double> HashedEmbeddingScorer::embed(std::string_view text) const {
    std::vector<double> v(static_cast<size_t>(dim_), 0.0);
    for (const auto& tok : tokenize(text)) {
        uint64_t h = mix64(fnv1a64(tok, seed_));
        size_t idx = static_cast<size_t>(h % static_cast<uint64_t>(dim_));
        double sign = (h >> 63) ? -1.0 : 1.0;
        v[idx] += sign;
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 > 0.0) {
        double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v) x *= inv;
    }
    return v;
}

double HashedEmbeddingScorer::score(const std::string& query, const std::string& id) const {
    auto it = doc_embed_.find(id);
    if (it == doc_embed_.end()) throw std::runtime_error("unknown node id: " + id);
    auto q = embed(query);
    double dot = 0.0;
    for (size_t i = 0; i < q.size(); ++i) dot += q[i] * it->second[i];
    return dot;
}

std::vector<double> HashedEmbeddingScorer::score_many(const std::string& query,
                                                      const std::vector<std::string>& ids) const {
    auto q = embed(query);
    std::vector<double> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = doc_embed_.find(id);
        if (it == doc_embed_.end()) throw std::runtime_error("unknown node id: " + id);
        double dot = 0.0;
        for (size_t i = 0; i < q.size(); ++i) dot += q[i] * it->second[i];
        out.push_back(dot);
    }
    return out;
}

namespace {

std::vector<ScoredNode> select_topk(const std::vector<std::string>& pool,
                                    const std::vector<double>& scores, int k) {
    std::vector<ScoredNode> scored;
    scored.reserve(pool.size());
    for (size_t i = 0; i < pool.size(); ++i) scored.push_back({pool[i], scores[i]});
    const size_t keep = std::min<size_t>(static_cast<size_t>(k), scored.size());
    std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(), scored_before);
    scored.resize(keep);
    return scored;
}

} // namespace

std::vector<ScoredNode> topk_by_category(const Tgkb& kb, const TextScorer& scorer,
                                         const std::string& query_expanded,
                                         const std::string& category, int k) {
    if (k < 1) throw std::invalid_argument("top-k requires k >= 1");
    const auto& pool = kb.nodes_in_category(category);
    if (pool.empty()) return {};
    return select_topk(pool, scorer.score_many(query_expanded, pool), k);
}

std::vector<ScoredNode> topk_all(const Tgkb& kb, const TextScorer& scorer,
                                 const std::string& query, int k) {
    if (k < 1) throw std::invalid_argument("top-k requires k >= 1");
    if (kb.ids().empty()) return {};
    return select_topk(kb.ids(), scorer.score_many(query, kb.ids()), k);
}

} // namespace tgr
