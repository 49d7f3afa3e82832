#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tgr/kb.hpp"

namespace tgr {

// Lowercase, split on non-alphanumeric (ASCII), drop empty tokens. No
// stemming, no stopwords.
std::vector<std::string> tokenize(std::string_view text);

// Sorted distinct tokens; query-side term multiplicity is ignored by design.
std::vector<std::string> distinct_tokens(std::string_view text);

struct ScoredNode {
    std::string id;
    double score = 0.0;
};

// Ordering used everywhere ties can occur: score descending, id ascending.
inline bool scored_before(const ScoredNode& a, const ScoredNode& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

// Query/document relevance, pure and thread-safe after construction.
class TextScorer {
public:
    virtual ~TextScorer() = default;
    virtual double score(const std::string& query, const std::string& id) const = 0;
    // Batch scoring lets implementations prepare the query once.
    virtual std::vector<double> score_many(const std::string& query,
                                           const std::vector<std::string>& ids) const;
    virtual std::string name() const = 0;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    bool operator==(const Bm25Params&) const = default;
};

// Okapi BM25 over node documents:
//   score(q, d) = sum over distinct query terms t of
//     idf(t) * tf / (tf + k1 * (1 - b + b * len(d)/avg_len))
//   idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1)
class Bm25Index : public TextScorer {
public:
    Bm25Index() = default;
    static Bm25Index build(const Tgkb& kb, Bm25Params params = {});

    double score(const std::string& query, const std::string& id) const override;
    std::vector<double> score_many(const std::string& query,
                                   const std::vector<std::string>& ids) const override;
    std::string name() const override { return "bm25"; }

    size_t doc_count() const { return n_docs_; }
    double avg_doc_len() const { return avg_doc_len_; }
    size_t doc_freq(const std::string& term) const;
    size_t doc_len(const std::string& id) const; // throws on unknown id
    const Bm25Params& params() const { return params_; }

    bool operator==(const Bm25Index& other) const {
        return doc_freq_ == other.doc_freq_ && term_freq_ == other.term_freq_ &&
               doc_len_ == other.doc_len_ && avg_doc_len_ == other.avg_doc_len_ &&
               n_docs_ == other.n_docs_ && params_ == other.params_;
    }

private:
    double score_terms(const std::vector<std::string>& terms, const std::string& id) const;

    std::unordered_map<std::string, size_t> doc_freq_;
    // node id -> term -> in-document frequency
    std::unordered_map<std::string, std::unordered_map<std::string, int>> term_freq_;
    std::unordered_map<std::string, size_t> doc_len_;
    double avg_doc_len_ = 0.0;
    size_t n_docs_ = 0;
    Bm25Params params_;
};

// Deterministic bag-of-words stand-in for an embedding service: each token
// adds a signed one-hot at a hashed coordinate; texts are compared by cosine
// of the L2-normalized sums. Identical text always embeds identically.
class HashedEmbeddingScorer : public TextScorer {
public:
    HashedEmbeddingScorer() = default;
    HashedEmbeddingScorer(const Tgkb& kb, int dim = 256, uint64_t seed = 0x5eedULL);

    std::vector<double> embed(std::string_view text) const; // L2-normalized, or all-zero
    double score(const std::string& query, const std::string& id) const override;
    std::vector<double> score_many(const std::string& query,
                                   const std::vector<std::string>& ids) const override;
    std::string name() const override { return "hashed"; }

    int dim() const { return dim_; }
    uint64_t seed() const { return seed_; }

private:
    int dim_ = 256;
    uint64_t seed_ = 0x5eedULL;
    std::unordered_map<std::string, std::vector<double>> doc_embed_;
};

// Top-k nodes of one category under (score desc, id asc); fewer than k if the
// category pool is smaller, empty for unknown categories. The caller passes
// the already-expanded query text.
std::vector<ScoredNode> topk_by_category(const Tgkb& kb, const TextScorer& scorer,
                                         const std::string& query_expanded,
                                         const std::string& category, int k);

// Same selection over every node in the KB (used by the plan-free fallback).
std::vector<ScoredNode> topk_all(const Tgkb& kb, const TextScorer& scorer,
                                 const std::string& query, int k);

} // namespace tgr
