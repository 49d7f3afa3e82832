#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "tgr/scorer.hpp"
#include "tgr/traversal.hpp"

namespace tgr {

// The organizing stage: fixed-width trajectory features (textual fingerprint,
// structural fingerprint, traversal identifier) scored by a small two-layer
// network with a softmax head, trained with cross-entropy.

inline constexpr int kTrajectorySlots = 3;  // feature width; longer trajectories keep the last 3 steps
inline constexpr const char* kPaddingToken = "padding";

enum class TiToken : int { Structural = 0, Textual = 1, Pad = 2 };
inline constexpr int kTiVocab = 3;

struct TrajectoryFeatures {
    // Per-step query/document similarity, left-padded with zeros to 3 slots,
    // with the candidate's initial semantic ranking score appended.
    std::array<double, 4> tf{0.0, 0.0, 0.0, 0.0};
    // Step categories, "padding" tokens prepended to 3 slots.
    std::array<std::string, 3> sf{kPaddingToken, kPaddingToken, kPaddingToken};
    // Retrieval kind per step (seeds count as textual retrieval).
    std::array<TiToken, 3> ti{TiToken::Pad, TiToken::Pad, TiToken::Pad};
    int pad_len = 3; // leading padded positions, shared by tf/sf/ti

    bool operator==(const TrajectoryFeatures&) const = default;
};

// Similarity scores use the expanded query of each step's governing planning
// node. Trajectories longer than 3 steps keep the candidate-adjacent tail.
TrajectoryFeatures extract_features(const Trajectory& traj, const std::string& query,
                                    const TextScorer& scorer, double initial_score);

struct TrainExample {
    std::string query_id;
    TrajectoryFeatures features;
    int label = 0; // 1 iff the candidate answers the query
};

// Zeroing a branch removes it from scoring and from gradient flow; used for
// the feature-ablation experiments.
struct FeatureMask {
    bool tf = true;
    bool sf = true;
    bool ti = true;
};

struct RerankerConfig {
    int embed_dim = 256;
    int hidden = 128;
    std::string activation = "tanh";
    double learning_rate = 1e-2;
    int epochs = 100;
    int batch_size = 32;
    uint64_t seed = 1;
};

// Branch layout is fixed: concat(sf 256, tf 256, ti 3x256) = 1280 into the
// two-layer head. Category embeddings are mean-pooled over the 3 slots and
// passed through one affine map.
struct RerankerModel {
    RerankerConfig cfg;
    std::vector<std::string> categories; // vocab; index 0 is the padding token

    std::vector<double> tf_w, tf_b;       // embed_dim x 4, embed_dim
    std::vector<double> cat_embed;        // vocab x embed_dim
    std::vector<double> sf_w, sf_b;       // embed_dim x embed_dim, embed_dim
    std::vector<double> ti_embed;         // 3 x embed_dim
    std::vector<double> h1_w, h1_b;       // hidden x 5*embed_dim, hidden
    std::vector<double> h2_w, h2_b;       // 2 x hidden, 2

    int concat_dim() const { return 5 * cfg.embed_dim; }
    int cat_row(const std::string& token) const; // unknown categories use the padding row

    static RerankerModel zeros(std::vector<std::string> categories, RerankerConfig cfg = {});
    static RerankerModel init(std::vector<std::string> categories, RerankerConfig cfg = {});
};

struct Logits {
    double l0 = 0.0;
    double l1 = 0.0;
};

struct Probs {
    double p0 = 0.5;
    double p1 = 0.5;
};

Probs softmax2(const Logits& l);

Logits forward(const RerankerModel& m, const TrajectoryFeatures& x, const FeatureMask& mask = {});
inline double positive_probability(const RerankerModel& m, const TrajectoryFeatures& x,
                                   const FeatureMask& mask = {}) {
    return softmax2(forward(m, x, mask)).p1;
}

// Same shapes as the parameters; filled by loss_and_grad.
struct Gradients {
    std::vector<double> tf_w, tf_b, cat_embed, sf_w, sf_b, ti_embed, h1_w, h1_b, h2_w, h2_b;

    static Gradients zeros_like(const RerankerModel& m);
    void reset();
};

// Summed cross-entropy over the batch with exact backpropagation; gradients
// are accumulated into grads (caller resets between batches).
double loss_and_grad(const RerankerModel& m, const std::vector<TrainExample>& batch,
                     Gradients& grads, const FeatureMask& mask = {});

double dataset_loss(const RerankerModel& m, const std::vector<TrainExample>& data,
                    const FeatureMask& mask = {});

struct TrainResult {
    RerankerModel model;
    // loss_curve[0] is the pre-training dataset mean loss; one entry per epoch after.
    std::vector<double> loss_curve;
};

// Mini-batch gradient descent, deterministic per cfg.seed. Throws
// std::invalid_argument when the dataset lacks one of the two labels.
TrainResult train(RerankerModel m, const std::vector<TrainExample>& dataset,
                  const FeatureMask& mask = {});

struct PoolEntry {
    std::string id;
    TrajectoryFeatures features;
    double initial_score = 0.0;
};

struct RankedCandidate {
    std::string id;
    double score = 0.0; // p1 under the model, or the initial score without one
    double initial_score = 0.0;
};

// Sorted by model p1 descending, ties by initial score descending then id
// ascending; truncated to K.
std::vector<RankedCandidate> rerank(const RerankerModel& m, const std::vector<PoolEntry>& pool,
                                    size_t k, const FeatureMask& mask = {});

// |d p1 / d tf[l]| for the three per-step similarity slots. Padded positions
// still get a value; x.pad_len tells the caller which ones they are.
std::array<double, 3> tf_saliency(const RerankerModel& m, const TrajectoryFeatures& x,
                                  const FeatureMask& mask = {});

// Versioned JSON checkpoint with the full configuration embedded; loading
// rejects dimension or vocabulary mismatches.
void save_checkpoint(const RerankerModel& m, std::ostream& out);
RerankerModel load_checkpoint(std::istream& in);

} // namespace tgr
