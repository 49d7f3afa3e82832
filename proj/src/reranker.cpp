#include "tgr/reranker.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "tgr/rng.hpp"

namespace tgr {

TrajectoryFeatures extract_features(const Trajectory& traj, const std::string& query,
                                    const TextScorer& scorer, double initial_score) {
    TrajectoryFeatures out;
    const size_t len = traj.steps.size();
    const size_t take = std::min<size_t>(len, kTrajectorySlots);
    const size_t from = len - take; // keep the candidate-adjacent tail
    out.pad_len = static_cast<int>(kTrajectorySlots - take);
    for (size_t i = 0; i < take; ++i) {
        const auto& step = traj.steps[from + i];
        const size_t slot = static_cast<size_t>(out.pad_len) + i;
        std::string expanded = step.restriction && !step.restriction->empty()
                                   ? query + " " + *step.restriction
                                   : query;
        out.tf[slot] = scorer.score(expanded, step.node);
        out.sf[slot] = step.category;
        out.ti[slot] = step.kind == StepKind::Structural ? TiToken::Structural : TiToken::Textual;
    }
    out.tf[3] = initial_score;
    return out;
}

int RerankerModel::cat_row(const std::string& token) const {
    for (size_t i = 0; i < categories.size(); ++i)
        if (categories[i] == token) return static_cast<int>(i);
    return 0; // unseen categories carry no more signal than padding
}

namespace {

std::vector<std::string> with_padding_token(std::vector<std::string> categories) {
    std::vector<std::string> vocab;
    vocab.push_back(kPaddingToken);
    std::sort(categories.begin(), categories.end());
    categories.erase(std::unique(categories.begin(), categories.end()), categories.end());
    for (auto& c : categories)
        if (c != kPaddingToken) vocab.push_back(std::move(c));
    return vocab;
}

void size_params(RerankerModel& m) {
    const size_t d = static_cast<size_t>(m.cfg.embed_dim);
    const size_t h = static_cast<size_t>(m.cfg.hidden);
    const size_t z = static_cast<size_t>(m.concat_dim());
    m.tf_w.assign(d * 4, 0.0);
    m.tf_b.assign(d, 0.0);
    m.cat_embed.assign(m.categories.size() * d, 0.0);
    m.sf_w.assign(d * d, 0.0);
    m.sf_b.assign(d, 0.0);
    m.ti_embed.assign(static_cast<size_t>(kTiVocab) * d, 0.0);
    m.h1_w.assign(h * z, 0.0);
    m.h1_b.assign(h, 0.0);
    m.h2_w.assign(2 * h, 0.0);
    m.h2_b.assign(2, 0.0);
}

void fill_uniform(std::vector<double>& v, Rng& rng, double r) {
    for (auto& x : v) x = rng.uniform(-r, r);
}

} // namespace

RerankerModel RerankerModel::zeros(std::vector<std::string> categories, RerankerConfig cfg) {
    RerankerModel m;
    m.cfg = std::move(cfg);
    m.categories = with_padding_token(std::move(categories));
    size_params(m);
    return m;
}

RerankerModel RerankerModel::init(std::vector<std::string> categories, RerankerConfig cfg) {
    RerankerModel m = zeros(std::move(categories), std::move(cfg));
    Rng rng(m.cfg.seed);
    const double d = static_cast<double>(m.cfg.embed_dim);
    fill_uniform(m.tf_w, rng, 1.0 / std::sqrt(4.0));
    fill_uniform(m.cat_embed, rng, 0.05);
    fill_uniform(m.sf_w, rng, 1.0 / std::sqrt(d));
    fill_uniform(m.ti_embed, rng, 0.05);
    fill_uniform(m.h1_w, rng, 1.0 / std::sqrt(static_cast<double>(m.concat_dim())));
    fill_uniform(m.h2_w, rng, 1.0 / std::sqrt(static_cast<double>(m.cfg.hidden)));
    return m;
}

Probs softmax2(const Logits& l) {
    const double mx = std::max(l.l0, l.l1);
    const double e0 = std::exp(l.l0 - mx);
    const double e1 = std::exp(l.l1 - mx);
    const double z = e0 + e1;
    return {e0 / z, e1 / z};
}

namespace {

double activate(const std::string& kind, double x) {
    if (kind == "tanh") return std::tanh(x);
    if (kind == "relu") return x > 0.0 ? x : 0.0;
    if (kind == "sigmoid") return 1.0 / (1.0 + std::exp(-x));
    throw std::invalid_argument("unknown activation: " + kind);
}

double activate_grad(const std::string& kind, double activated) {
    if (kind == "tanh") return 1.0 - activated * activated;
    if (kind == "relu") return activated > 0.0 ? 1.0 : 0.0;
    if (kind == "sigmoid") return activated * (1.0 - activated);
    throw std::invalid_argument("unknown activation: " + kind);
}

struct ForwardCache {
    std::array<int, 3> cat_rows{};
    std::vector<double> mean;   // mean-pooled category vectors
    std::vector<double> concat; // [sf_out | tf_out | ti_out], zeroed where masked
    std::vector<double> h1;     // post-activation
    Logits logits;
    Probs p;
};

ForwardCache run_forward(const RerankerModel& m, const TrajectoryFeatures& x,
                         const FeatureMask& mask) {
    const int d = m.cfg.embed_dim;
    const int h = m.cfg.hidden;
    const int zdim = m.concat_dim();
    ForwardCache c;
    c.mean.assign(static_cast<size_t>(d), 0.0);
    c.concat.assign(static_cast<size_t>(zdim), 0.0);

    for (int s = 0; s < kTrajectorySlots; ++s) c.cat_rows[static_cast<size_t>(s)] = m.cat_row(x.sf[static_cast<size_t>(s)]);

    if (mask.sf) {
        for (int s = 0; s < kTrajectorySlots; ++s) {
            const double* row = &m.cat_embed[static_cast<size_t>(c.cat_rows[static_cast<size_t>(s)]) * d];
            for (int i = 0; i < d; ++i) c.mean[static_cast<size_t>(i)] += row[i];
        }
        for (int i = 0; i < d; ++i) c.mean[static_cast<size_t>(i)] /= kTrajectorySlots;
        for (int r = 0; r < d; ++r) {
            double acc = m.sf_b[static_cast<size_t>(r)];
            const double* w = &m.sf_w[static_cast<size_t>(r) * d];
            for (int i = 0; i < d; ++i) acc += w[i] * c.mean[static_cast<size_t>(i)];
            c.concat[static_cast<size_t>(r)] = acc;
        }
    }
    if (mask.tf) {
        for (int r = 0; r < d; ++r) {
            double acc = m.tf_b[static_cast<size_t>(r)];
            const double* w = &m.tf_w[static_cast<size_t>(r) * 4];
            for (int i = 0; i < 4; ++i) acc += w[i] * x.tf[static_cast<size_t>(i)];
            c.concat[static_cast<size_t>(d + r)] = acc;
        }
    }
    if (mask.ti) {
        for (int s = 0; s < kTrajectorySlots; ++s) {
            const double* row = &m.ti_embed[static_cast<size_t>(static_cast<int>(x.ti[static_cast<size_t>(s)])) * d];
            double* dst = &c.concat[static_cast<size_t>(2 * d + s * d)];
            for (int i = 0; i < d; ++i) dst[i] = row[i];
        }
    }

    c.h1.assign(static_cast<size_t>(h), 0.0);
    for (int r = 0; r < h; ++r) {
        double acc = m.h1_b[static_cast<size_t>(r)];
        const double* w = &m.h1_w[static_cast<size_t>(r) * zdim];
        for (int i = 0; i < zdim; ++i) acc += w[i] * c.concat[static_cast<size_t>(i)];
        c.h1[static_cast<size_t>(r)] = activate(m.cfg.activation, acc);
    }
    double l0 = m.h2_b[0], l1 = m.h2_b[1];
    for (int i = 0; i < h; ++i) {
        l0 += m.h2_w[static_cast<size_t>(i)] * c.h1[static_cast<size_t>(i)];
        l1 += m.h2_w[static_cast<size_t>(h + i)] * c.h1[static_cast<size_t>(i)];
    }
    c.logits = {l0, l1};
    c.p = softmax2(c.logits);
    return c;
}

// Backpropagates d(loss)/d(logits) through the network. grads may be null
// when only the input gradient is wanted; tf_input_grad may be null when only
// parameter gradients are wanted.
void run_backward(const RerankerModel& m, const TrajectoryFeatures& x, const FeatureMask& mask,
                  const ForwardCache& c, double dl0, double dl1, Gradients* grads,
                  std::array<double, 4>* tf_input_grad) {
    const int d = m.cfg.embed_dim;
    const int h = m.cfg.hidden;
    const int zdim = m.concat_dim();

    std::vector<double> dh1(static_cast<size_t>(h), 0.0);
    for (int i = 0; i < h; ++i) {
        double g = dl0 * m.h2_w[static_cast<size_t>(i)] + dl1 * m.h2_w[static_cast<size_t>(h + i)];
        dh1[static_cast<size_t>(i)] = g * activate_grad(m.cfg.activation, c.h1[static_cast<size_t>(i)]);
    }
    if (grads) {
        for (int i = 0; i < h; ++i) {
            grads->h2_w[static_cast<size_t>(i)] += dl0 * c.h1[static_cast<size_t>(i)];
            grads->h2_w[static_cast<size_t>(h + i)] += dl1 * c.h1[static_cast<size_t>(i)];
        }
        grads->h2_b[0] += dl0;
        grads->h2_b[1] += dl1;
    }

    std::vector<double> dz(static_cast<size_t>(zdim), 0.0);
    for (int r = 0; r < h; ++r) {
        const double g = dh1[static_cast<size_t>(r)];
        if (g == 0.0) continue;
        const double* w = &m.h1_w[static_cast<size_t>(r) * zdim];
        for (int i = 0; i < zdim; ++i) dz[static_cast<size_t>(i)] += g * w[i];
        if (grads) {
            double* gw = &grads->h1_w[static_cast<size_t>(r) * zdim];
            for (int i = 0; i < zdim; ++i) gw[i] += g * c.concat[static_cast<size_t>(i)];
            grads->h1_b[static_cast<size_t>(r)] += g;
        }
    }

    if (mask.sf && grads) {
        std::vector<double> dmean(static_cast<size_t>(d), 0.0);
        for (int r = 0; r < d; ++r) {
            const double g = dz[static_cast<size_t>(r)];
            if (g == 0.0) continue;
            const double* w = &m.sf_w[static_cast<size_t>(r) * d];
            for (int i = 0; i < d; ++i) dmean[static_cast<size_t>(i)] += g * w[i];
            double* gw = &grads->sf_w[static_cast<size_t>(r) * d];
            for (int i = 0; i < d; ++i) gw[i] += g * c.mean[static_cast<size_t>(i)];
            grads->sf_b[static_cast<size_t>(r)] += g;
        }
        for (int s = 0; s < kTrajectorySlots; ++s) {
            double* grow = &grads->cat_embed[static_cast<size_t>(c.cat_rows[static_cast<size_t>(s)]) * d];
            for (int i = 0; i < d; ++i) grow[i] += dmean[static_cast<size_t>(i)] / kTrajectorySlots;
        }
    }
    if (mask.tf) {
        for (int r = 0; r < d; ++r) {
            const double g = dz[static_cast<size_t>(d + r)];
            if (g == 0.0) continue;
            if (grads) {
                double* gw = &grads->tf_w[static_cast<size_t>(r) * 4];
                for (int i = 0; i < 4; ++i) gw[i] += g * x.tf[static_cast<size_t>(i)];
                grads->tf_b[static_cast<size_t>(r)] += g;
            }
            if (tf_input_grad) {
                const double* w = &m.tf_w[static_cast<size_t>(r) * 4];
                for (int i = 0; i < 4; ++i) (*tf_input_grad)[static_cast<size_t>(i)] += g * w[i];
            }
        }
    }
    if (mask.ti && grads) {
        for (int s = 0; s < kTrajectorySlots; ++s) {
            double* grow = &grads->ti_embed[static_cast<size_t>(static_cast<int>(x.ti[static_cast<size_t>(s)])) * d];
            const double* src = &dz[static_cast<size_t>(2 * d + s * d)];
            for (int i = 0; i < d; ++i) grow[i] += src[i];
        }
    }
}

} // namespace

Logits forward(const RerankerModel& m, const TrajectoryFeatures& x, const FeatureMask& mask) {
    return run_forward(m, x, mask).logits;
}

Gradients Gradients::zeros_like(const RerankerModel& m) {
    Gradients g;
    g.tf_w.assign(m.tf_w.size(), 0.0);
    g.tf_b.assign(m.tf_b.size(), 0.0);
    g.cat_embed.assign(m.cat_embed.size(), 0.0);
    g.sf_w.assign(m.sf_w.size(), 0.0);
    g.sf_b.assign(m.sf_b.size(), 0.0);
    g.ti_embed.assign(m.ti_embed.size(), 0.0);
    g.h1_w.assign(m.h1_w.size(), 0.0);
    g.h1_b.assign(m.h1_b.size(), 0.0);
    g.h2_w.assign(m.h2_w.size(), 0.0);
    g.h2_b.assign(m.h2_b.size(), 0.0);
    return g;
}

void Gradients::reset() {
    for (auto* v : {&tf_w, &tf_b, &cat_embed, &sf_w, &sf_b, &ti_embed, &h1_w, &h1_b, &h2_w, &h2_b})
        std::fill(v->begin(), v->end(), 0.0);
}

double loss_and_grad(const RerankerModel& m, const std::vector<TrainExample>& batch,
                     Gradients& grads, const FeatureMask& mask) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    double loss = 0.0;
    for (const auto& ex : batch) {
        ForwardCache c = run_forward(m, ex.features, mask);
        const double py = ex.label == 1 ? c.p.p1 : c.p.p0;
        loss -= std::log(std::max(py, 1e-300));
        // d(-log softmax_y)/d(logits) = p - onehot(y)
        const double y1 = ex.label == 1 ? 1.0 : 0.0;
        run_backward(m, ex.features, mask, c, c.p.p0 - (1.0 - y1), c.p.p1 - y1, &grads, nullptr);
    }
    return loss;
}

double dataset_loss(const RerankerModel& m, const std::vector<TrainExample>& data,
                    const FeatureMask& mask) {
    double loss = 0.0;
    for (const auto& ex : data) {
        Probs p = softmax2(forward(m, ex.features, mask));
        loss -= std::log(std::max(ex.label == 1 ? p.p1 : p.p0, 1e-300));
    }
    return loss;
}

namespace {

void sgd_step(std::vector<double>& param, const std::vector<double>& grad, double step) {
    for (size_t i = 0; i < param.size(); ++i) param[i] -= step * grad[i];
}

} // namespace

TrainResult train(RerankerModel m, const std::vector<TrainExample>& dataset,
                  const FeatureMask& mask) {
    bool has_pos = false, has_neg = false;
    for (const auto& ex : dataset) (ex.label == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw std::invalid_argument("training requires both positive and negative examples");

    TrainResult result;
    result.loss_curve.push_back(dataset_loss(m, dataset, mask) / static_cast<double>(dataset.size()));

    Rng rng(m.cfg.seed);
    std::vector<size_t> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Gradients grads = Gradients::zeros_like(m);
    const size_t bs = std::max<size_t>(1, static_cast<size_t>(m.cfg.batch_size));

    for (int epoch = 0; epoch < m.cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (size_t start = 0; start < order.size(); start += bs) {
            const size_t end = std::min(order.size(), start + bs);
            std::vector<TrainExample> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
            grads.reset();
            epoch_loss += loss_and_grad(m, batch, grads, mask);
            const double step = m.cfg.learning_rate / static_cast<double>(batch.size());
            sgd_step(m.tf_w, grads.tf_w, step);
            sgd_step(m.tf_b, grads.tf_b, step);
            sgd_step(m.cat_embed, grads.cat_embed, step);
            sgd_step(m.sf_w, grads.sf_w, step);
            sgd_step(m.sf_b, grads.sf_b, step);
            sgd_step(m.ti_embed, grads.ti_embed, step);
            sgd_step(m.h1_w, grads.h1_w, step);
            sgd_step(m.h1_b, grads.h1_b, step);
            sgd_step(m.h2_w, grads.h2_w, step);
            sgd_step(m.h2_b, grads.h2_b, step);
        }
        result.loss_curve.push_back(epoch_loss / static_cast<double>(dataset.size()));
    }
    result.model = std::move(m);
    return result;
}

std::vector<RankedCandidate> rerank(const RerankerModel& m, const std::vector<PoolEntry>& pool,
                                    size_t k, const FeatureMask& mask) {
    std::vector<RankedCandidate> out;
    out.reserve(pool.size());
    for (const auto& entry : pool)
        out.push_back({entry.id, positive_probability(m, entry.features, mask),
                       entry.initial_score});
    std::sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.initial_score != b.initial_score) return a.initial_score > b.initial_score;
        return a.id < b.id;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

std::array<double, 3> tf_saliency(const RerankerModel& m, const TrajectoryFeatures& x,
                                  const FeatureMask& mask) {
    ForwardCache c = run_forward(m, x, mask);
    // d p1 / d logits = (-p0*p1, p0*p1)
    const double g = c.p.p0 * c.p.p1;
    std::array<double, 4> dtf{0.0, 0.0, 0.0, 0.0};
    run_backward(m, x, mask, c, -g, g, nullptr, &dtf);
    return {std::fabs(dtf[0]), std::fabs(dtf[1]), std::fabs(dtf[2])};
}

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::json dump_vec(const std::vector<double>& v) { return nlohmann::json(v); }

std::vector<double> read_vec(const nlohmann::json& j, const char* key, size_t expected) {
    if (!j.contains(key)) throw std::runtime_error(std::string("checkpoint missing ") + key);
    auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != expected)
        throw std::runtime_error(std::string("checkpoint dimension mismatch for ") + key +
                                 ": got " + std::to_string(v.size()) + ", expected " +
                                 std::to_string(expected));
    return v;
}

} // namespace

void save_checkpoint(const RerankerModel& m, std::ostream& out) {
    nlohmann::json j;
    j["format_version"] = kCheckpointVersion;
    j["config"] = {{"embed_dim", m.cfg.embed_dim},
                   {"hidden", m.cfg.hidden},
                   {"activation", m.cfg.activation},
                   {"learning_rate", m.cfg.learning_rate},
                   {"epochs", m.cfg.epochs},
                   {"batch_size", m.cfg.batch_size},
                   {"seed", m.cfg.seed}};
    j["categories"] = m.categories;
    j["params"] = {{"tf_w", dump_vec(m.tf_w)},   {"tf_b", dump_vec(m.tf_b)},
                   {"cat_embed", dump_vec(m.cat_embed)},
                   {"sf_w", dump_vec(m.sf_w)},   {"sf_b", dump_vec(m.sf_b)},
                   {"ti_embed", dump_vec(m.ti_embed)},
                   {"h1_w", dump_vec(m.h1_w)},   {"h1_b", dump_vec(m.h1_b)},
                   {"h2_w", dump_vec(m.h2_w)},   {"h2_b", dump_vec(m.h2_b)}};
    out << j.dump();
}

RerankerModel load_checkpoint(std::istream& in) {
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("checkpoint is not valid JSON");
    if (!j.contains("format_version") || j["format_version"].get<int>() != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version");

    RerankerModel m;
    const auto& cfg = j.at("config");
    m.cfg.embed_dim = cfg.at("embed_dim").get<int>();
    m.cfg.hidden = cfg.at("hidden").get<int>();
    m.cfg.activation = cfg.at("activation").get<std::string>();
    m.cfg.learning_rate = cfg.at("learning_rate").get<double>();
    m.cfg.epochs = cfg.at("epochs").get<int>();
    m.cfg.batch_size = cfg.at("batch_size").get<int>();
    m.cfg.seed = cfg.at("seed").get<uint64_t>();
    m.categories = j.at("categories").get<std::vector<std::string>>();
    if (m.categories.empty() || m.categories[0] != kPaddingToken)
        throw std::runtime_error("checkpoint vocabulary must start with the padding token");
    if (m.cfg.embed_dim < 1 || m.cfg.hidden < 1)
        throw std::runtime_error("checkpoint dimension mismatch: non-positive dims");

    const size_t d = static_cast<size_t>(m.cfg.embed_dim);
    const size_t h = static_cast<size_t>(m.cfg.hidden);
    const size_t z = static_cast<size_t>(m.concat_dim());
    const auto& p = j.at("params");
    m.tf_w = read_vec(p, "tf_w", d * 4);
    m.tf_b = read_vec(p, "tf_b", d);
    m.cat_embed = read_vec(p, "cat_embed", m.categories.size() * d);
    m.sf_w = read_vec(p, "sf_w", d * d);
    m.sf_b = read_vec(p, "sf_b", d);
    m.ti_embed = read_vec(p, "ti_embed", static_cast<size_t>(kTiVocab) * d);
    m.h1_w = read_vec(p, "h1_w", h * z);
    m.h1_b = read_vec(p, "h1_b", h);
    m.h2_w = read_vec(p, "h2_w", 2 * h);
    m.h2_b = read_vec(p, "h2_b", 2);
    return m;
}

} // namespace tgr
