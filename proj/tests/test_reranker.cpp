#include <doctest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "tgr/reranker.hpp"
#include "tgr/rng.hpp"
#include "tgr/scorer.hpp"

using namespace tgr;

namespace {

const std::vector<std::string> kCats = {"Institution", "Author", "Paper", "Field-of-Study"};

RerankerConfig tiny_config(uint64_t seed = 3) {
    RerankerConfig cfg;
    cfg.embed_dim = 8; // small dims keep finite differences cheap
    cfg.hidden = 6;
    cfg.seed = seed;
    return cfg;
}

TrajectoryFeatures random_features(Rng& rng) {
    TrajectoryFeatures x;
    const int len = static_cast<int>(rng.between(1, 3));
    x.pad_len = 3 - len;
    for (int i = x.pad_len; i < 3; ++i) {
        x.tf[static_cast<size_t>(i)] = rng.uniform(-1.0, 1.0);
        x.sf[static_cast<size_t>(i)] = kCats[static_cast<size_t>(rng.below(kCats.size()))];
        x.ti[static_cast<size_t>(i)] = rng.unit() < 0.5 ? TiToken::Structural : TiToken::Textual;
    }
    x.tf[3] = rng.uniform(-1.0, 1.0);
    return x;
}

std::vector<TrainExample> random_batch(Rng& rng, size_t n) {
    std::vector<TrainExample> batch;
    for (size_t i = 0; i < n; ++i) {
        TrainExample ex;
        ex.query_id = "q";
        ex.features = random_features(rng);
        ex.label = rng.unit() < 0.5 ? 1 : 0;
        batch.push_back(std::move(ex));
    }
    return batch;
}

struct ParamGroup {
    const char* name;
    std::vector<double> RerankerModel::*param;
    std::vector<double> Gradients::*grad;
};

const ParamGroup kGroups[] = {
    {"tf_w", &RerankerModel::tf_w, &Gradients::tf_w},
    {"tf_b", &RerankerModel::tf_b, &Gradients::tf_b},
    {"cat_embed", &RerankerModel::cat_embed, &Gradients::cat_embed},
    {"sf_w", &RerankerModel::sf_w, &Gradients::sf_w},
    {"sf_b", &RerankerModel::sf_b, &Gradients::sf_b},
    {"ti_embed", &RerankerModel::ti_embed, &Gradients::ti_embed},
    {"h1_w", &RerankerModel::h1_w, &Gradients::h1_w},
    {"h1_b", &RerankerModel::h1_b, &Gradients::h1_b},
    {"h2_w", &RerankerModel::h2_w, &Gradients::h2_w},
    {"h2_b", &RerankerModel::h2_b, &Gradients::h2_b},
};

// Central-difference oracle for d(loss)/d(theta_i).
double fd_loss_grad(RerankerModel m, const std::vector<TrainExample>& batch,
                    std::vector<double> RerankerModel::*param, size_t i, double eps = 1e-5) {
    (m.*param)[i] += eps;
    const double hi = dataset_loss(m, batch);
    (m.*param)[i] -= 2 * eps;
    const double lo = dataset_loss(m, batch);
    return (hi - lo) / (2 * eps);
}

bool close_rel(double a, double b, double tol = 1e-4) {
    const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
    return std::fabs(a - b) / denom <= tol;
}

// Construction shared with the acceptance suite: positives carry +1 in the
// appended initial-score slot, negatives -1, everything else is noise.
TrainExample separable_example(Rng& rng, int label) {
    TrainExample ex;
    ex.features = random_features(rng);
    ex.features.tf[3] = label == 1 ? 1.0 : -1.0;
    ex.label = label;
    return ex;
}

} // namespace

TEST_CASE("feature extraction replays the fixture trajectory") {
    auto kb = fixtures::f1();
    auto idx = Bm25Index::build(kb);
    Trajectory traj;
    traj.path_index = 0;
    traj.steps = {{"I1", "Institution", StepKind::Seed, std::string("Point Park University")},
                  {"A1", "Author", StepKind::Structural, std::nullopt},
                  {"P1", "Paper", StepKind::Structural, std::nullopt}};
    auto x = extract_features(traj, fixtures::kF1Query, idx, 0.42);
    CHECK(x.pad_len == 0);
    CHECK(x.sf == std::array<std::string, 3>{"Institution", "Author", "Paper"});
    CHECK(x.ti == std::array<TiToken, 3>{TiToken::Textual, TiToken::Structural,
                                         TiToken::Structural});
    CHECK(x.tf[0] ==
          idx.score(std::string(fixtures::kF1Query) + " Point Park University", "I1"));
    CHECK(x.tf[1] == idx.score(fixtures::kF1Query, "A1"));
    CHECK(x.tf[2] == idx.score(fixtures::kF1Query, "P1"));
    CHECK(x.tf[3] == 0.42);

    auto again = extract_features(traj, fixtures::kF1Query, idx, 0.42);
    CHECK(x == again);
}

TEST_CASE("short trajectories pad on the left") {
    auto kb = fixtures::f1();
    auto idx = Bm25Index::build(kb);
    Trajectory traj;
    traj.steps = {{"P1", "Paper", StepKind::Seed, std::nullopt}};
    auto x = extract_features(traj, "stellar populations", idx, 0.5);
    CHECK(x.pad_len == 2);
    CHECK(x.sf == std::array<std::string, 3>{"padding", "padding", "Paper"});
    CHECK(x.ti == std::array<TiToken, 3>{TiToken::Pad, TiToken::Pad, TiToken::Textual});
    CHECK(x.tf[0] == 0.0);
    CHECK(x.tf[1] == 0.0);
    CHECK(x.tf[2] == idx.score("stellar populations", "P1"));
    CHECK(x.tf[3] == 0.5);
}

TEST_CASE("over-length trajectories keep the candidate-adjacent tail") {
    auto kb = fixtures::f1();
    auto idx = Bm25Index::build(kb);
    Trajectory traj;
    traj.steps = {{"F1c", "Field-of-Study", StepKind::Seed, std::nullopt},
                  {"P1", "Paper", StepKind::Structural, std::nullopt},
                  {"A1", "Author", StepKind::Structural, std::nullopt},
                  {"P1", "Paper", StepKind::Structural, std::nullopt}};
    auto x = extract_features(traj, "stellar", idx, 0.0);
    CHECK(x.pad_len == 0);
    CHECK(x.sf == std::array<std::string, 3>{"Paper", "Author", "Paper"});
}

TEST_CASE("forward basics") {
    auto zero = RerankerModel::zeros(kCats, tiny_config());
    TrajectoryFeatures x;
    SUBCASE("all-zero parameters give logits (0,0) and p1 = 0.5") {
        auto l = forward(zero, x);
        CHECK(l.l0 == 0.0);
        CHECK(l.l1 == 0.0);
        CHECK(positive_probability(zero, x) == doctest::Approx(0.5));
    }
    SUBCASE("softmax normalizes and stays in (0,1)") {
        Rng rng(5);
        auto m = RerankerModel::init(kCats, tiny_config());
        for (int i = 0; i < 50; ++i) {
            auto f = random_features(rng);
            auto p = softmax2(forward(m, f));
            CHECK(p.p0 + p.p1 == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(p.p1 > 0.0);
            CHECK(p.p1 < 1.0);
        }
    }
    SUBCASE("p1 is invariant to a common logit shift") {
        Logits l{0.3, -1.2};
        Logits shifted{l.l0 + 17.5, l.l1 + 17.5};
        CHECK(softmax2(l).p1 == doctest::Approx(softmax2(shifted).p1).epsilon(1e-12));
    }
}

TEST_CASE("loss matches the analytic value at the zero model") {
    auto zero = RerankerModel::zeros(kCats, tiny_config());
    Gradients g = Gradients::zeros_like(zero);
    TrainExample ex;
    ex.label = 1;
    CHECK(loss_and_grad(zero, {ex}, g) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // duplicated example doubles the loss and the gradients
    auto m = RerankerModel::init(kCats, tiny_config(9));
    Rng rng(21);
    TrainExample e2;
    e2.features = random_features(rng);
    e2.label = 0;
    Gradients g1 = Gradients::zeros_like(m), g2 = Gradients::zeros_like(m);
    const double l1 = loss_and_grad(m, {e2}, g1);
    const double l2 = loss_and_grad(m, {e2, e2}, g2);
    CHECK(l2 == doctest::Approx(2 * l1).epsilon(1e-12));
    for (const auto& grp : kGroups) {
        const auto& a = g1.*(grp.grad);
        const auto& b = g2.*(grp.grad);
        for (size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(2 * a[i]));
    }
    CHECK(l1 >= 0.0);
}

TEST_CASE("analytic gradients match central finite differences") {
    // Sampled coordinates from every parameter group, many random configs.
    Rng rng(1234);
    for (int config = 0; config < 6; ++config) {
        auto cfg = tiny_config(100 + static_cast<uint64_t>(config));
        auto m = RerankerModel::init(kCats, cfg);
        auto batch = random_batch(rng, 3);
        Gradients g = Gradients::zeros_like(m);
        loss_and_grad(m, batch, g);
        for (const auto& grp : kGroups) {
            const auto& analytic = g.*(grp.grad);
            for (int probe = 0; probe < 6; ++probe) {
                const size_t i = static_cast<size_t>(rng.below(analytic.size()));
                const double fd = fd_loss_grad(m, batch, grp.param, i);
                CAPTURE(config); CAPTURE(grp.name); CAPTURE(i); CAPTURE(fd); CAPTURE(analytic[i]);
                CHECK(close_rel(analytic[i], fd));
            }
        }
    }
}

TEST_CASE("masked branches get no gradient and do not affect scores") {
    Rng rng(77);
    auto m = RerankerModel::init(kCats, tiny_config(31));
    auto batch = random_batch(rng, 4);
    FeatureMask tf_only{true, false, false};
    Gradients g = Gradients::zeros_like(m);
    loss_and_grad(m, batch, g, tf_only);
    for (double v : g.cat_embed) CHECK(v == 0.0);
    for (double v : g.sf_w) CHECK(v == 0.0);
    for (double v : g.ti_embed) CHECK(v == 0.0);

    // With SF and TI frozen out, the score is a function of tf alone.
    auto a = random_features(rng);
    auto b = a;
    b.sf = {"Paper", "Paper", "Paper"};
    b.ti = {TiToken::Structural, TiToken::Structural, TiToken::Structural};
    CHECK(positive_probability(m, a, tf_only) ==
          doctest::Approx(positive_probability(m, b, tf_only)).epsilon(1e-12));
}

TEST_CASE("training basics") {
    Rng rng(55);
    std::vector<TrainExample> data;
    for (int i = 0; i < 60; ++i) data.push_back(separable_example(rng, i % 2));

    SUBCASE("single-label datasets are refused") {
        std::vector<TrainExample> ones;
        for (int i = 0; i < 4; ++i) ones.push_back(separable_example(rng, 1));
        CHECK_THROWS_AS(train(RerankerModel::init(kCats, tiny_config()), ones),
                        std::invalid_argument);
    }
    SUBCASE("learning rate zero leaves parameters unchanged") {
        auto cfg = tiny_config();
        cfg.learning_rate = 0.0;
        cfg.epochs = 3;
        auto m = RerankerModel::init(kCats, cfg);
        auto before = m;
        auto result = train(std::move(m), data);
        for (const auto& grp : kGroups)
            CHECK(result.model.*(grp.param) == before.*(grp.param));
    }
    SUBCASE("same seed twice gives identical parameters") {
        auto cfg = tiny_config(8);
        cfg.epochs = 5;
        auto r1 = train(RerankerModel::init(kCats, cfg), data);
        auto r2 = train(RerankerModel::init(kCats, cfg), data);
        for (const auto& grp : kGroups)
            CHECK(r1.model.*(grp.param) == r2.model.*(grp.param));
        CHECK(r1.loss_curve == r2.loss_curve);
    }
    SUBCASE("loss does not increase overall") {
        auto cfg = tiny_config(4);
        cfg.epochs = 30;
        auto result = train(RerankerModel::init(kCats, cfg), data);
        CHECK(result.loss_curve.back() <= result.loss_curve.front());
        CHECK(result.loss_curve.size() == 31);
    }
}

TEST_CASE("separable data trains to a ranking that puts positives first") {
    Rng rng(99);
    std::vector<TrainExample> data;
    for (int i = 0; i < 200; ++i) data.push_back(separable_example(rng, i % 2));
    auto cfg = tiny_config(12);
    cfg.epochs = 100;
    auto result = train(RerankerModel::init(kCats, cfg), data);

    std::vector<PoolEntry> pool;
    for (int i = 0; i < 30; ++i) {
        auto ex = separable_example(rng, i % 2);
        pool.push_back({"c" + std::to_string(i), ex.features, 0.0});
    }
    auto ranked = rerank(result.model, pool, pool.size());
    // every positive (even index) precedes every negative (odd index)
    size_t first_negative = pool.size();
    for (size_t i = 0; i < ranked.size(); ++i) {
        const int idx = std::stoi(ranked[i].id.substr(1));
        if (idx % 2 == 1) {
            first_negative = std::min(first_negative, i);
        } else {
            CHECK(i < first_negative);
        }
    }
}

TEST_CASE("rerank ordering rules") {
    auto zero = RerankerModel::zeros(kCats, tiny_config());
    TrajectoryFeatures x;
    SUBCASE("pool of one returns it") {
        auto ranked = rerank(zero, {{"only", x, -5.0}}, 3);
        REQUIRE(ranked.size() == 1);
        CHECK(ranked[0].id == "only");
    }
    SUBCASE("zero model falls back to initial score then id") {
        std::vector<PoolEntry> pool = {{"b", x, 0.5}, {"a", x, 0.5}, {"c", x, 0.9}};
        auto ranked = rerank(zero, pool, 3);
        CHECK(ranked[0].id == "c");
        CHECK(ranked[1].id == "a");
        CHECK(ranked[2].id == "b");
    }
    SUBCASE("input order never matters") {
        Rng rng(3);
        auto m = RerankerModel::init(kCats, tiny_config(61));
        std::vector<PoolEntry> pool;
        for (int i = 0; i < 12; ++i)
            pool.push_back({"n" + std::to_string(i), random_features(rng), rng.unit()});
        auto ranked = rerank(m, pool, 5);
        for (int rep = 0; rep < 5; ++rep) {
            rng.shuffle(pool);
            auto again = rerank(m, pool, 5);
            for (size_t i = 0; i < ranked.size(); ++i) CHECK(again[i].id == ranked[i].id);
        }
    }
    SUBCASE("truncation to k") {
        std::vector<PoolEntry> pool = {{"a", x, 1.0}, {"b", x, 2.0}, {"c", x, 3.0}};
        CHECK(rerank(zero, pool, 2).size() == 2);
    }
}

TEST_CASE("tf saliency") {
    SUBCASE("zero model has zero saliency") {
        auto zero = RerankerModel::zeros(kCats, tiny_config());
        TrajectoryFeatures x;
        auto s = tf_saliency(zero, x);
        CHECK(s == std::array<double, 3>{0.0, 0.0, 0.0});
    }
    SUBCASE("matches finite differences of p1") {
        Rng rng(17);
        auto m = RerankerModel::init(kCats, tiny_config(23));
        for (int rep = 0; rep < 10; ++rep) {
            auto x = random_features(rng);
            auto s = tf_saliency(m, x);
            for (size_t i = 0; i < 3; ++i) {
                const double eps = 1e-5;
                auto hi = x, lo = x;
                hi.tf[i] += eps;
                lo.tf[i] -= eps;
                const double fd = (positive_probability(m, hi) - positive_probability(m, lo)) /
                                  (2 * eps);
                CAPTURE(rep); CAPTURE(i); CAPTURE(fd); CAPTURE(s[i]);
                CHECK(close_rel(s[i], std::fabs(fd)));
            }
        }
    }
    SUBCASE("padded positions are identified by the features") {
        auto m = RerankerModel::init(kCats, tiny_config(29));
        Trajectory traj;
        traj.steps = {{"P1", "Paper", StepKind::Seed, std::nullopt}};
        auto kb = fixtures::f1();
        auto idx = Bm25Index::build(kb);
        auto x = extract_features(traj, "stellar", idx, 0.1);
        CHECK(x.pad_len == 2); // caller reports saliency for slots >= pad_len
        auto s = tf_saliency(m, x);
        CHECK(s.size() == 3);
    }
}

TEST_CASE("checkpoint round trip and mismatch rejection") {
    auto cfg = tiny_config(41);
    auto m = RerankerModel::init(kCats, cfg);
    std::stringstream buf;
    save_checkpoint(m, buf);
    auto loaded = load_checkpoint(buf);
    CHECK(loaded.categories == m.categories);
    CHECK(loaded.cfg.activation == m.cfg.activation);
    for (const auto& grp : kGroups) CHECK(loaded.*(grp.param) == m.*(grp.param));

    TrajectoryFeatures x;
    x.tf = {0.1, -0.2, 0.3, 0.9};
    x.sf = {"padding", "Author", "Paper"};
    x.ti = {TiToken::Pad, TiToken::Structural, TiToken::Structural};
    x.pad_len = 1;
    CHECK(positive_probability(loaded, x) == positive_probability(m, x));

    SUBCASE("truncated parameter vector is rejected") {
        std::stringstream buf2;
        save_checkpoint(m, buf2);
        std::string text = buf2.str();
        auto j = nlohmann::json::parse(text);
        j["params"]["tf_w"].erase(0);
        std::stringstream bad(j.dump());
        CHECK_THROWS_WITH_AS(load_checkpoint(bad), doctest::Contains("dimension mismatch"),
                             std::runtime_error);
    }
    SUBCASE("garbage is rejected") {
        std::stringstream bad("not a checkpoint");
        CHECK_THROWS_AS(load_checkpoint(bad), std::runtime_error);
    }
}

TEST_CASE("concat layout is sf(256) tf(256) ti(768) = 1280 at default dims") {
    RerankerConfig cfg; // defaults
    auto m = RerankerModel::zeros(kCats, cfg);
    CHECK(m.concat_dim() == 1280);
    CHECK(m.h1_w.size() == static_cast<size_t>(cfg.hidden) * 1280);
    CHECK(m.tf_w.size() == 256 * 4);
    CHECK(m.ti_embed.size() == 3 * 256);
}
