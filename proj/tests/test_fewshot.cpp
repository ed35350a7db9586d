#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>

#include "rarefind/fewshot.hpp"

using namespace rarefind;

namespace {

// Four well-separated 2-D Gaussian classes, 30 samples each.
std::vector<Sample> clustered_dataset(std::uint64_t seed, int classes = 4,
                                      int per_class = 30, double sep = 3.0) {
    Rng rng(seed);
    std::vector<Sample> out;
    std::uint64_t id = 0;
    for (int c = 0; c < classes; ++c) {
        const double angle = 2.0 * M_PI * c / classes;
        for (int i = 0; i < per_class; ++i)
            out.push_back({id++,
                           {rng.normal(sep * std::cos(angle), 0.4),
                            rng.normal(sep * std::sin(angle), 0.4)},
                           c});
    }
    return out;
}

EpisodeConfig small_episode_config() {
    EpisodeConfig cfg;
    cfg.way = 3;
    cfg.shot = 2;
    cfg.queries = 4;
    cfg.episodes = 0;
    cfg.seed = 5;
    return cfg;
}

double fd(const std::function<double()>& loss, double* param, double h) {
    const double saved = *param;
    *param = saved + h;
    const double up = loss();
    *param = saved - h;
    const double down = loss();
    *param = saved;
    return (up - down) / (2.0 * h);
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

}  // namespace

TEST_CASE("sample_episode draws disjoint support and query sets") {
    const auto data = clustered_dataset(1);
    EpisodeConfig cfg = small_episode_config();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const Episode ep = sample_episode(data, cfg, rng);
        REQUIRE(ep.support.size() == 6);
        REQUIRE(ep.query.size() == 12);
        std::set<std::uint64_t> ids;
        for (const Sample& s : ep.support) ids.insert(s.id);
        for (const Sample& s : ep.query) ids.insert(s.id);
        CHECK(ids.size() == 18);  // all distinct

        // class-major layout with consistent original labels
        for (int c = 0; c < cfg.way; ++c) {
            for (int k = 0; k < cfg.shot; ++k)
                CHECK(ep.support[static_cast<std::size_t>(c * cfg.shot + k)].label ==
                      ep.episode_classes[static_cast<std::size_t>(c)]);
            for (int k = 0; k < cfg.queries; ++k)
                CHECK(ep.query[static_cast<std::size_t>(c * cfg.queries + k)].label ==
                      ep.episode_classes[static_cast<std::size_t>(c)]);
        }
    }
}

TEST_CASE("sample_episode is deterministic in the rng state") {
    const auto data = clustered_dataset(2);
    const EpisodeConfig cfg = small_episode_config();
    Rng a(33), b(33);
    const Episode ea = sample_episode(data, cfg, a);
    const Episode eb = sample_episode(data, cfg, b);
    for (std::size_t i = 0; i < ea.support.size(); ++i)
        CHECK(ea.support[i].id == eb.support[i].id);
    for (std::size_t i = 0; i < ea.query.size(); ++i)
        CHECK(ea.query[i].id == eb.query[i].id);
}

TEST_CASE("minimal two-way episode has four distinct samples") {
    std::vector<Sample> data;
    for (std::uint64_t i = 0; i < 4; ++i)
        data.push_back({i, {static_cast<double>(i)}, static_cast<int>(i % 2)});
    EpisodeConfig cfg;
    cfg.way = 2;
    cfg.shot = 1;
    cfg.queries = 1;
    Rng rng(0);
    const Episode ep = sample_episode(data, cfg, rng);
    std::set<std::uint64_t> ids;
    for (const Sample& s : ep.support) ids.insert(s.id);
    for (const Sample& s : ep.query) ids.insert(s.id);
    CHECK(ids.size() == 4);
}

TEST_CASE("classes with too few samples are excluded from episodes") {
    auto data = clustered_dataset(3, 3, 20);
    // class 3 has a single sample: never eligible
    data.push_back({999, {9.0, 9.0}, 3});
    EpisodeConfig cfg = small_episode_config();
    Rng rng(1);
    for (int rep = 0; rep < 10; ++rep) {
        const Episode ep = sample_episode(data, cfg, rng);
        for (int cls : ep.episode_classes) CHECK(cls != 3);
    }

    cfg.way = 4;  // only 3 eligible classes remain
    CHECK_THROWS_AS(sample_episode(data, cfg, rng), ConfigError);
}

TEST_CASE("prototype of a one-shot support is the lone embedding") {
    const Embedder emb = make_embedder(EmbedderKind::Identity, 2);
    const std::vector<Sample> support = {{0, {0.25, -1.5}, 1}};
    CHECK(prototype_embedding(emb, support) == support[0].features);
}

TEST_CASE("protonet episode gradients match finite differences") {
    const auto data = clustered_dataset(7);
    EpisodeConfig cfg = small_episode_config();
    Rng rng(9);
    const Episode ep = sample_episode(data, cfg, rng);

    Embedder emb = make_embedder(EmbedderKind::OneHidden, 2, 5);
    Rng init(4);
    for (double& w : emb.w1.data) w = init.normal(0.0, 0.3);
    for (double& b : emb.b1) b = init.normal(0.0, 0.1);

    EmbedderGrads grads;
    protonet_episode_loss(emb, ep, &grads);
    auto loss = [&]() { return protonet_episode_loss(emb, ep); };
    for (std::size_t i = 0; i < emb.w1.size(); ++i)
        CHECK(rel_err(grads.w1.data[i], fd(loss, &emb.w1.data[i], 1e-6)) < 1e-4);
    for (std::size_t i = 0; i < emb.b1.size(); ++i)
        CHECK(rel_err(grads.b1[i], fd(loss, &emb.b1[i], 1e-6)) < 1e-4);
}

TEST_CASE("relation episode gradients match finite differences") {
    const auto data = clustered_dataset(8);
    EpisodeConfig cfg = small_episode_config();
    Rng rng(10);
    const Episode ep = sample_episode(data, cfg, rng);

    RelationModel model =
        make_relation_model(make_embedder(EmbedderKind::OneHidden, 2, 4), 3);
    initialize_relation_model(model, 0.3, 11);
    Rng bias_rng(12);
    for (double& b : model.head.b1) b = bias_rng.normal(0.0, 0.1);
    model.head.b2 = 0.05;

    RelationGrads grads;
    relation_episode_loss(model, ep, &grads);
    auto loss = [&]() { return relation_episode_loss(model, ep); };

    for (std::size_t i = 0; i < model.embedder.w1.size(); ++i)
        CHECK(rel_err(grads.emb.w1.data[i],
                      fd(loss, &model.embedder.w1.data[i], 1e-6)) < 1e-4);
    for (std::size_t i = 0; i < model.embedder.b1.size(); ++i)
        CHECK(rel_err(grads.emb.b1[i], fd(loss, &model.embedder.b1[i], 1e-6)) <
              1e-4);
    for (std::size_t i = 0; i < model.head.w1.size(); ++i)
        CHECK(rel_err(grads.hw1.data[i], fd(loss, &model.head.w1.data[i], 1e-6)) <
              1e-4);
    for (std::size_t i = 0; i < model.head.b1.size(); ++i)
        CHECK(rel_err(grads.hb1[i], fd(loss, &model.head.b1[i], 1e-6)) < 1e-4);
    for (std::size_t i = 0; i < model.head.w2.size(); ++i)
        CHECK(rel_err(grads.hw2[i], fd(loss, &model.head.w2[i], 1e-6)) < 1e-4);
    CHECK(rel_err(grads.hb2, fd(loss, &model.head.b2, 1e-6)) < 1e-4);
}

TEST_CASE("train_protonet with zero episodes leaves the embedder unchanged") {
    const auto data = clustered_dataset(4);
    Embedder emb = make_embedder(EmbedderKind::OneHidden, 2, 4);
    Rng init(2);
    for (double& w : emb.w1.data) w = init.normal(0.0, 0.2);
    EpisodeConfig cfg = small_episode_config();
    cfg.episodes = 0;
    const Embedder out = train_protonet(emb, data, cfg);
    CHECK(out.w1.data == emb.w1.data);
    CHECK(out.b1 == emb.b1);
}

TEST_CASE("episodic training separates well-separated clusters") {
    const auto data = clustered_dataset(6, 4, 40);
    Embedder emb = make_embedder(EmbedderKind::OneHidden, 2, 8);
    Rng init(3);
    for (double& w : emb.w1.data) w = init.normal(0.0, 0.1);

    EpisodeConfig cfg;
    cfg.way = 3;
    cfg.shot = 1;
    cfg.queries = 8;
    cfg.episodes = 300;
    cfg.seed = 14;
    cfg.optim.learning_rate = 5e-3;

    const Embedder trained = train_protonet(emb, data, cfg);

    // held-out style evaluation: fresh episodes from a different stream
    Rng eval(99);
    double acc = 0.0, loss_before = 0.0, loss_after = 0.0;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
        const Episode ep = sample_episode(data, cfg, eval);
        acc += protonet_episode_accuracy(trained, ep);
        loss_before += protonet_episode_loss(emb, ep);
        loss_after += protonet_episode_loss(trained, ep);
    }
    CHECK(acc / reps >= 0.9);
    CHECK(loss_after < loss_before);
}

TEST_CASE("relationnet training scores matched pairs above mismatched") {
    const auto data = clustered_dataset(16, 4, 40);
    RelationModel model =
        make_relation_model(make_embedder(EmbedderKind::OneHidden, 2, 8), 8);
    initialize_relation_model(model, 0.1, 21);

    EpisodeConfig cfg;
    cfg.way = 3;
    cfg.shot = 1;
    cfg.queries = 8;
    cfg.episodes = 400;
    cfg.seed = 22;
    cfg.optim.learning_rate = 5e-3;

    const RelationModel trained = train_relationnet(model, data, cfg);
    CHECK(trained.trained);

    Rng eval(123);
    double matched = 0.0, mismatched = 0.0;
    std::size_t n_matched = 0, n_mismatched = 0;
    for (int rep = 0; rep < 10; ++rep) {
        const Episode ep = sample_episode(data, cfg, eval);
        for (int c = 0; c < ep.way; ++c) {
            std::vector<Sample> support(
                ep.support.begin() + c * ep.shot,
                ep.support.begin() + (c + 1) * ep.shot);
            const auto proto = prototype_embedding(trained.embedder, support);
            std::vector<double> z;
            for (std::size_t q = 0; q < ep.query.size(); ++q) {
                trained.embedder.embed(ep.query[q].features, z);
                const double s = relation_score(trained, proto, z);
                if (static_cast<int>(q) / ep.queries == c) {
                    matched += s;
                    ++n_matched;
                } else {
                    mismatched += s;
                    ++n_mismatched;
                }
            }
        }
    }
    CHECK(matched / n_matched > mismatched / n_mismatched);
}

TEST_CASE("a zeroed relation head has loss exactly 0.25 on any episode") {
    // every score is 0.5; MSE against {0,1} targets is 0.25 regardless of
    // the match/mismatch mix
    const auto data = clustered_dataset(31);
    EpisodeConfig cfg = small_episode_config();
    Rng rng(44);
    const Episode ep = sample_episode(data, cfg, rng);

    RelationModel model =
        make_relation_model(make_embedder(EmbedderKind::Identity, 2), 4);
    initialize_relation_model(model, 0.1, 45);
    model.head.w2.assign(model.head.w2.size(), 0.0);
    model.head.b2 = 0.0;
    CHECK(relation_episode_loss(model, ep) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("relation checkpoints round-trip exactly") {
    const std::string path = std::filesystem::temp_directory_path().string() +
                             "/rarefind_test_relation.csv";
    for (auto kind : {EmbedderKind::Identity, EmbedderKind::OneHidden}) {
        RelationModel model =
            make_relation_model(make_embedder(kind, 3, 5), 4);
        initialize_relation_model(model, 0.2, 61);
        model.trained = kind == EmbedderKind::OneHidden;
        write_relation_checkpoint(path, model);
        const RelationModel loaded = read_relation_checkpoint(path);
        CHECK(loaded.embedder.kind == kind);
        CHECK(loaded.trained == model.trained);
        CHECK(loaded.head.w1.data == model.head.w1.data);
        CHECK(loaded.head.b1 == model.head.b1);
        CHECK(loaded.head.w2 == model.head.w2);
        CHECK(loaded.head.b2 == model.head.b2);
        if (kind == EmbedderKind::OneHidden)
            CHECK(loaded.embedder.w1.data == model.embedder.w1.data);
    }
    std::remove(path.c_str());
}

TEST_CASE("train_relationnet with zero episodes only marks the model trained") {
    const auto data = clustered_dataset(5);
    RelationModel model =
        make_relation_model(make_embedder(EmbedderKind::Identity, 2), 4);
    initialize_relation_model(model, 0.1, 50);
    EpisodeConfig cfg = small_episode_config();
    const RelationModel out = train_relationnet(model, data, cfg);
    CHECK(out.trained);
    CHECK(out.head.w1.data == model.head.w1.data);
    CHECK(out.head.w2 == model.head.w2);
}
