#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "rarefind/loop.hpp"
#include "rarefind/metrics.hpp"

using namespace rarefind;

namespace {

// Small two-common + two-rare benchmark that trains in milliseconds.
SplitBundle mini_bundle(std::uint64_t seed = 11) {
    const std::vector<ClusterSpec> specs = {
        {0, {2.0, 0.0, 0.0, 0.0}, 0.5, 80},
        {1, {0.0, 2.0, 0.0, 0.0}, 0.5, 80},
        {2, {0.0, 0.0, 2.0, 0.0}, 0.5, 15},
        {3, {0.0, 0.0, 0.0, 2.0}, 0.5, 15},
    };
    SplitConfig cfg;
    cfg.rare_classes = {2, 3};
    cfg.common = {0.5, 0.125, 0.375};
    cfg.seed = seed;
    return split_dataset(generate_pool(specs, seed), cfg);
}

LoopConfig mini_loop_config() {
    LoopConfig cfg;
    cfg.n_per_class = 3;
    cfg.iterations = 2;
    cfg.runs = 2;
    cfg.base_seed = 5;
    cfg.train.epochs = 30;
    cfg.train.batch_size = 16;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

TEST_CASE("oracle_label returns ground-truth labels for known ids") {
    const SplitBundle bundle = mini_bundle();
    std::vector<std::uint64_t> ids;
    std::vector<int> expect;
    for (const Sample& s : bundle.pool) {
        if (ids.size() >= 5) break;
        ids.push_back(s.id);
        expect.push_back(s.label);
    }
    const auto labeled = oracle_label(bundle.pool, ids);
    REQUIRE(labeled.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(labeled[i].id == ids[i]);
        CHECK(labeled[i].label == expect[i]);
    }

    CHECK(oracle_label(bundle.pool, {}).empty());
    const std::vector<std::uint64_t> unknown = {999999};
    CHECK_THROWS_AS(oracle_label(bundle.pool, unknown), UsageError);
}

TEST_CASE("zero iterations records only the initial fit") {
    const SplitBundle bundle = mini_bundle();
    LoopConfig cfg = mini_loop_config();
    cfg.iterations = 0;
    cfg.runs = 1;
    LoopArtifacts artifacts;
    const RunReport report = run_active_loop(bundle, cfg, &artifacts);
    REQUIRE(report.runs.size() == 1);
    REQUIRE(report.runs[0].size() == 1);
    CHECK(report.runs[0][0].t == 0);
    CHECK(report.runs[0][0].moved.empty());
    CHECK(report.runs[0][0].n_rare == 1.0);
    // bundle untouched
    CHECK(artifacts.final_bundle.pool.size() == bundle.pool.size());
    CHECK(artifacts.final_bundle.train.size() == bundle.train.size());
}

TEST_CASE("per-class strategies move N per rare class while the pool lasts") {
    const SplitBundle bundle = mini_bundle();
    LoopConfig cfg = mini_loop_config();
    cfg.runs = 1;
    const RunReport report = run_active_loop(bundle, cfg);
    for (std::size_t t = 1; t < report.runs[0].size(); ++t) {
        const IterationRecord& rec = report.runs[0][t];
        REQUIRE(rec.moved.size() == 2);  // one group per rare class
        std::size_t total = 0;
        for (const MovedGroup& g : rec.moved) {
            CHECK(g.ids.size() == cfg.n_per_class);
            total += g.ids.size();
        }
        CHECK(total == cfg.n_per_class * 2);
    }
}

TEST_CASE("pool-global strategies spend the whole budget in one selection") {
    const SplitBundle bundle = mini_bundle();
    LoopConfig cfg = mini_loop_config();
    cfg.runs = 1;
    cfg.strategy = StrategyKind::Random;
    const RunReport report = run_active_loop(bundle, cfg);
    for (std::size_t t = 1; t < report.runs[0].size(); ++t) {
        REQUIRE(report.runs[0][t].moved.size() == 1);
        CHECK(report.runs[0][t].moved[0].rare_class == -1);
        CHECK(report.runs[0][t].moved[0].ids.size() == cfg.n_per_class * 2);
    }
}

TEST_CASE("an exhausted pool is drained without error") {
    SplitBundle bundle = mini_bundle();
    // shrink the pool below one iteration's budget
    bundle.pool.resize(4);
    LoopConfig cfg = mini_loop_config();
    cfg.runs = 1;
    cfg.iterations = 2;
    cfg.strategy = StrategyKind::Random;  // budget 6 > 4 available
    const RunReport report = run_active_loop(bundle, cfg);
    CHECK(report.runs[0][1].moved[0].ids.size() == 4);
    CHECK(report.runs[0][2].moved[0].ids.empty());
}

TEST_CASE("moved samples never reappear and conservation holds") {
    const SplitBundle bundle = mini_bundle();
    const std::size_t total =
        bundle.train.size() + bundle.validation.size() + bundle.pool.size();
    LoopConfig cfg = mini_loop_config();
    cfg.runs = 1;
    cfg.iterations = 3;
    LoopArtifacts artifacts;
    const RunReport report = run_active_loop(bundle, cfg, &artifacts);

    std::set<std::uint64_t> moved;
    for (const IterationRecord& rec : report.runs[0])
        for (const MovedGroup& g : rec.moved)
            for (std::uint64_t id : g.ids) CHECK(moved.insert(id).second);

    const SplitBundle& fin = artifacts.final_bundle;
    CHECK(fin.train.size() + fin.validation.size() + fin.pool.size() == total);
    for (const Sample& s : fin.pool) CHECK(moved.count(s.id) == 0);
    for (std::uint64_t id : moved) {
        const bool in_train =
            std::any_of(fin.train.begin(), fin.train.end(),
                        [&](const Sample& s) { return s.id == id; });
        CHECK(in_train);
    }

    // n_rare never decreases; pool shrinks while budget is available
    double prev = 0.0;
    for (const IterationRecord& rec : report.runs[0]) {
        CHECK(rec.n_rare >= prev);
        prev = rec.n_rare;
    }
}

TEST_CASE("metrics recorded at t=0 start from one rare sample per class") {
    const SplitBundle bundle = mini_bundle();
    LoopConfig cfg = mini_loop_config();
    cfg.runs = 1;
    cfg.iterations = 1;
    const RunReport report = run_active_loop(bundle, cfg);
    CHECK(report.runs[0][0].n_rare == 1.0);
    CHECK(report.runs[0][0].f1_rare_macro >= 0.0);
    CHECK(report.runs[0][0].f1_rare_macro <= 1.0);
}

TEST_CASE("reports are identical across rerun and thread counts") {
    const SplitBundle bundle = mini_bundle();
    LoopConfig cfg = mini_loop_config();
    cfg.runs = 3;

    cfg.threads = 1;
    const RunReport a = run_active_loop(bundle, cfg);
    const RunReport b = run_active_loop(bundle, cfg);
    cfg.threads = 3;
    const RunReport c = run_active_loop(bundle, cfg);

    const std::string dir = std::filesystem::temp_directory_path().string();
    auto dump = [&](const RunReport& r, const std::string& tag) {
        write_runs_csv(dir + "/rarefind_runs_" + tag + ".csv", r);
        write_aggregate_csv(dir + "/rarefind_agg_" + tag + ".csv", r);
        write_moved_csv(dir + "/rarefind_moved_" + tag + ".csv", r);
        return slurp(dir + "/rarefind_runs_" + tag + ".csv") +
               slurp(dir + "/rarefind_agg_" + tag + ".csv") +
               slurp(dir + "/rarefind_moved_" + tag + ".csv");
    };
    const std::string da = dump(a, "a"), db = dump(b, "b"), dc = dump(c, "c");
    CHECK(da == db);
    CHECK(da == dc);
    for (const char* tag : {"a", "b", "c"})
        for (const char* kind : {"runs", "agg", "moved"})
            std::remove((dir + "/rarefind_" + kind + "_" + tag + ".csv").c_str());
}

TEST_CASE("single-run aggregates leave the CI columns empty") {
    const SplitBundle bundle = mini_bundle();
    LoopConfig cfg = mini_loop_config();
    cfg.runs = 1;
    cfg.iterations = 1;
    const RunReport report = run_active_loop(bundle, cfg);
    for (const AggregateRow& row : report.aggregate) CHECK(!row.has_ci);

    const std::string path = std::filesystem::temp_directory_path().string() +
                             "/rarefind_agg_single.csv";
    write_aggregate_csv(path, report);
    const std::string body = slurp(path);
    CHECK(body.find(",,") != std::string::npos);
    std::remove(path.c_str());
}

TEST_CASE("aggregate means and intervals match the metrics module") {
    const SplitBundle bundle = mini_bundle();
    LoopConfig cfg = mini_loop_config();
    cfg.runs = 3;
    const RunReport report = run_active_loop(bundle, cfg);
    for (std::size_t t = 0; t < report.aggregate.size(); ++t) {
        std::vector<double> nr;
        for (const auto& run : report.runs) nr.push_back(run[t].n_rare);
        const MetricSummary s = confidence_interval(nr, cfg.ci_level);
        CHECK(report.aggregate[t].n_rare_mean == s.mean);
        CHECK(report.aggregate[t].n_rare_ci_lo == s.ci_lo);
        CHECK(report.aggregate[t].n_rare_ci_hi == s.ci_hi);
        CHECK(s.ci_lo <= s.mean);
        CHECK(s.mean <= s.ci_hi);
    }
}

TEST_CASE("warm start continues from the previous parameters") {
    const SplitBundle bundle = mini_bundle();
    LoopConfig cold = mini_loop_config();
    cold.runs = 1;
    cold.iterations = 1;
    LoopConfig warm = cold;
    warm.warm_start = true;

    LoopArtifacts a, b;
    run_active_loop(bundle, cold, &a);
    run_active_loop(bundle, warm, &b);
    // same seed, same data; only the re-fit policy differs
    CHECK(a.final_model.head.weights.data != b.final_model.head.weights.data);
}

TEST_CASE("every strategy kind completes the loop") {
    const SplitBundle bundle = mini_bundle();
    LoopConfig cfg = mini_loop_config();
    cfg.runs = 1;
    cfg.iterations = 1;
    cfg.model.kind = EmbedderKind::OneHidden;
    cfg.model.hidden_dim = 6;
    cfg.episode.way = 2;
    cfg.episode.shot = 1;
    cfg.episode.queries = 4;
    cfg.episode.episodes = 20;

    for (StrategyKind kind :
         {StrategyKind::MaxRareProb, StrategyKind::Entropy, StrategyKind::Random,
          StrategyKind::ProtoDistance, StrategyKind::RelationSim}) {
        cfg.strategy = kind;
        const RunReport report = run_active_loop(bundle, cfg);
        CHECK(report.runs[0].size() == 2);
        CHECK(report.runs[0][1].n_rare >= 1.0);
    }
}
