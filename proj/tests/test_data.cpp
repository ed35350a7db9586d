#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <map>

#include "rarefind/data.hpp"
#include "rarefind/rng.hpp"

using namespace rarefind;

namespace {

// The two-common + one-rare geometry used throughout the tests.
std::vector<ClusterSpec> toy_specs(std::size_t rare_count = 13) {
    return {
        {0, {-1.0, 1.0}, 0.5, 500},
        {1, {-1.0, -1.0}, 0.5, 500},
        {2, {0.0, 0.0}, 0.5, rare_count},
    };
}

std::map<int, std::size_t> count_labels(const std::vector<Sample>& samples) {
    std::map<int, std::size_t> counts;
    for (const Sample& s : samples) counts[s.label]++;
    return counts;
}

}  // namespace

TEST_CASE("generate_pool draws the requested counts with sequential ids") {
    const auto dataset = generate_pool(toy_specs(), 7);
    REQUIRE(dataset.size() == 1013);
    auto counts = count_labels(dataset);
    CHECK(counts[0] == 500);
    CHECK(counts[1] == 500);
    CHECK(counts[2] == 13);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        CHECK(dataset[i].id == i);
        CHECK(dataset[i].features.size() == 2);
    }
}

TEST_CASE("generate_pool is deterministic bit-for-bit") {
    const auto a = generate_pool(toy_specs(), 1234);
    const auto b = generate_pool(toy_specs(), 1234);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].label == b[i].label);
        CHECK(a[i].features == b[i].features);
    }
    const auto c = generate_pool(toy_specs(), 1235);
    CHECK(a[0].features != c[0].features);
}

TEST_CASE("generate_pool zero-count cluster contributes nothing") {
    auto specs = toy_specs();
    specs.push_back({3, {5.0, 5.0}, 0.5, 0});
    const auto dataset = generate_pool(specs, 7);
    CHECK(dataset.size() == 1013);
    CHECK(count_labels(dataset).count(3) == 0);
}

TEST_CASE("generate_pool sample mean and stddev converge to the spec") {
    // stderr of the mean is 0.5/sqrt(10000) = 0.005; 0.02 is a 4-sigma bound,
    // checked over several fixed seeds. The stddev estimate has stderr
    // ~ 0.5/sqrt(2*10000) = 0.0035.
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const auto dataset = generate_pool({{0, {3.0, 3.0}, 0.5, 10000}}, seed);
        double mx = 0.0, my = 0.0;
        for (const Sample& s : dataset) {
            mx += s.features[0];
            my += s.features[1];
        }
        mx /= 10000.0;
        my /= 10000.0;
        CHECK(std::abs(mx - 3.0) < 0.02);
        CHECK(std::abs(my - 3.0) < 0.02);

        double ssx = 0.0;
        for (const Sample& s : dataset)
            ssx += (s.features[0] - mx) * (s.features[0] - mx);
        CHECK(std::abs(std::sqrt(ssx / 9999.0) - 0.5) < 0.015);
    }
}

TEST_CASE("generate_pool rejects malformed specs") {
    CHECK_THROWS_AS(generate_pool({}, 0), ConfigError);
    CHECK_THROWS_AS(generate_pool({{0, {1.0, 2.0}, 0.5, 3}, {1, {1.0}, 0.5, 3}}, 0),
                    ConfigError);
    CHECK_THROWS_AS(generate_pool({{0, {1.0}, 0.0, 3}}, 0), ConfigError);
}

TEST_CASE("split_dataset gives rare classes 1 train / 2 val / rest pool") {
    std::vector<ClusterSpec> specs = {{0, {-1.0, 1.0}, 0.5, 200},
                                      {1, {0.0, 0.0}, 0.5, 53}};
    const auto dataset = generate_pool(specs, 3);
    SplitConfig cfg;
    cfg.rare_classes = {1};
    cfg.seed = 9;
    const auto bundle = split_dataset(dataset, cfg);

    auto count_in = [](const std::vector<Sample>& part, int cls) {
        std::size_t n = 0;
        for (const Sample& s : part) n += s.label == cls ? 1 : 0;
        return n;
    };
    CHECK(count_in(bundle.train, 1) == 1);
    CHECK(count_in(bundle.validation, 1) == 2);
    CHECK(count_in(bundle.pool, 1) == 50);
    CHECK(count_in(bundle.train, 0) == 60);   // 0.3 * 200
    CHECK(count_in(bundle.validation, 0) == 20);
    CHECK(count_in(bundle.pool, 0) == 120);
}

TEST_CASE("split_dataset degenerate fractions put everything in train") {
    const auto dataset = generate_pool({{0, {0.0}, 1.0, 40}}, 5);
    SplitConfig cfg;
    cfg.rare_classes = {};
    cfg.common = {1.0, 0.0, 0.0};
    // rare_classes may be empty at the split level; the loop requires them.
    const auto bundle = split_dataset(dataset, cfg);
    CHECK(bundle.train.size() == 40);
    CHECK(bundle.validation.empty());
    CHECK(bundle.pool.empty());
}

TEST_CASE("split_dataset is deterministic per seed") {
    const auto dataset = generate_pool(toy_specs(), 3);
    SplitConfig cfg;
    cfg.rare_classes = {2};
    cfg.seed = 17;
    const auto a = split_dataset(dataset, cfg);
    const auto b = split_dataset(dataset, cfg);
    auto ids = [](const std::vector<Sample>& part) {
        std::vector<std::uint64_t> out;
        for (const Sample& s : part) out.push_back(s.id);
        return out;
    };
    CHECK(ids(a.train) == ids(b.train));
    CHECK(ids(a.validation) == ids(b.validation));
    CHECK(ids(a.pool) == ids(b.pool));

    cfg.seed = 18;
    const auto c = split_dataset(dataset, cfg);
    CHECK(ids(a.train) != ids(c.train));
}

TEST_CASE("split_dataset names the rare class that is too small") {
    const auto dataset = generate_pool({{0, {0.0}, 1.0, 30}, {7, {1.0}, 1.0, 2}}, 1);
    SplitConfig cfg;
    cfg.rare_classes = {7};
    try {
        split_dataset(dataset, cfg);
        FAIL("expected ConfigError");
    } catch (const ConfigError& err) {
        CHECK(std::string(err.what()).find("7") != std::string::npos);
    }
}

TEST_CASE("split partitions preserve per-class counts and disjointness") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto dataset = generate_pool(toy_specs(20), seed);
        SplitConfig cfg;
        cfg.rare_classes = {2};
        cfg.seed = seed * 31 + 1;
        const auto bundle = split_dataset(dataset, cfg);
        CHECK_NOTHROW(check_bundle(bundle));

        std::map<int, std::size_t> combined;
        for (const auto* part :
             {&bundle.train, &bundle.validation, &bundle.pool})
            for (const Sample& s : *part) combined[s.label]++;
        CHECK(combined == count_labels(dataset));
    }
}

TEST_CASE("inject_synthetic_seed swaps only the rare train samples") {
    const auto specs = toy_specs();
    const auto dataset = generate_pool(specs, 3);
    SplitConfig cfg;
    cfg.rare_classes = {2};
    cfg.seed = 4;
    const auto bundle = split_dataset(dataset, cfg);

    const auto injected =
        inject_synthetic_seed(bundle, specs[2], {0.5, 0.0}, 0.5, 99);
    CHECK(injected.train.size() == bundle.train.size());
    CHECK(injected.validation.size() == bundle.validation.size());
    CHECK(injected.pool.size() == bundle.pool.size());

    std::size_t replaced = 0;
    for (std::size_t i = 0; i < bundle.train.size(); ++i) {
        if (bundle.train[i].label == 2) {
            CHECK(injected.train[i].id > max_sample_id(bundle));
            CHECK(injected.train[i].features != bundle.train[i].features);
            ++replaced;
        } else {
            CHECK(injected.train[i].id == bundle.train[i].id);
            CHECK(injected.train[i].features == bundle.train[i].features);
        }
    }
    CHECK(replaced == 1);
    CHECK_NOTHROW(check_bundle(injected));

    CHECK_THROWS_AS(inject_synthetic_seed(bundle, specs[0], {0.0, 0.0}, 1.0, 1),
                    UsageError);
}

TEST_CASE("inject_synthetic_seed with zero gap stays near the cluster") {
    // offset 0 / scale 1 draws from the true cluster distribution; over many
    // seeds the replacement stays within a few sigma of the mean.
    const auto specs = toy_specs(60);
    const auto dataset = generate_pool(specs, 21);
    SplitConfig cfg;
    cfg.rare_classes = {2};
    cfg.seed = 4;
    const auto bundle = split_dataset(dataset, cfg);
    double far = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto injected =
            inject_synthetic_seed(bundle, specs[2], {0.0, 0.0}, 1.0, seed);
        for (const Sample& s : injected.train)
            if (s.label == 2)
                far = std::max(far, std::hypot(s.features[0], s.features[1]));
    }
    CHECK(far < 0.5 * 5.0);  // 5 sigma over 100 draws
}

TEST_CASE("dataset and split CSV round-trip exactly") {
    const auto dataset = generate_pool(toy_specs(15), 42);
    SplitConfig cfg;
    cfg.rare_classes = {2};
    cfg.seed = 8;
    const auto bundle = split_dataset(dataset, cfg);

    const std::string dir = std::filesystem::temp_directory_path().string();
    const std::string data_path = dir + "/rarefind_test_dataset.csv";
    const std::string split_path = dir + "/rarefind_test_split.csv";
    write_dataset_csv(data_path, dataset);
    write_split_csv(split_path, bundle);

    const auto loaded = read_dataset_csv(data_path);
    REQUIRE(loaded.size() == dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        CHECK(loaded[i].id == dataset[i].id);
        CHECK(loaded[i].label == dataset[i].label);
        CHECK(loaded[i].features == dataset[i].features);  // %.17g round-trips
    }

    const auto rebuilt = apply_split_csv(loaded, split_path, {2});
    auto ids = [](const std::vector<Sample>& part) {
        std::vector<std::uint64_t> out;
        for (const Sample& s : part) out.push_back(s.id);
        return out;
    };
    CHECK(ids(rebuilt.train) == ids(bundle.train));
    CHECK(ids(rebuilt.validation) == ids(bundle.validation));
    CHECK(ids(rebuilt.pool) == ids(bundle.pool));

    std::remove(data_path.c_str());
    std::remove(split_path.c_str());
}
