#include <doctest.h>

#include <cmath>

#include "rarefind/metrics.hpp"
#include "rarefind/rng.hpp"

using namespace rarefind;

namespace {

// Independent F1 route via precision/recall, with explicit zero handling.
double f1_oracle(std::span<const int> preds, std::span<const int> labels,
                 int cls) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool p = preds[i] == cls, l = labels[i] == cls;
        if (p && l) ++tp;
        if (p && !l) ++fp;
        if (!p && l) ++fn;
    }
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

TEST_CASE("perfect predictions give F1 = 1 everywhere") {
    const std::vector<int> labels = {0, 1, 2, 0, 1, 2};
    const auto res = f1_scores(labels, labels, {0, 1, 2});
    for (const auto& [cls, f1] : res.per_class) CHECK(f1 == 1.0);
    CHECK(res.macro == 1.0);
}

TEST_CASE("tp=2 fp=1 fn=1 gives F1 = 2/3") {
    // class 0: labels at 0,1,2; predictions hit 0,1, miss 2, plus one false
    // positive at 3.
    const std::vector<int> labels = {0, 0, 0, 1};
    const std::vector<int> preds = {0, 0, 1, 0};
    const auto res = f1_scores(preds, labels, {0});
    CHECK(res.per_class.at(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("a class absent from labels and predictions scores 0") {
    const std::vector<int> labels = {0, 1};
    const std::vector<int> preds = {0, 1};
    const auto res = f1_scores(preds, labels, {0, 1, 5});
    CHECK(res.per_class.at(5) == 0.0);
    CHECK(res.macro == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("F1 equals the precision/recall oracle on random vectors") {
    Rng rng(404);
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t n = 1 + rng.below(8);
        const int classes = 1 + static_cast<int>(rng.below(4));
        std::vector<int> labels(n), preds(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(rng.below(classes));
            preds[i] = static_cast<int>(rng.below(classes));
        }
        std::set<int> class_set;
        for (int c = 0; c < classes; ++c) class_set.insert(c);
        const auto res = f1_scores(preds, labels, class_set);
        for (int c = 0; c < classes; ++c) {
            const double expect = f1_oracle(preds, labels, c);
            CHECK(res.per_class.at(c) == doctest::Approx(expect).epsilon(1e-12));
            CHECK(res.per_class.at(c) >= 0.0);
            CHECK(res.per_class.at(c) <= 1.0);
        }
    }
}

TEST_CASE("F1 is 1 exactly when fp = fn = 0 with tp > 0") {
    // one error anywhere drops F1 below 1
    const std::vector<int> labels = {0, 0, 1};
    const std::vector<int> good = {0, 0, 1};
    const std::vector<int> bad = {0, 1, 1};
    CHECK(f1_scores(good, labels, {0}).per_class.at(0) == 1.0);
    CHECK(f1_scores(bad, labels, {0}).per_class.at(0) < 1.0);
}

TEST_CASE("f1_scores rejects empty input") {
    CHECK_THROWS_AS(f1_scores({}, {}, {0}), UsageError);
    const std::vector<int> one = {0};
    CHECK_THROWS_AS(f1_scores(one, one, {}), UsageError);
}

TEST_CASE("n_rare averages rare train counts") {
    SplitBundle bundle;
    bundle.dim = 1;
    bundle.rare_classes = {5, 6, 7, 8, 9};
    std::uint64_t id = 0;
    for (int rc : bundle.rare_classes)
        bundle.train.push_back({id++, {0.0}, rc});
    CHECK(n_rare(bundle, bundle.rare_classes) == 1.0);

    // moving 3 true-rare samples of one class
    for (int i = 0; i < 3; ++i) bundle.train.push_back({id++, {0.0}, 5});
    CHECK(n_rare(bundle, bundle.rare_classes) == doctest::Approx(1.6));

    // mislabeled selections (common samples in train) do not count
    bundle.train.push_back({id++, {0.0}, 0});
    CHECK(n_rare(bundle, bundle.rare_classes) == doctest::Approx(1.6));

    CHECK_THROWS_AS(n_rare(bundle, {}), UsageError);
}

TEST_CASE("t quantiles match the tabulated 0.975 column for dof 1..30") {
    const double table[30] = {
        12.706204736432095, 4.302652729696142,  3.182446305284263,
        2.7764451051977987, 2.570581835636314,  2.4469118511449692,
        2.3646242515927844, 2.306004135204166,  2.2621571628540993,
        2.2281388519649385, 2.200985160082949,  2.1788128296634177,
        2.1603686564610127, 2.1447866879169273, 2.131449545559323,
        2.1199052992210112, 2.1098155778331806, 2.10092204024096,
        2.093024054408263,  2.0859634472658364, 2.079613844727662,
        2.0738730679040147, 2.0686576104190406, 2.0638985616280205,
        2.059538552753294,  2.055529438642871,  2.0518305164802833,
        2.048407141795244,  2.045229642132703,  2.0422724563012373};
    for (int dof = 1; dof <= 30; ++dof)
        CHECK(student_t_quantile(0.975, dof) ==
              doctest::Approx(table[dof - 1]).epsilon(1e-9));
    // symmetry and the median
    CHECK(student_t_quantile(0.025, 4) ==
          doctest::Approx(-table[3]).epsilon(1e-9));
    CHECK(student_t_quantile(0.5, 7) == 0.0);
}

TEST_CASE("confidence interval of {1..5} at 0.95 has the hand-computed width") {
    const std::vector<double> values = {1, 2, 3, 4, 5};
    const auto s = confidence_interval(values, 0.95);
    CHECK(s.mean == doctest::Approx(3.0));
    // t_{0.975,4} * sqrt(2.5) / sqrt(5)
    CHECK(s.ci_hi - s.mean == doctest::Approx(1.9632431614775607).epsilon(1e-12));
    CHECK(s.mean - s.ci_lo == doctest::Approx(1.9632431614775607).epsilon(1e-12));
    CHECK(s.n == 5);
}

TEST_CASE("identical values give a zero-width interval") {
    const std::vector<double> values = {2.5, 2.5, 2.5};
    const auto s = confidence_interval(values, 0.95);
    CHECK(s.mean == 2.5);
    CHECK(s.ci_lo == 2.5);
    CHECK(s.ci_hi == 2.5);
}

TEST_CASE("interval width grows with spread and shrinks with n") {
    const std::vector<double> tight = {1.0, 1.1, 0.9, 1.0};
    const std::vector<double> wide = {0.0, 2.0, -1.0, 3.0};
    const auto a = confidence_interval(tight, 0.95);
    const auto b = confidence_interval(wide, 0.95);
    CHECK(b.ci_hi - b.ci_lo > a.ci_hi - a.ci_lo);

    // same sample standard deviation, more observations
    const std::vector<double> few = {-1.0, 1.0};
    const std::vector<double> many = {-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0};
    const auto c = confidence_interval(few, 0.95);
    const auto d = confidence_interval(many, 0.95);
    CHECK(d.ci_hi - d.ci_lo < c.ci_hi - c.ci_lo);
}

TEST_CASE("confidence_interval rejects bad input") {
    const std::vector<double> one = {1.0};
    CHECK_THROWS_AS(confidence_interval(one, 0.95), UsageError);
    const std::vector<double> two = {1.0, 2.0};
    CHECK_THROWS_AS(confidence_interval(two, 1.0), UsageError);
    CHECK_THROWS_AS(confidence_interval(two, 0.0), UsageError);
}
