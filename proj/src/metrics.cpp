#include "rarefind/metrics.hpp"

#include <cmath>

#include "rarefind/common.hpp"

namespace rarefind {

ConfusionCounts confusion_counts(std::span<const int> predictions,
                                 std::span<const int> labels) {
    if (predictions.size() != labels.size())
        throw UsageError("confusion_counts: predictions and labels differ in length");
    ConfusionCounts counts;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (predictions[i] == labels[i]) {
            counts[labels[i]].tp += 1;
        } else {
            counts[predictions[i]].fp += 1;
            counts[labels[i]].fn += 1;
        }
    }
    return counts;
}

F1Result f1_scores(std::span<const int> predictions, std::span<const int> labels,
                   const std::set<int>& class_set) {
    if (labels.empty()) throw UsageError("f1_scores: empty evaluation set");
    if (class_set.empty()) throw UsageError("f1_scores: empty class set");
    const ConfusionCounts counts = confusion_counts(predictions, labels);

    F1Result res;
    double sum = 0.0;
    for (int cls : class_set) {
        const auto it = counts.find(cls);
        double f1 = 0.0;
        if (it != counts.end() && it->second.tp > 0) {
            const auto& c = it->second;
            f1 = 2.0 * static_cast<double>(c.tp) /
                 static_cast<double>(2 * c.tp + c.fp + c.fn);
        }
        res.per_class[cls] = f1;
        sum += f1;
    }
    res.macro = sum / static_cast<double>(class_set.size());
    return res;
}

double n_rare(const SplitBundle& bundle, const std::set<int>& rare_classes) {
    if (rare_classes.empty()) throw UsageError("n_rare: empty rare class set");
    double total = 0.0;
    for (int rc : rare_classes) {
        long count = 0;
        for (const Sample& s : bundle.train)
            if (s.label == rc) ++count;
        total += static_cast<double>(count);
    }
    return total / static_cast<double>(rare_classes.size());
}

namespace {

// Continued fraction for the regularized incomplete beta (Lentz).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

double reg_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

// P(T <= t) for Student t with nu degrees of freedom.
double student_t_cdf(double t, int nu) {
    const double x = static_cast<double>(nu) / (nu + t * t);
    const double half_tail = 0.5 * reg_incomplete_beta(nu / 2.0, 0.5, x);
    return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

}  // namespace

double student_t_quantile(double p, int dof) {
    if (dof < 1) throw UsageError("student_t_quantile: dof must be >= 1");
    if (!(p > 0.0 && p < 1.0))
        throw UsageError("student_t_quantile: p must lie in (0,1)");
    if (p == 0.5) return 0.0;
    // Bisection on the CDF; monotone, so this is robust for every dof.
    double lo = 0.0, hi = 1.0;
    const double target = p > 0.5 ? p : 1.0 - p;
    while (student_t_cdf(hi, dof) < target) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, dof) < target)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-13 * std::max(1.0, hi)) break;
    }
    const double q = 0.5 * (lo + hi);
    return p > 0.5 ? q : -q;
}

MetricSummary confidence_interval(std::span<const double> values, double level) {
    if (values.size() < 2)
        throw UsageError("confidence_interval: need at least 2 values");
    if (!(level > 0.0 && level < 1.0))
        throw UsageError("confidence_interval: level must lie in (0,1)");

    const auto n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double s = std::sqrt(ss / (n - 1.0));
    const double q =
        student_t_quantile(0.5 * (1.0 + level), static_cast<int>(values.size()) - 1);
    const double half = q * s / std::sqrt(n);

    MetricSummary out;
    out.mean = mean;
    out.ci_lo = mean - half;
    out.ci_hi = mean + half;
    out.n = values.size();
    return out;
}

}  // namespace rarefind
