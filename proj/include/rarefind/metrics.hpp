#pragma once

#include <map>
#include <set>
#include <span>
#include <vector>

#include "rarefind/data.hpp"

namespace rarefind {

struct ClassCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

using ConfusionCounts = std::map<int, ClassCounts>;

ConfusionCounts confusion_counts(std::span<const int> predictions,
                                 std::span<const int> labels);

struct F1Result {
    std::map<int, double> per_class;
    double macro = 0.0;  // unweighted mean over the requested class set
};

// F1 = 2tp / (2tp + fp + fn); classes with tp = 0 score 0, including the
// zero-support case (no labels and no predictions of that class).
F1Result f1_scores(std::span<const int> predictions, std::span<const int> labels,
                   const std::set<int>& class_set);

// Mean number of training samples per rare class (ground-truth labels only).
double n_rare(const SplitBundle& bundle, const std::set<int>& rare_classes);

struct MetricSummary {
    double mean = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t n = 0;
};

// Student-t interval: mean +- t_{(1+level)/2, n-1} * s / sqrt(n).
MetricSummary confidence_interval(std::span<const double> values, double level);

// Quantile of the t distribution with `dof` degrees of freedom,
// P(T <= q) = p. Computed from the regularized incomplete beta function.
double student_t_quantile(double p, int dof);

}  // namespace rarefind
