#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rarefind/classifier.hpp"
#include "rarefind/data.hpp"
#include "rarefind/fewshot.hpp"
#include "rarefind/strategies.hpp"

namespace rarefind {

struct ModelConfig {
    EmbedderKind kind = EmbedderKind::Identity;
    std::size_t hidden_dim = 16;  // used by OneHidden and few-shot embedders
};

struct LoopConfig {
    std::size_t n_per_class = 5;  // N: samples to label per rare class per iteration
    std::size_t iterations = 5;   // T
    StrategyKind strategy = StrategyKind::MaxRareProb;
    ModelConfig model;
    TrainConfig train;
    EpisodeConfig episode;  // only read by few-shot strategies
    std::size_t runs = 5;
    double ci_level = 0.95;
    std::uint64_t base_seed = 0;
    bool warm_start = false;  // keep classifier parameters across iterations
    std::size_t threads = 1;  // fan-out over runs; output independent of it
};

// Samples moved for one rare class in one iteration (class -1 for the
// pool-global strategies, which select once per iteration).
struct MovedGroup {
    int rare_class = -1;
    std::vector<std::uint64_t> ids;
    std::vector<int> true_labels;
};

struct IterationRecord {
    std::size_t t = 0;      // 0 = after the initial fit, before any selection
    double n_rare = 0.0;    // mean rare-class train count
    double f1_rare_macro = 0.0;
    double f1_overall = 0.0;
    std::vector<MovedGroup> moved;  // empty at t = 0
};

struct AggregateRow {
    std::size_t t = 0;
    double n_rare_mean = 0.0;
    double n_rare_ci_lo = 0.0;
    double n_rare_ci_hi = 0.0;
    double f1_mean = 0.0;
    double f1_ci_lo = 0.0;
    double f1_ci_hi = 0.0;
    bool has_ci = false;  // false when runs < 2
};

struct RunReport {
    StrategyKind strategy = StrategyKind::MaxRareProb;
    std::vector<std::vector<IterationRecord>> runs;  // runs x (T+1) records
    std::vector<AggregateRow> aggregate;             // T+1 rows
};

// Final state of run 0, for checkpointing and feature-space dissection.
struct LoopArtifacts {
    Classifier final_model;
    SplitBundle final_bundle;
    std::vector<double> final_loss_history;  // epoch losses of the last fit
};

// Returns the selected samples with their ground-truth labels (the simulated
// human labeler); samples outside the target class keep their true label.
std::vector<Sample> oracle_label(const std::vector<Sample>& pool,
                                 std::span<const std::uint64_t> ids);

// Algorithm: fit on train, record metrics (t=0), then `iterations` rounds of
// score / select-top-N / oracle-label / move, re-fitting and recording after
// each round. Run r uses seed base_seed + r. Conservation, disjointness,
// budget, and no-re-selection are asserted every iteration.
RunReport run_active_loop(const SplitBundle& bundle, const LoopConfig& config,
                          LoopArtifacts* artifacts = nullptr);

// CSV: `run,t,strategy,n_rare,f1_rare_macro,f1_overall`.
void write_runs_csv(const std::string& path, const RunReport& report);
// CSV: `t,strategy,n_rare_mean,n_rare_ci_lo,n_rare_ci_hi,f1_mean,f1_ci_lo,
// f1_ci_hi`; CI cells are left empty when runs == 1.
void write_aggregate_csv(const std::string& path, const RunReport& report);
// CSV: `run,t,rare_class,sample_id,true_label` (rare_class empty when global).
void write_moved_csv(const std::string& path, const RunReport& report);

}  // namespace rarefind
