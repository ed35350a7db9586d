#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rarefind/classifier.hpp"
#include "rarefind/data.hpp"
#include "rarefind/fewshot.hpp"

namespace rarefind {

enum class StrategyKind {
    MaxRareProb,    // descending estimated probability of the rare class
    Entropy,        // highest softmax entropy, pool-global
    Random,         // uniform scores, pool-global benchmark
    ProtoDistance,  // negated squared distance to the class prototype
    RelationSim,    // learned relation similarity in [0,1]
};

std::string strategy_name(StrategyKind kind);
StrategyKind parse_strategy(const std::string& name);

// True for strategies that score once per rare class (vs. once per pool).
bool strategy_is_per_class(StrategyKind kind);

// One finite score per pool sample, stored in pool order. All strategies
// share the convention "higher score = selected first".
struct ScoredPool {
    StrategyKind strategy = StrategyKind::MaxRareProb;
    int rare_class = -1;  // -1 for pool-global strategies
    std::vector<std::uint64_t> ids;
    std::vector<double> scores;
};

ScoredPool score_max_rare_prob(const Classifier& clf,
                               const std::vector<Sample>& pool, int rare_class);

ScoredPool score_entropy(const Classifier& clf, const std::vector<Sample>& pool);

ScoredPool score_random(const std::vector<Sample>& pool, std::uint64_t seed);

ScoredPool score_proto_distance(const Embedder& emb,
                                std::span<const Sample> support,
                                const std::vector<Sample>& pool);

ScoredPool score_relation(const RelationModel& model,
                          std::span<const Sample> support,
                          const std::vector<Sample>& pool);

// Ids of the n highest-scoring samples, descending by score, ties broken by
// ascending id; the whole pool (sorted) when n >= pool size.
std::vector<std::uint64_t> select_top_n(const ScoredPool& scored, std::size_t n);

// CSV: `id,score,strategy,rare_class` (rare_class empty when pool-global).
void write_scored_pool_csv(const std::string& path, const ScoredPool& scored);

}  // namespace rarefind
