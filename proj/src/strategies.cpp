#include "rarefind/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rarefind/csv.hpp"
#include "rarefind/rng.hpp"

namespace rarefind {

std::string strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::MaxRareProb: return "max_rare_prob";
        case StrategyKind::Entropy: return "entropy";
        case StrategyKind::Random: return "random";
        case StrategyKind::ProtoDistance: return "proto_distance";
        case StrategyKind::RelationSim: return "relation_sim";
    }
    throw UsageError("strategy_name: unknown strategy");
}

StrategyKind parse_strategy(const std::string& name) {
    if (name == "max_rare_prob") return StrategyKind::MaxRareProb;
    if (name == "entropy") return StrategyKind::Entropy;
    if (name == "random") return StrategyKind::Random;
    if (name == "proto_distance") return StrategyKind::ProtoDistance;
    if (name == "relation_sim") return StrategyKind::RelationSim;
    throw ConfigError("unknown strategy '" + name +
                      "' (expected max_rare_prob|entropy|random|proto_distance|"
                      "relation_sim)");
}

bool strategy_is_per_class(StrategyKind kind) {
    return kind == StrategyKind::MaxRareProb ||
           kind == StrategyKind::ProtoDistance ||
           kind == StrategyKind::RelationSim;
}

namespace {

ScoredPool scored_shell(StrategyKind kind, int rare_class,
                        const std::vector<Sample>& pool) {
    ScoredPool out;
    out.strategy = kind;
    out.rare_class = rare_class;
    out.ids.reserve(pool.size());
    out.scores.reserve(pool.size());
    for (const Sample& s : pool) out.ids.push_back(s.id);
    return out;
}

}  // namespace

ScoredPool score_max_rare_prob(const Classifier& clf,
                               const std::vector<Sample>& pool, int rare_class) {
    if (rare_class < 0 ||
        static_cast<std::size_t>(rare_class) >= clf.num_classes())
        throw UsageError("score_max_rare_prob: rare_class " +
                         std::to_string(rare_class) + " outside [0, " +
                         std::to_string(clf.num_classes()) + ")");
    ScoredPool out = scored_shell(StrategyKind::MaxRareProb, rare_class, pool);
    for (const Sample& s : pool)
        out.scores.push_back(
            softmax_probs(clf, s.features)[static_cast<std::size_t>(rare_class)]);
    return out;
}

ScoredPool score_entropy(const Classifier& clf, const std::vector<Sample>& pool) {
    ScoredPool out = scored_shell(StrategyKind::Entropy, -1, pool);
    for (const Sample& s : pool) {
        double h = 0.0;
        for (double p : softmax_probs(clf, s.features))
            if (p > 0.0) h -= p * std::log(p);
        out.scores.push_back(h);
    }
    return out;
}

ScoredPool score_random(const std::vector<Sample>& pool, std::uint64_t seed) {
    ScoredPool out = scored_shell(StrategyKind::Random, -1, pool);
    Rng rng(derive_seed(seed, 0xa2bdULL));
    for (std::size_t i = 0; i < pool.size(); ++i)
        out.scores.push_back(rng.uniform01());
    return out;
}

ScoredPool score_proto_distance(const Embedder& emb,
                                std::span<const Sample> support,
                                const std::vector<Sample>& pool) {
    if (support.empty())
        throw UsageError("score_proto_distance: empty support set");
    const std::vector<double> proto = prototype_embedding(emb, support);
    ScoredPool out = scored_shell(StrategyKind::ProtoDistance,
                                  support.front().label, pool);
    std::vector<double> z;
    for (const Sample& s : pool) {
        emb.embed(s.features, z);
        double d2 = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) {
            const double diff = z[j] - proto[j];
            d2 += diff * diff;
        }
        out.scores.push_back(-d2);  // negated so "descending" means "closest first"
    }
    return out;
}

ScoredPool score_relation(const RelationModel& model,
                          std::span<const Sample> support,
                          const std::vector<Sample>& pool) {
    if (support.empty()) throw UsageError("score_relation: empty support set");
    if (!model.trained)
        throw UsageError("score_relation: model has not been trained");
    const std::vector<double> proto =
        prototype_embedding(model.embedder, support);
    ScoredPool out =
        scored_shell(StrategyKind::RelationSim, support.front().label, pool);
    std::vector<double> z;
    for (const Sample& s : pool) {
        model.embedder.embed(s.features, z);
        out.scores.push_back(relation_score(model, proto, z));
    }
    return out;
}

std::vector<std::uint64_t> select_top_n(const ScoredPool& scored, std::size_t n) {
    if (scored.ids.size() != scored.scores.size())
        throw UsageError("select_top_n: ids/scores length mismatch");
    std::vector<std::size_t> order(scored.ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scored.scores[a] != scored.scores[b])
            return scored.scores[a] > scored.scores[b];
        return scored.ids[a] < scored.ids[b];
    });
    const std::size_t take = std::min(n, order.size());
    std::vector<std::uint64_t> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(scored.ids[order[i]]);
    return out;
}

void write_scored_pool_csv(const std::string& path, const ScoredPool& scored) {
    CsvWriter w;
    w.row({"id", "score", "strategy", "rare_class"});
    const std::string name = strategy_name(scored.strategy);
    const std::string rc =
        scored.rare_class < 0 ? "" : std::to_string(scored.rare_class);
    for (std::size_t i = 0; i < scored.ids.size(); ++i)
        w.row({std::to_string(scored.ids[i]), format_double(scored.scores[i]),
               name, rc});
    w.save(path);
}

}  // namespace rarefind
