#include "rarefind/loop.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "rarefind/csv.hpp"
#include "rarefind/metrics.hpp"
#include "rarefind/rng.hpp"

namespace rarefind {

std::vector<Sample> oracle_label(const std::vector<Sample>& pool,
                                 std::span<const std::uint64_t> ids) {
    std::unordered_map<std::uint64_t, const Sample*> by_id;
    by_id.reserve(pool.size());
    for (const Sample& s : pool) by_id[s.id] = &s;

    std::vector<Sample> labeled;
    labeled.reserve(ids.size());
    for (std::uint64_t id : ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end())
            throw UsageError("oracle_label: id " + std::to_string(id) +
                             " not in pool");
        labeled.push_back(*it->second);  // ground-truth label travels with it
    }
    return labeled;
}

namespace {

struct RunContext {
    const SplitBundle* initial;
    const LoopConfig* cfg;
    std::set<int> all_classes;
    std::size_t num_classes;
};

IterationRecord record_metrics(std::size_t t, const SplitBundle& bundle,
                               const Classifier& clf, const RunContext& ctx,
                               std::vector<MovedGroup> moved) {
    std::vector<int> preds, labels;
    preds.reserve(bundle.validation.size());
    for (const Sample& s : bundle.validation) {
        preds.push_back(predict_class(clf, s.features));
        labels.push_back(s.label);
    }
    IterationRecord rec;
    rec.t = t;
    rec.n_rare = n_rare(bundle, bundle.rare_classes);
    rec.f1_rare_macro = f1_scores(preds, labels, bundle.rare_classes).macro;
    rec.f1_overall = f1_scores(preds, labels, ctx.all_classes).macro;
    rec.moved = std::move(moved);
    return rec;
}

// Move the selected ids from pool to train; returns the audit group.
MovedGroup move_selected(SplitBundle& bundle, int rare_class,
                         std::span<const std::uint64_t> ids,
                         std::unordered_set<std::uint64_t>& moved_ever) {
    const std::vector<Sample> labeled = oracle_label(bundle.pool, ids);
    MovedGroup group;
    group.rare_class = rare_class;
    std::unordered_set<std::uint64_t> selected(ids.begin(), ids.end());
    for (const Sample& s : labeled) {
        group.ids.push_back(s.id);
        group.true_labels.push_back(s.label);
        bundle.train.push_back(s);
        if (!moved_ever.insert(s.id).second)
            throw std::logic_error("active loop: sample " + std::to_string(s.id) +
                                   " moved twice");
    }
    std::erase_if(bundle.pool,
                  [&](const Sample& s) { return selected.count(s.id) > 0; });
    return group;
}

void check_no_reselection(const ScoredPool& scored,
                          const std::unordered_set<std::uint64_t>& moved_ever) {
    for (std::uint64_t id : scored.ids)
        if (moved_ever.count(id))
            throw std::logic_error("active loop: moved sample " +
                                   std::to_string(id) + " was scored again");
}

std::vector<IterationRecord> run_single(const RunContext& ctx,
                                        std::size_t run_index,
                                        LoopArtifacts* artifacts) {
    const LoopConfig& cfg = *ctx.cfg;
    const std::uint64_t run_seed = cfg.base_seed + run_index;
    SplitBundle bundle = *ctx.initial;
    const std::size_t total_samples =
        bundle.train.size() + bundle.validation.size() + bundle.pool.size();
    // Pool-global strategies spend the whole N x K budget in one selection,
    // keeping labeling cost comparable across strategies.
    const std::size_t iteration_budget =
        cfg.n_per_class * bundle.rare_classes.size();

    TrainConfig tc = cfg.train;
    tc.seed = run_seed;

    const Classifier arch = make_classifier(cfg.model.kind, bundle.dim,
                                            ctx.num_classes, cfg.model.hidden_dim);
    FitResult fitted = fit(arch, bundle.train, tc);
    Classifier clf = std::move(fitted.model);

    std::vector<IterationRecord> records;
    records.push_back(record_metrics(0, bundle, clf, ctx, {}));

    std::unordered_set<std::uint64_t> moved_ever;
    double prev_n_rare = records.back().n_rare;

    for (std::size_t t = 1; t <= cfg.iterations; ++t) {
        std::vector<MovedGroup> moved;
        std::size_t moved_total = 0;

        if (strategy_is_per_class(cfg.strategy)) {
            // Few-shot strategies re-train their scorer on the current train
            // set once per iteration (the standard classifier below is still
            // what produces the reported metrics).
            Embedder proto_emb = arch.embedder;
            RelationModel relation;
            if (cfg.strategy == StrategyKind::ProtoDistance) {
                EpisodeConfig ep = cfg.episode;
                ep.seed = derive_seed(run_seed, t, 0xe915ULL);
                Classifier fresh = arch;
                initialize_parameters(fresh, cfg.train.init_scale,
                                      derive_seed(run_seed, t, 0x111ULL));
                proto_emb = train_protonet(fresh.embedder, bundle.train, ep);
            } else if (cfg.strategy == StrategyKind::RelationSim) {
                EpisodeConfig ep = cfg.episode;
                ep.seed = derive_seed(run_seed, t, 0xe915ULL);
                RelationModel init =
                    make_relation_model(arch.embedder, cfg.episode.relation_hidden);
                initialize_relation_model(init, cfg.train.init_scale,
                                          derive_seed(run_seed, t, 0x222ULL));
                relation = train_relationnet(init, bundle.train, ep);
            }

            for (int rc : bundle.rare_classes) {
                if (bundle.pool.empty()) break;
                ScoredPool scored;
                switch (cfg.strategy) {
                    case StrategyKind::MaxRareProb:
                        scored = score_max_rare_prob(clf, bundle.pool, rc);
                        break;
                    case StrategyKind::ProtoDistance:
                    case StrategyKind::RelationSim: {
                        std::vector<Sample> support;
                        for (const Sample& s : bundle.train)
                            if (s.label == rc) support.push_back(s);
                        scored = cfg.strategy == StrategyKind::ProtoDistance
                                     ? score_proto_distance(proto_emb, support,
                                                            bundle.pool)
                                     : score_relation(relation, support,
                                                      bundle.pool);
                        break;
                    }
                    default:
                        throw std::logic_error("per-class dispatch mismatch");
                }
                check_no_reselection(scored, moved_ever);
                const auto selected = select_top_n(scored, cfg.n_per_class);
                moved.push_back(move_selected(bundle, rc, selected, moved_ever));
                moved_total += selected.size();
            }
        } else {
            ScoredPool scored =
                cfg.strategy == StrategyKind::Entropy
                    ? score_entropy(clf, bundle.pool)
                    : score_random(bundle.pool,
                                   derive_seed(run_seed, t, 0xa2bdULL));
            check_no_reselection(scored, moved_ever);
            const auto selected = select_top_n(scored, iteration_budget);
            moved.push_back(move_selected(bundle, -1, selected, moved_ever));
            moved_total += selected.size();
        }

        check_bundle(bundle);
        if (bundle.train.size() + bundle.validation.size() + bundle.pool.size() !=
            total_samples)
            throw std::logic_error("active loop: sample count not conserved");
        if (moved_total > iteration_budget)
            throw std::logic_error("active loop: budget exceeded");

        fitted = fit(cfg.warm_start ? clf : arch, bundle.train, tc, !cfg.warm_start);
        clf = std::move(fitted.model);
        records.push_back(record_metrics(t, bundle, clf, ctx, std::move(moved)));
        if (records.back().n_rare < prev_n_rare)
            throw std::logic_error("active loop: n_rare decreased");
        prev_n_rare = records.back().n_rare;
    }

    if (artifacts && run_index == 0) {
        artifacts->final_model = clf;
        artifacts->final_bundle = bundle;
        artifacts->final_loss_history = fitted.epoch_loss;
    }
    return records;
}

}  // namespace

RunReport run_active_loop(const SplitBundle& bundle, const LoopConfig& config,
                          LoopArtifacts* artifacts) {
    if (config.runs < 1) throw ConfigError("run_active_loop: runs must be >= 1");
    if (config.n_per_class < 1)
        throw ConfigError("run_active_loop: n_per_class must be >= 1");
    if (bundle.rare_classes.empty())
        throw ConfigError("run_active_loop: bundle has no rare classes");
    check_bundle(bundle);

    RunContext ctx;
    ctx.initial = &bundle;
    ctx.cfg = &config;
    ctx.all_classes = bundle_classes(bundle);
    ctx.num_classes = static_cast<std::size_t>(*ctx.all_classes.rbegin()) + 1;
    for (int rc : bundle.rare_classes)
        if (!ctx.all_classes.count(rc))
            throw ConfigError("run_active_loop: rare class " +
                              std::to_string(rc) + " absent from the dataset");

    RunReport report;
    report.strategy = config.strategy;
    report.runs.resize(config.runs);

    const std::size_t workers =
        std::max<std::size_t>(1, std::min(config.threads, config.runs));
    if (workers == 1) {
        for (std::size_t r = 0; r < config.runs; ++r)
            report.runs[r] = run_single(ctx, r, artifacts);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(config.runs);
        std::vector<std::thread> threads;
        // Results land in per-run slots, so the report is identical for any
        // worker count.
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&]() {
                for (;;) {
                    const std::size_t r = next.fetch_add(1);
                    if (r >= config.runs) return;
                    try {
                        report.runs[r] = run_single(ctx, r, artifacts);
                    } catch (...) {
                        errors[r] = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : threads) th.join();
        for (const auto& err : errors)
            if (err) std::rethrow_exception(err);
    }

    const std::size_t rows = config.iterations + 1;
    for (const auto& run : report.runs)
        if (run.size() != rows)
            throw std::logic_error("run_active_loop: run length mismatch");

    for (std::size_t t = 0; t < rows; ++t) {
        AggregateRow row;
        row.t = t;
        std::vector<double> nr, f1;
        for (const auto& run : report.runs) {
            nr.push_back(run[t].n_rare);
            f1.push_back(run[t].f1_rare_macro);
        }
        if (config.runs >= 2) {
            const MetricSummary a = confidence_interval(nr, config.ci_level);
            const MetricSummary b = confidence_interval(f1, config.ci_level);
            row.n_rare_mean = a.mean;
            row.n_rare_ci_lo = a.ci_lo;
            row.n_rare_ci_hi = a.ci_hi;
            row.f1_mean = b.mean;
            row.f1_ci_lo = b.ci_lo;
            row.f1_ci_hi = b.ci_hi;
            row.has_ci = true;
        } else {
            row.n_rare_mean = nr[0];
            row.f1_mean = f1[0];
            row.has_ci = false;
        }
        report.aggregate.push_back(row);
    }
    return report;
}

void write_runs_csv(const std::string& path, const RunReport& report) {
    CsvWriter w;
    w.row({"run", "t", "strategy", "n_rare", "f1_rare_macro", "f1_overall"});
    const std::string name = strategy_name(report.strategy);
    for (std::size_t r = 0; r < report.runs.size(); ++r)
        for (const IterationRecord& rec : report.runs[r])
            w.row({std::to_string(r), std::to_string(rec.t), name,
                   format_double(rec.n_rare), format_double(rec.f1_rare_macro),
                   format_double(rec.f1_overall)});
    w.save(path);
}

void write_aggregate_csv(const std::string& path, const RunReport& report) {
    CsvWriter w;
    w.row({"t", "strategy", "n_rare_mean", "n_rare_ci_lo", "n_rare_ci_hi",
           "f1_mean", "f1_ci_lo", "f1_ci_hi"});
    const std::string name = strategy_name(report.strategy);
    for (const AggregateRow& row : report.aggregate) {
        if (row.has_ci) {
            w.row({std::to_string(row.t), name, format_double(row.n_rare_mean),
                   format_double(row.n_rare_ci_lo), format_double(row.n_rare_ci_hi),
                   format_double(row.f1_mean), format_double(row.f1_ci_lo),
                   format_double(row.f1_ci_hi)});
        } else {
            w.row({std::to_string(row.t), name, format_double(row.n_rare_mean),
                   "", "", format_double(row.f1_mean), "", ""});
        }
    }
    w.save(path);
}

void write_moved_csv(const std::string& path, const RunReport& report) {
    CsvWriter w;
    w.row({"run", "t", "rare_class", "sample_id", "true_label"});
    for (std::size_t r = 0; r < report.runs.size(); ++r) {
        for (const IterationRecord& rec : report.runs[r]) {
            for (const MovedGroup& group : rec.moved) {
                const std::string rc = group.rare_class < 0
                                           ? ""
                                           : std::to_string(group.rare_class);
                for (std::size_t i = 0; i < group.ids.size(); ++i)
                    w.row({std::to_string(r), std::to_string(rec.t), rc,
                           std::to_string(group.ids[i]),
                           std::to_string(group.true_labels[i])});
            }
        }
    }
    w.save(path);
}

}  // namespace rarefind
