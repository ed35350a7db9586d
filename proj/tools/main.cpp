#include <cstdlib>
#include <array>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rarefind/config.hpp"
#include "rarefind/csv.hpp"
#include "rarefind/loop.hpp"
#include "rarefind/pca.hpp"
#include "rarefind/svg.hpp"

namespace fs = std::filesystem;
using namespace rarefind;

namespace {

std::string resolve_out_dir(const std::string& flag, const ExperimentConfig& cfg) {
    if (!flag.empty()) return flag;
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    if (const char* env = std::getenv("RAREFIND_OUTDIR"); env && *env) return env;
    return ".";
}

std::string prepare_out_dir(const std::string& flag, const ExperimentConfig& cfg) {
    const std::string dir = resolve_out_dir(flag, cfg);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " +
                              ec.message());
    return dir;
}

// Everything currently in the bundle, ascending id. With synthetic-seed
// injection the bundle holds samples that were never in the generated
// dataset, so exports are reconstructed from the bundle itself.
std::vector<Sample> bundle_union(const SplitBundle& bundle) {
    std::vector<Sample> all;
    for (const auto* part : {&bundle.train, &bundle.validation, &bundle.pool})
        all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end(),
              [](const Sample& a, const Sample& b) { return a.id < b.id; });
    return all;
}

void print_class_counts(const SplitBundle& bundle) {
    std::map<int, std::array<std::size_t, 3>> counts;
    for (const Sample& s : bundle.train) counts[s.label][0]++;
    for (const Sample& s : bundle.validation) counts[s.label][1]++;
    for (const Sample& s : bundle.pool) counts[s.label][2]++;
    for (const auto& [cls, c] : counts)
        std::cout << "class " << cls << (bundle.rare_classes.count(cls) ? " (rare)" : "")
                  << ": " << c[0] + c[1] + c[2] << " samples (train " << c[0]
                  << " / val " << c[1] << " / pool " << c[2] << ")\n";
}

std::string strategy_color(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::MaxRareProb: return "#2ca02c";
        case StrategyKind::Entropy: return "#1f77b4";
        case StrategyKind::Random: return "#ff7f0e";
        case StrategyKind::ProtoDistance: return "#9467bd";
        case StrategyKind::RelationSim: return "#8c564b";
    }
    return "#000000";
}

LineSeries aggregate_series(const RunReport& report, bool f1,
                            const std::string& label) {
    LineSeries s;
    s.label = label;
    s.color = strategy_color(report.strategy);
    for (const AggregateRow& row : report.aggregate) {
        s.x.push_back(static_cast<double>(row.t));
        s.y.push_back(f1 ? row.f1_mean : row.n_rare_mean);
        if (row.has_ci) {
            s.lo.push_back(f1 ? row.f1_ci_lo : row.n_rare_ci_lo);
            s.hi.push_back(f1 ? row.f1_ci_hi : row.n_rare_ci_hi);
        }
    }
    return s;
}

// Reference ceiling: mean rare train count if every rare pool sample
// were moved.
LineSeries max_attainable_series(const SplitBundle& bundle, std::size_t t_max) {
    double total = 0.0;
    for (int rc : bundle.rare_classes) {
        for (const Sample& s : bundle.train) total += s.label == rc ? 1.0 : 0.0;
        for (const Sample& s : bundle.pool) total += s.label == rc ? 1.0 : 0.0;
    }
    const double ceiling = total / static_cast<double>(bundle.rare_classes.size());
    LineSeries s;
    s.label = "all rare moved";
    s.color = "#999999";
    for (std::size_t t = 0; t <= t_max; ++t) {
        s.x.push_back(static_cast<double>(t));
        s.y.push_back(ceiling);
    }
    return s;
}

int cmd_generate(const std::string& config_path, const std::string& out_flag) {
    const ExperimentConfig cfg = load_experiment_config(config_path);
    const std::string dir = prepare_out_dir(out_flag, cfg);
    const std::vector<Sample> dataset = build_dataset(cfg);
    const SplitBundle bundle = build_bundle(cfg, dataset);

    write_dataset_csv(dir + "/dataset.csv", bundle_union(bundle));
    write_split_csv(dir + "/split.csv", bundle);
    print_class_counts(bundle);
    std::cout << "wrote " << dir << "/dataset.csv and " << dir << "/split.csv\n";
    return 0;
}

void write_run_outputs(const ExperimentConfig& cfg, const std::string& dir,
                       const SplitBundle& bundle, const RunReport& report,
                       const LoopArtifacts& artifacts) {
    write_runs_csv(dir + "/runs.csv", report);
    write_aggregate_csv(dir + "/aggregate.csv", report);
    write_moved_csv(dir + "/moved.csv", report);
    write_checkpoint(dir + "/checkpoint.csv", artifacts.final_model);
    write_dataset_csv(dir + "/dataset.csv", bundle_union(bundle));
    write_split_csv(dir + "/split_final.csv", artifacts.final_bundle);
    write_loss_history_csv(dir + "/loss_final.csv", artifacts.final_loss_history);

    if (cfg.plots) {
        const std::string name = strategy_name(report.strategy);
        std::vector<LineSeries> nrare = {
            aggregate_series(report, false, name),
            max_attainable_series(bundle, cfg.loop.iterations)};
        save_text(dir + "/nrare.svg",
                  line_chart_svg(nrare, "rare training samples per class", "t",
                                 "n_rare"));
        std::vector<LineSeries> f1 = {aggregate_series(report, true, name)};
        save_text(dir + "/f1.svg",
                  line_chart_svg(f1, "macro F1 on rare classes", "t", "F1"));
    }
}

int cmd_run(const std::string& config_path, const std::string& out_flag) {
    const ExperimentConfig cfg = load_experiment_config(config_path);
    const std::string dir = prepare_out_dir(out_flag, cfg);
    const std::vector<Sample> dataset = build_dataset(cfg);
    const SplitBundle bundle = build_bundle(cfg, dataset);

    LoopArtifacts artifacts;
    const RunReport report = run_active_loop(bundle, cfg.loop, &artifacts);
    write_run_outputs(cfg, dir, bundle, report, artifacts);

    for (const AggregateRow& row : report.aggregate)
        std::cout << "t=" << row.t << " n_rare=" << format_double(row.n_rare_mean)
                  << " f1_rare=" << format_double(row.f1_mean) << "\n";
    std::cout << "wrote run outputs to " << dir << "\n";
    return 0;
}

int cmd_compare(const std::vector<std::string>& config_paths,
                const std::string& out_flag) {
    if (config_paths.empty()) throw ConfigError("compare: no configs given");

    std::string dir;
    CsvWriter combined;
    combined.row({"config", "t", "strategy", "n_rare_mean", "n_rare_ci_lo",
                  "n_rare_ci_hi", "f1_mean", "f1_ci_lo", "f1_ci_hi"});
    std::vector<LineSeries> nrare_series, f1_series;
    bool plots = false;

    for (const std::string& path : config_paths) {
        const ExperimentConfig cfg = load_experiment_config(path);
        if (dir.empty()) dir = prepare_out_dir(out_flag, cfg);
        plots = plots || cfg.plots;
        const std::vector<Sample> dataset = build_dataset(cfg);
        const SplitBundle bundle = build_bundle(cfg, dataset);
        const RunReport report = run_active_loop(bundle, cfg.loop);

        const std::string stem = fs::path(path).stem().string();
        const std::string name = strategy_name(report.strategy);
        for (const AggregateRow& row : report.aggregate) {
            if (row.has_ci)
                combined.row({stem, std::to_string(row.t), name,
                              format_double(row.n_rare_mean),
                              format_double(row.n_rare_ci_lo),
                              format_double(row.n_rare_ci_hi),
                              format_double(row.f1_mean),
                              format_double(row.f1_ci_lo),
                              format_double(row.f1_ci_hi)});
            else
                combined.row({stem, std::to_string(row.t), name,
                              format_double(row.n_rare_mean), "", "",
                              format_double(row.f1_mean), "", ""});
        }
        nrare_series.push_back(aggregate_series(report, false, stem));
        f1_series.push_back(aggregate_series(report, true, stem));
        std::cout << stem << ": final n_rare="
                  << format_double(report.aggregate.back().n_rare_mean)
                  << " final f1_rare="
                  << format_double(report.aggregate.back().f1_mean) << "\n";
    }

    combined.save(dir + "/compare.csv");
    if (plots) {
        save_text(dir + "/nrare_compare.svg",
                  line_chart_svg(nrare_series, "rare training samples per class",
                                 "t", "n_rare"));
        save_text(dir + "/f1_compare.svg",
                  line_chart_svg(f1_series, "macro F1 on rare classes", "t", "F1"));
    }
    std::cout << "wrote " << dir << "/compare.csv\n";
    return 0;
}

int cmd_dissect(const std::string& config_path, const std::string& checkpoint,
                const std::string& out_flag) {
    const ExperimentConfig cfg = load_experiment_config(config_path);
    const std::string dir = prepare_out_dir(out_flag, cfg);
    if (!fs::exists(checkpoint))
        throw ConfigError("checkpoint not found: " + checkpoint);
    const Classifier clf = read_checkpoint(checkpoint);

    // Prefer the dataset + final split saved next to the checkpoint by
    // `run`; fall back to the initial bundle described by the config.
    SplitBundle bundle;
    const fs::path ck_dir = fs::path(checkpoint).parent_path();
    const fs::path data_csv = ck_dir / "dataset.csv";
    const fs::path split_csv = ck_dir / "split_final.csv";
    if (fs::exists(data_csv) && fs::exists(split_csv)) {
        bundle = apply_split_csv(read_dataset_csv(data_csv.string()),
                                 split_csv.string(), cfg.split.rare_classes);
    } else {
        bundle = build_bundle(cfg, build_dataset(cfg));
    }

    const int rare_class = cfg.dissect_class >= 0
                               ? cfg.dissect_class
                               : *bundle.rare_classes.begin();
    const auto rows = dissect_report(clf, bundle, rare_class, cfg.dissect_k);
    write_dissect_csv(dir + "/dissection.csv", rows);

    if (cfg.plots && cfg.dissect_k >= 1) {
        ScatterSeries rare, rest;
        rare.label = "rare class " + std::to_string(rare_class);
        rare.color = "#1f77b4";
        rare.cross = true;
        rest.label = "other validation samples";
        rest.color = "#2ca02c";
        for (const DissectRow& row : rows) {
            auto& series = row.label == rare_class ? rare : rest;
            series.x.push_back(row.coords[0]);
            series.y.push_back(cfg.dissect_k >= 2 ? row.coords[1] : 0.0);
        }
        save_text(dir + "/dissection.svg",
                  scatter_chart_svg({rest, rare}, "validation set projection",
                                    "c0", "c1"));
    }
    std::cout << "wrote " << dir << "/dissection.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"active search for rare classes on synthetic feature data"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint;
    std::vector<std::string> config_paths;

    auto* gen = app.add_subcommand("generate", "write dataset and split CSVs");
    gen->add_option("-c,--config", config_path, "experiment config")->required();
    gen->add_option("-o,--out", out_dir, "output directory");

    auto* run = app.add_subcommand("run", "run the active-search loop");
    run->add_option("-c,--config", config_path, "experiment config")->required();
    run->add_option("-o,--out", out_dir, "output directory");

    auto* cmp = app.add_subcommand("compare", "run several configs, one table");
    cmp->add_option("-c,--config", config_paths, "experiment configs")
        ->required()
        ->expected(-1);
    cmp->add_option("-o,--out", out_dir, "output directory");

    auto* dis = app.add_subcommand("dissect", "project validation features");
    dis->add_option("-c,--config", config_path, "experiment config")->required();
    dis->add_option("--checkpoint", checkpoint, "classifier checkpoint")
        ->required();
    dis->add_option("-o,--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(config_path, out_dir);
        if (run->parsed()) return cmd_run(config_path, out_dir);
        if (cmp->parsed()) return cmd_compare(config_paths, out_dir);
        if (dis->parsed()) return cmd_dissect(config_path, checkpoint, out_dir);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 1;
}
