#include "rarefind/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "rarefind/csv.hpp"

namespace rarefind {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw ConfigError(where + ": expected true/false, got '" + v + "'");
}

ClusterSpec parse_cluster(const std::string& value, const std::string& where) {
    // class; mean components; stddev; count
    const auto fields = split_on(value, ';');
    if (fields.size() != 4)
        throw ConfigError(where +
                          ": cluster needs 4 ';'-separated fields "
                          "(class; mean; stddev; count)");
    ClusterSpec spec;
    spec.class_id = static_cast<int>(parse_int(fields[0], where));
    for (const std::string& tok : split_ws(fields[1]))
        spec.mean.push_back(parse_double(tok, where));
    if (spec.mean.empty()) throw ConfigError(where + ": cluster mean is empty");
    spec.stddev = parse_double(fields[2], where);
    const long long count = parse_int(fields[3], where);
    if (count < 0) throw ConfigError(where + ": cluster count must be >= 0");
    spec.count = static_cast<std::size_t>(count);
    return spec;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);

    ExperimentConfig cfg;
    bool saw_fractions = false;
    std::string section;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = path + ":" + std::to_string(lineno);
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(where + ": unterminated section header");
            section = line.substr(1, line.size() - 2);
            static const char* known[] = {"dataset", "model",  "train",
                                          "loop",    "episode", "seed_injection",
                                          "output",  "dissect"};
            if (std::find_if(std::begin(known), std::end(known),
                             [&](const char* k) { return section == k; }) ==
                std::end(known))
                throw ConfigError(where + ": unknown section [" + section + "]");
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(where + ": empty key or value");
        const std::string anchor = where + ": [" + section + "] " + key;

        if (section == "dataset") {
            if (key == "dim")
                cfg.dim = static_cast<std::size_t>(parse_int(value, anchor));
            else if (key == "seed") {
                cfg.data_seed = static_cast<std::uint64_t>(parse_int(value, anchor));
                cfg.split.seed = cfg.data_seed;
            } else if (key == "cluster")
                cfg.clusters.push_back(parse_cluster(value, anchor));
            else if (key == "rare_classes") {
                for (const std::string& tok : split_ws(value))
                    cfg.split.rare_classes.insert(
                        static_cast<int>(parse_int(tok, anchor)));
            } else if (key == "train_per_rare")
                cfg.split.train_per_rare = static_cast<int>(parse_int(value, anchor));
            else if (key == "val_per_rare")
                cfg.split.val_per_rare = static_cast<int>(parse_int(value, anchor));
            else if (key == "common_fractions") {
                const auto toks = split_ws(value);
                if (toks.size() != 3)
                    throw ConfigError(anchor + ": expected 3 fractions");
                cfg.split.common.train = parse_double(toks[0], anchor);
                cfg.split.common.val = parse_double(toks[1], anchor);
                cfg.split.common.pool = parse_double(toks[2], anchor);
                saw_fractions = true;
            } else if (key == "import_dataset")
                cfg.import_dataset = value;
            else if (key == "import_split")
                cfg.import_split = value;
            else
                throw ConfigError(anchor + ": unknown key");
        } else if (section == "model") {
            if (key == "embedder") {
                if (value == "identity")
                    cfg.loop.model.kind = EmbedderKind::Identity;
                else if (value == "one_hidden")
                    cfg.loop.model.kind = EmbedderKind::OneHidden;
                else
                    throw ConfigError(anchor +
                                      ": expected identity or one_hidden");
            } else if (key == "hidden_dim")
                cfg.loop.model.hidden_dim =
                    static_cast<std::size_t>(parse_int(value, anchor));
            else
                throw ConfigError(anchor + ": unknown key");
        } else if (section == "train") {
            if (key == "learning_rate")
                cfg.loop.train.learning_rate = parse_double(value, anchor);
            else if (key == "batch_size")
                cfg.loop.train.batch_size =
                    static_cast<std::size_t>(parse_int(value, anchor));
            else if (key == "epochs")
                cfg.loop.train.epochs =
                    static_cast<std::size_t>(parse_int(value, anchor));
            else if (key == "beta1")
                cfg.loop.train.beta1 = parse_double(value, anchor);
            else if (key == "beta2")
                cfg.loop.train.beta2 = parse_double(value, anchor);
            else if (key == "epsilon")
                cfg.loop.train.epsilon = parse_double(value, anchor);
            else if (key == "init_scale")
                cfg.loop.train.init_scale = parse_double(value, anchor);
            else
                throw ConfigError(anchor + ": unknown key");
        } else if (section == "loop") {
            if (key == "strategy")
                cfg.loop.strategy = parse_strategy(value);
            else if (key == "n_per_class")
                cfg.loop.n_per_class =
                    static_cast<std::size_t>(parse_int(value, anchor));
            else if (key == "iterations")
                cfg.loop.iterations =
                    static_cast<std::size_t>(parse_int(value, anchor));
            else if (key == "runs")
                cfg.loop.runs = static_cast<std::size_t>(parse_int(value, anchor));
            else if (key == "ci_level")
                cfg.loop.ci_level = parse_double(value, anchor);
            else if (key == "base_seed")
                cfg.loop.base_seed =
                    static_cast<std::uint64_t>(parse_int(value, anchor));
            else if (key == "warm_start")
                cfg.loop.warm_start = parse_bool(value, anchor);
            else if (key == "threads")
                cfg.loop.threads = static_cast<std::size_t>(parse_int(value, anchor));
            else
                throw ConfigError(anchor + ": unknown key");
        } else if (section == "episode") {
            if (key == "way")
                cfg.loop.episode.way = static_cast<int>(parse_int(value, anchor));
            else if (key == "shot")
                cfg.loop.episode.shot = static_cast<int>(parse_int(value, anchor));
            else if (key == "queries")
                cfg.loop.episode.queries =
                    static_cast<int>(parse_int(value, anchor));
            else if (key == "episodes")
                cfg.loop.episode.episodes = parse_int(value, anchor);
            else if (key == "relation_hidden")
                cfg.loop.episode.relation_hidden =
                    static_cast<std::size_t>(parse_int(value, anchor));
            else if (key == "learning_rate")
                cfg.loop.episode.optim.learning_rate = parse_double(value, anchor);
            else
                throw ConfigError(anchor + ": unknown key");
        } else if (section == "seed_injection") {
            if (key == "inject")
                cfg.inject = parse_bool(value, anchor);
            else if (key == "offset") {
                const auto toks = split_ws(value);
                if (toks.size() == 1) {
                    cfg.offset_is_scalar = true;
                    cfg.offset_scalar = parse_double(toks[0], anchor);
                } else {
                    cfg.offset_is_scalar = false;
                    cfg.offset_vector.clear();
                    for (const std::string& tok : toks)
                        cfg.offset_vector.push_back(parse_double(tok, anchor));
                }
            } else if (key == "scale")
                cfg.inject_scale = parse_double(value, anchor);
            else
                throw ConfigError(anchor + ": unknown key");
        } else if (section == "output") {
            if (key == "dir")
                cfg.output_dir = value;
            else if (key == "plots")
                cfg.plots = parse_bool(value, anchor);
            else
                throw ConfigError(anchor + ": unknown key");
        } else if (section == "dissect") {
            if (key == "rare_class")
                cfg.dissect_class = static_cast<int>(parse_int(value, anchor));
            else if (key == "k")
                cfg.dissect_k = static_cast<std::size_t>(parse_int(value, anchor));
            else
                throw ConfigError(anchor + ": unknown key");
        } else {
            throw ConfigError(where + ": key '" + key + "' before any section");
        }
    }

    // Cross-checks with key-level messages.
    if (cfg.import_dataset.empty()) {
        if (cfg.clusters.empty())
            throw ConfigError(path + ": [dataset] needs cluster lines or import_dataset");
        for (const ClusterSpec& spec : cfg.clusters)
            if (cfg.dim != 0 && spec.mean.size() != cfg.dim)
                throw ConfigError(path + ": [dataset] cluster for class " +
                                  std::to_string(spec.class_id) +
                                  " has mean of length " +
                                  std::to_string(spec.mean.size()) +
                                  ", dim says " + std::to_string(cfg.dim));
        if (cfg.dim == 0) cfg.dim = cfg.clusters.front().mean.size();
        for (int rc : cfg.split.rare_classes) {
            const bool known = std::any_of(
                cfg.clusters.begin(), cfg.clusters.end(),
                [&](const ClusterSpec& s) { return s.class_id == rc; });
            if (!known)
                throw ConfigError(path + ": [dataset] rare_classes entry " +
                                  std::to_string(rc) + " has no cluster line");
        }
    }
    if (cfg.split.rare_classes.empty())
        throw ConfigError(path + ": [dataset] rare_classes is required");
    if (saw_fractions) {
        const double fsum = cfg.split.common.train + cfg.split.common.val +
                            cfg.split.common.pool;
        if (std::abs(fsum - 1.0) > 1e-9)
            throw ConfigError(path + ": [dataset] common_fractions sum to " +
                              format_double(fsum) + ", expected 1");
    }
    if (cfg.inject && cfg.import_dataset.size())
        throw ConfigError(path +
                          ": [seed_injection] needs generated clusters, not an "
                          "imported dataset");
    if (!cfg.offset_is_scalar && cfg.offset_vector.size() != cfg.dim)
        throw ConfigError(path + ": [seed_injection] offset has length " +
                          std::to_string(cfg.offset_vector.size()) +
                          ", dim is " + std::to_string(cfg.dim));
    return cfg;
}

std::vector<Sample> build_dataset(const ExperimentConfig& cfg) {
    if (!cfg.import_dataset.empty()) return read_dataset_csv(cfg.import_dataset);
    return generate_pool(cfg.clusters, cfg.data_seed);
}

std::vector<double> injection_offset(const ExperimentConfig& cfg,
                                     const ClusterSpec& spec) {
    if (!cfg.offset_is_scalar) return cfg.offset_vector;
    std::vector<double> offset(spec.mean.size(), 0.0);
    double norm = 0.0;
    for (double v : spec.mean) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        offset[0] = cfg.offset_scalar;
    } else {
        for (std::size_t d = 0; d < spec.mean.size(); ++d)
            offset[d] = cfg.offset_scalar * spec.mean[d] / norm;
    }
    return offset;
}

SplitBundle build_bundle(const ExperimentConfig& cfg,
                         const std::vector<Sample>& dataset) {
    SplitBundle bundle;
    if (!cfg.import_split.empty())
        bundle = apply_split_csv(dataset, cfg.import_split, cfg.split.rare_classes);
    else
        bundle = split_dataset(dataset, cfg.split);

    if (cfg.inject) {
        for (const ClusterSpec& spec : cfg.clusters) {
            if (!bundle.rare_classes.count(spec.class_id)) continue;
            bundle = inject_synthetic_seed(bundle, spec, injection_offset(cfg, spec),
                                           cfg.inject_scale, cfg.data_seed);
        }
    }
    return bundle;
}

}  // namespace rarefind
