#include "rarefind/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "rarefind/csv.hpp"
#include "rarefind/rng.hpp"

namespace rarefind {

std::vector<Sample> generate_pool(const std::vector<ClusterSpec>& specs,
                                  std::uint64_t seed) {
    if (specs.empty()) throw ConfigError("generate_pool: empty cluster list");
    const std::size_t dim = specs.front().mean.size();
    for (const auto& s : specs) {
        if (s.mean.size() != dim)
            throw ConfigError("generate_pool: cluster for class " +
                              std::to_string(s.class_id) + " has dimension " +
                              std::to_string(s.mean.size()) + ", expected " +
                              std::to_string(dim));
        if (!(s.stddev > 0.0))
            throw ConfigError("generate_pool: cluster for class " +
                              std::to_string(s.class_id) + " has stddev <= 0");
    }

    Rng rng(derive_seed(seed, 0xda7a5e7ULL));
    std::vector<Sample> out;
    std::uint64_t next_id = 0;
    for (const auto& spec : specs) {
        for (std::size_t i = 0; i < spec.count; ++i) {
            Sample s;
            s.id = next_id++;
            s.label = spec.class_id;
            s.features.resize(dim);
            for (std::size_t d = 0; d < dim; ++d)
                s.features[d] = rng.normal(spec.mean[d], spec.stddev);
            out.push_back(std::move(s));
        }
    }
    return out;
}

namespace {

// Per-class sample indices in dataset order.
std::map<int, std::vector<std::size_t>> indices_by_class(
    const std::vector<Sample>& dataset) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        by_class[dataset[i].label].push_back(i);
    return by_class;
}

}  // namespace

SplitBundle split_dataset(const std::vector<Sample>& dataset,
                          const SplitConfig& config) {
    if (dataset.empty()) throw ConfigError("split_dataset: empty dataset");
    if (config.train_per_rare < 1)
        throw ConfigError("split_dataset: train_per_rare must be >= 1");
    if (config.val_per_rare < 0)
        throw ConfigError("split_dataset: val_per_rare must be >= 0");
    const double fsum =
        config.common.train + config.common.val + config.common.pool;
    if (std::abs(fsum - 1.0) > 1e-9)
        throw ConfigError("split_dataset: common fractions sum to " +
                          format_double(fsum) + ", expected 1");

    SplitBundle bundle;
    bundle.rare_classes = config.rare_classes;
    bundle.dim = dataset.front().features.size();

    auto by_class = indices_by_class(dataset);
    for (int rc : config.rare_classes) {
        const auto it = by_class.find(rc);
        const std::size_t have = it == by_class.end() ? 0 : it->second.size();
        const std::size_t need =
            static_cast<std::size_t>(config.train_per_rare + config.val_per_rare);
        if (have < need)
            throw ConfigError("split_dataset: rare class " + std::to_string(rc) +
                              " has " + std::to_string(have) + " samples, needs " +
                              std::to_string(need));
    }

    Rng rng(derive_seed(config.seed, 0x5b117ULL));
    for (auto& [cls, idx] : by_class) {
        rng.shuffle(idx);
        std::size_t n_train = 0, n_val = 0;
        if (config.rare_classes.count(cls)) {
            n_train = static_cast<std::size_t>(config.train_per_rare);
            n_val = static_cast<std::size_t>(config.val_per_rare);
        } else {
            const std::size_t n = idx.size();
            n_train = static_cast<std::size_t>(
                std::llround(config.common.train * static_cast<double>(n)));
            n_val = static_cast<std::size_t>(
                std::llround(config.common.val * static_cast<double>(n)));
            n_train = std::min(n_train, n);
            n_val = std::min(n_val, n - n_train);
        }
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const Sample& s = dataset[idx[i]];
            if (i < n_train)
                bundle.train.push_back(s);
            else if (i < n_train + n_val)
                bundle.validation.push_back(s);
            else
                bundle.pool.push_back(s);
        }
    }

    auto by_id = [](const Sample& a, const Sample& b) { return a.id < b.id; };
    std::sort(bundle.train.begin(), bundle.train.end(), by_id);
    std::sort(bundle.validation.begin(), bundle.validation.end(), by_id);
    std::sort(bundle.pool.begin(), bundle.pool.end(), by_id);
    check_bundle(bundle);
    return bundle;
}

SplitBundle inject_synthetic_seed(const SplitBundle& bundle,
                                  const ClusterSpec& spec,
                                  const std::vector<double>& offset,
                                  double scale, std::uint64_t seed) {
    if (!bundle.rare_classes.count(spec.class_id))
        throw UsageError("inject_synthetic_seed: class " +
                         std::to_string(spec.class_id) + " is not rare");
    if (offset.size() != bundle.dim)
        throw UsageError("inject_synthetic_seed: offset has length " +
                         std::to_string(offset.size()) + ", bundle dimension is " +
                         std::to_string(bundle.dim));
    if (!(scale > 0.0))
        throw UsageError("inject_synthetic_seed: scale must be > 0");

    SplitBundle out = bundle;
    Rng rng(derive_seed(seed, 0x5eedULL, static_cast<std::uint64_t>(spec.class_id)));
    std::uint64_t next_id = max_sample_id(bundle) + 1;
    for (Sample& s : out.train) {
        if (s.label != spec.class_id) continue;
        s.id = next_id++;
        for (std::size_t d = 0; d < bundle.dim; ++d)
            s.features[d] =
                rng.normal(spec.mean[d] + offset[d], spec.stddev * scale);
    }
    check_bundle(out);
    return out;
}

void check_bundle(const SplitBundle& bundle) {
    std::unordered_set<std::uint64_t> seen;
    auto visit = [&](const std::vector<Sample>& part, const char* name) {
        for (const Sample& s : part) {
            if (s.features.size() != bundle.dim)
                throw std::logic_error(std::string("bundle: sample ") +
                                       std::to_string(s.id) + " in " + name +
                                       " has wrong dimension");
            if (!seen.insert(s.id).second)
                throw std::logic_error("bundle: duplicate sample id " +
                                       std::to_string(s.id) + " (found in " +
                                       name + ")");
        }
    };
    visit(bundle.train, "train");
    visit(bundle.validation, "validation");
    visit(bundle.pool, "pool");
}

std::set<int> bundle_classes(const SplitBundle& bundle) {
    std::set<int> classes;
    for (const auto* part : {&bundle.train, &bundle.validation, &bundle.pool})
        for (const Sample& s : *part) classes.insert(s.label);
    return classes;
}

std::uint64_t max_sample_id(const SplitBundle& bundle) {
    std::uint64_t m = 0;
    for (const auto* part : {&bundle.train, &bundle.validation, &bundle.pool})
        for (const Sample& s : *part) m = std::max(m, s.id);
    return m;
}

void write_dataset_csv(const std::string& path,
                       const std::vector<Sample>& dataset) {
    CsvWriter w;
    const std::size_t dim = dataset.empty() ? 0 : dataset.front().features.size();
    std::vector<std::string> header = {"id", "label"};
    for (std::size_t d = 0; d < dim; ++d) header.push_back("f" + std::to_string(d));
    w.row(header);
    for (const Sample& s : dataset) {
        std::vector<std::string> cells = {std::to_string(s.id),
                                          std::to_string(s.label)};
        for (double f : s.features) cells.push_back(format_double(f));
        w.row(cells);
    }
    w.save(path);
}

std::vector<Sample> read_dataset_csv(const std::string& path) {
    auto rows = read_csv(path);
    if (rows.empty() || rows[0].size() < 2 || rows[0][0] != "id")
        throw ConfigError(path + ": not a dataset CSV (expected header id,label,f0,...)");
    const std::size_t dim = rows[0].size() - 2;
    std::vector<Sample> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        const std::string where = path + ":" + std::to_string(r + 1);
        if (cells.size() != dim + 2)
            throw ConfigError(where + ": expected " + std::to_string(dim + 2) +
                              " cells, got " + std::to_string(cells.size()));
        Sample s;
        s.id = static_cast<std::uint64_t>(parse_int(cells[0], where));
        s.label = static_cast<int>(parse_int(cells[1], where));
        s.features.resize(dim);
        for (std::size_t d = 0; d < dim; ++d)
            s.features[d] = parse_double(cells[d + 2], where);
        out.push_back(std::move(s));
    }
    return out;
}

void write_split_csv(const std::string& path, const SplitBundle& bundle) {
    // Rows ordered train, val, pool; ascending id inside each split.
    CsvWriter w;
    w.row({"id", "split"});
    for (const Sample& s : bundle.train) w.row({std::to_string(s.id), "train"});
    for (const Sample& s : bundle.validation) w.row({std::to_string(s.id), "val"});
    for (const Sample& s : bundle.pool) w.row({std::to_string(s.id), "pool"});
    w.save(path);
}

SplitBundle apply_split_csv(const std::vector<Sample>& dataset,
                            const std::string& path,
                            const std::set<int>& rare_classes) {
    auto rows = read_csv(path);
    if (rows.empty() || rows[0] != std::vector<std::string>{"id", "split"})
        throw ConfigError(path + ": not a split CSV (expected header id,split)");

    std::map<std::uint64_t, const Sample*> by_id;
    for (const Sample& s : dataset) by_id[s.id] = &s;

    SplitBundle bundle;
    bundle.rare_classes = rare_classes;
    bundle.dim = dataset.empty() ? 0 : dataset.front().features.size();
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::string where = path + ":" + std::to_string(r + 1);
        if (rows[r].size() != 2)
            throw ConfigError(where + ": expected 2 cells");
        const auto id = static_cast<std::uint64_t>(parse_int(rows[r][0], where));
        const auto it = by_id.find(id);
        if (it == by_id.end())
            throw ConfigError(where + ": id " + std::to_string(id) +
                              " not present in dataset");
        const std::string& split = rows[r][1];
        if (split == "train")
            bundle.train.push_back(*it->second);
        else if (split == "val")
            bundle.validation.push_back(*it->second);
        else if (split == "pool")
            bundle.pool.push_back(*it->second);
        else
            throw ConfigError(where + ": unknown split '" + split + "'");
    }
    check_bundle(bundle);
    return bundle;
}

}  // namespace rarefind
