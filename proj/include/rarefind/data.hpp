#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "rarefind/common.hpp"

namespace rarefind {

// One pool/training item.
struct Sample {
    std::uint64_t id = 0;
    std::vector<double> features;
    int label = 0;
};

// Isotropic Gaussian cluster: `count` draws from N(mean, stddev^2 * I).
struct ClusterSpec {
    int class_id = 0;
    std::vector<double> mean;
    double stddev = 1.0;
    std::size_t count = 0;
};

struct SplitFractions {
    double train = 0.3;
    double val = 0.1;
    double pool = 0.6;
};

struct SplitConfig {
    std::set<int> rare_classes;
    int train_per_rare = 1;
    int val_per_rare = 2;
    SplitFractions common;  // applied to every non-rare class
    std::uint64_t seed = 0;
};

// Disjoint train/validation/pool partition; the active loop's mutable state.
struct SplitBundle {
    std::vector<Sample> train;
    std::vector<Sample> validation;
    std::vector<Sample> pool;
    std::set<int> rare_classes;
    std::size_t dim = 0;
};

// Draws every cluster in spec order; ids run 0..n-1 in generation order.
// Deterministic in (specs, seed).
std::vector<Sample> generate_pool(const std::vector<ClusterSpec>& specs,
                                  std::uint64_t seed);

// Rare classes get exactly train_per_rare train / val_per_rare validation
// samples, the rest goes to the pool; common classes follow the fractions.
SplitBundle split_dataset(const std::vector<Sample>& dataset,
                          const SplitConfig& config);

// Replaces the rare class's train samples with fresh draws from
// N(spec.mean + offset, (spec.stddev * scale)^2), modeling a synthetic seed
// with a domain gap. New samples get fresh unique ids.
SplitBundle inject_synthetic_seed(const SplitBundle& bundle,
                                  const ClusterSpec& spec,
                                  const std::vector<double>& offset,
                                  double scale, std::uint64_t seed);

// Throws std::logic_error if train/validation/pool overlap by id or feature
// dimensions disagree. Used by the loop's per-iteration assertion suite.
void check_bundle(const SplitBundle& bundle);

std::set<int> bundle_classes(const SplitBundle& bundle);
std::uint64_t max_sample_id(const SplitBundle& bundle);

// CSV: header `id,label,f0,...,f{d-1}`.
void write_dataset_csv(const std::string& path, const std::vector<Sample>& dataset);
std::vector<Sample> read_dataset_csv(const std::string& path);

// CSV: header `id,split` with split in {train,val,pool}.
void write_split_csv(const std::string& path, const SplitBundle& bundle);
SplitBundle apply_split_csv(const std::vector<Sample>& dataset,
                            const std::string& path,
                            const std::set<int>& rare_classes);

}  // namespace rarefind
