#pragma once

#include <string>
#include <vector>

#include "rarefind/data.hpp"
#include "rarefind/loop.hpp"

namespace rarefind {

// Parsed form of the sectioned `key = value` experiment file. See
// docs/config.md for the key list.
struct ExperimentConfig {
    // [dataset]
    std::size_t dim = 0;
    std::uint64_t data_seed = 0;
    std::vector<ClusterSpec> clusters;
    SplitConfig split;
    std::string import_dataset;  // CSV path; alternative to clusters
    std::string import_split;

    // [seed_injection] — replace every rare train sample by a synthetic seed
    bool inject = false;
    bool offset_is_scalar = true;
    double offset_scalar = 0.0;        // radially along the class mean
    std::vector<double> offset_vector; // explicit direction, length dim
    double inject_scale = 1.0;

    // [model] + [train] + [loop] + [episode]
    LoopConfig loop;

    // [output]
    std::string output_dir;
    bool plots = true;

    // [dissect]
    int dissect_class = -1;  // -1 = first rare class
    std::size_t dissect_k = 2;
};

// Throws ConfigError with `path:line:` anchored messages on malformed input,
// unknown sections, or unknown keys.
ExperimentConfig load_experiment_config(const std::string& path);

// Generate (or import) the dataset described by the config.
std::vector<Sample> build_dataset(const ExperimentConfig& cfg);

// Dataset + split + optional synthetic-seed injection.
SplitBundle build_bundle(const ExperimentConfig& cfg,
                         const std::vector<Sample>& dataset);

// The offset vector used when injecting a synthetic seed for `spec`:
// either the configured explicit vector, or offset_scalar along the unit
// direction of the cluster mean (first axis when the mean is zero).
std::vector<double> injection_offset(const ExperimentConfig& cfg,
                                     const ClusterSpec& spec);

}  // namespace rarefind
