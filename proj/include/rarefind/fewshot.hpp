#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rarefind/classifier.hpp"
#include "rarefind/data.hpp"
#include "rarefind/rng.hpp"

namespace rarefind {

struct EpisodeConfig {
    int way = 5;
    int shot = 1;
    int queries = 8;
    long episodes = 2000;
    std::uint64_t seed = 0;
    std::size_t relation_hidden = 8;  // relation head width
    TrainConfig optim;                // lr / betas / init_scale for episodic ADAM
};

// A way x shot support set plus query set with episode-local labels
// 0..way-1. Samples are stored class-major: class c occupies positions
// [c*shot, (c+1)*shot) in `support` and [c*queries, (c+1)*queries) in `query`.
struct Episode {
    int way = 0;
    int shot = 0;
    int queries = 0;
    std::vector<Sample> support;
    std::vector<Sample> query;
    std::vector<int> episode_classes;  // original class id per local class
};

// Uniform class and sample draws without replacement. Classes with fewer
// than shot + queries samples are excluded; fewer than `way` eligible
// classes is a configuration error.
Episode sample_episode(const std::vector<Sample>& dataset,
                       const EpisodeConfig& config, Rng& rng);

struct EmbedderGrads {
    Matrix w1;
    std::vector<double> b1;
};

// Cross-entropy over softmax of negative squared distances to class
// prototypes (mean support embeddings). Gradients w.r.t. the embedder
// parameters; zero-sized for Identity embedders.
double protonet_episode_loss(const Embedder& emb, const Episode& episode,
                             EmbedderGrads* grads = nullptr);

// Fraction of episode queries whose nearest prototype is their own class.
double protonet_episode_accuracy(const Embedder& emb, const Episode& episode);

// Returns the embedder after `episodes` episodic ADAM updates.
Embedder train_protonet(const Embedder& init, const std::vector<Sample>& dataset,
                        const EpisodeConfig& config);

// Feed-forward scorer over a concatenated (prototype, query) embedding pair:
// sigmoid(w2 . relu(w1 [p;z] + b1) + b2), output in (0,1).
struct RelationHead {
    Matrix w1;               // hidden x 2*embed_dim
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden
    double b2 = 0.0;
};

struct RelationModel {
    Embedder embedder;
    RelationHead head;
    bool trained = false;
};

RelationModel make_relation_model(const Embedder& embedder,
                                  std::size_t relation_hidden);

void initialize_relation_model(RelationModel& model, double init_scale,
                               std::uint64_t seed);

double relation_score(const RelationModel& model,
                      std::span<const double> proto_emb,
                      std::span<const double> query_emb);

struct RelationGrads {
    EmbedderGrads emb;
    Matrix hw1;
    std::vector<double> hb1;
    std::vector<double> hw2;
    double hb2 = 0.0;
};

// Mean squared error of relation scores against binary match targets
// (1 for matching class, 0 otherwise) over every (prototype, query) pair.
double relation_episode_loss(const RelationModel& model, const Episode& episode,
                             RelationGrads* grads = nullptr);

// Episodic ADAM over the shared embedder and the relation head; marks the
// returned model trained (also when episodes = 0, which leaves parameters
// untouched).
RelationModel train_relationnet(const RelationModel& init,
                                const std::vector<Sample>& dataset,
                                const EpisodeConfig& config);

// Mean embedded support vector.
std::vector<double> prototype_embedding(const Embedder& emb,
                                        std::span<const Sample> support);

// Classifier checkpoint format extended with the relation head tensors.
void write_relation_checkpoint(const std::string& path,
                               const RelationModel& model);
RelationModel read_relation_checkpoint(const std::string& path);

}  // namespace rarefind
