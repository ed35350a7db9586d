#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rarefind/common.hpp"
#include "rarefind/data.hpp"

namespace rarefind {

enum class EmbedderKind { Identity, OneHidden };

// Maps an input feature vector to the space the linear head sees.
// Identity passes the input through; OneHidden applies relu(w1 x + b1).
struct Embedder {
    EmbedderKind kind = EmbedderKind::Identity;
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    Matrix w1;               // hidden_dim x input_dim
    std::vector<double> b1;  // hidden_dim

    std::size_t output_dim() const {
        return kind == EmbedderKind::Identity ? input_dim : hidden_dim;
    }

    // z = embed(x). `pre` (optional) receives the pre-activations needed by
    // backward passes; unused for Identity.
    void embed(std::span<const double> x, std::vector<double>& z,
               std::vector<double>* pre = nullptr) const;
};

Embedder make_embedder(EmbedderKind kind, std::size_t input_dim,
                       std::size_t hidden_dim = 0);

// Linear softmax head: row i holds the weight vector of output unit i.
struct LinearHead {
    Matrix weights;             // num_classes x embed_dim
    std::vector<double> biases; // num_classes
};

struct Classifier {
    Embedder embedder;
    LinearHead head;

    std::size_t num_classes() const { return head.biases.size(); }
    std::size_t input_dim() const { return embedder.input_dim; }
};

Classifier make_classifier(EmbedderKind kind, std::size_t input_dim,
                           std::size_t num_classes, std::size_t hidden_dim = 0);

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 200;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double init_scale = 0.1;
    std::uint64_t seed = 0;
};

// Gradients (or ADAM moments) shaped like the classifier parameters.
// w1/b1 stay empty for Identity embedders.
struct Gradients {
    Matrix w1;
    std::vector<double> b1;
    Matrix w;
    std::vector<double> b;
};

Gradients zero_gradients(const Classifier& clf);

struct AdamState {
    Gradients m;
    Gradients v;
    long t = 0;
};

AdamState make_adam_state(const Classifier& clf);

// Softmax of the head logits with max-logit subtraction; probabilities sum
// to 1 within 1e-12 and every entry lies in (0,1).
std::vector<double> softmax_probs(const Classifier& clf,
                                  std::span<const double> x);

struct BatchResult {
    double loss = 0.0;  // mean over the batch of -ln P_label
    Gradients grads;
};

// Analytic loss and gradients over dataset[indices].
BatchResult batch_loss_and_grads(const Classifier& clf,
                                 const std::vector<Sample>& dataset,
                                 std::span<const std::size_t> indices);

double batch_loss(const Classifier& clf, const std::vector<Sample>& dataset,
                  std::span<const std::size_t> indices);

// One bias-corrected ADAM update over every parameter tensor, in the
// folded step-size form: a_t = lr*sqrt(1-b2^t)/(1-b1^t),
// theta -= a_t * m / (sqrt(v) + eps). Increments state.t.
void adam_step(Classifier& clf, const Gradients& grads, AdamState& state,
               const TrainConfig& config);

// Reusable elementwise kernel behind adam_step; `t` is the post-increment
// step counter shared by all blocks of one update.
void adam_update_block(std::span<double> params, std::span<const double> grads,
                       std::span<double> m, std::span<double> v, long t,
                       const TrainConfig& config);

struct FitResult {
    Classifier model;
    std::vector<double> epoch_loss;  // mean per-sample loss, one entry per epoch
};

// Minibatch ADAM training. With reinitialize=true (the default) weights are
// redrawn i.i.d. N(0, init_scale^2) and biases zeroed under config.seed;
// warm starts pass false and continue from `clf`.
FitResult fit(const Classifier& clf, const std::vector<Sample>& train,
              const TrainConfig& config, bool reinitialize = true);

void initialize_parameters(Classifier& clf, double init_scale,
                           std::uint64_t seed);

// Central finite differences over every parameter; returns the maximum
// relative error with denominator max(|analytic|, |numeric|, 1e-12).
double grad_check(const Classifier& clf, const std::vector<Sample>& dataset,
                  std::span<const std::size_t> indices, double step);

int predict_class(const Classifier& clf, std::span<const double> x);

// Checkpoint text format: a version line, an embedder line, then one line
// per parameter tensor: name,rows,cols followed by row-major values.
void write_checkpoint(const std::string& path, const Classifier& clf);
Classifier read_checkpoint(const std::string& path);

void write_loss_history_csv(const std::string& path,
                            const std::vector<double>& epoch_loss);

}  // namespace rarefind
