#include "rarefind/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rarefind/csv.hpp"
#include "rarefind/rng.hpp"

namespace rarefind {

void Embedder::embed(std::span<const double> x, std::vector<double>& z,
                     std::vector<double>* pre) const {
    if (x.size() != input_dim)
        throw UsageError("embed: input has length " + std::to_string(x.size()) +
                         ", expected " + std::to_string(input_dim));
    if (kind == EmbedderKind::Identity) {
        z.assign(x.begin(), x.end());
        return;
    }
    z.resize(hidden_dim);
    if (pre) pre->resize(hidden_dim);
    for (std::size_t h = 0; h < hidden_dim; ++h) {
        double a = b1[h];
        for (std::size_t d = 0; d < input_dim; ++d) a += w1(h, d) * x[d];
        if (pre) (*pre)[h] = a;
        z[h] = a > 0.0 ? a : 0.0;
    }
}

Embedder make_embedder(EmbedderKind kind, std::size_t input_dim,
                       std::size_t hidden_dim) {
    Embedder e;
    e.kind = kind;
    e.input_dim = input_dim;
    if (kind == EmbedderKind::OneHidden) {
        if (hidden_dim == 0)
            throw ConfigError("make_embedder: OneHidden needs hidden_dim > 0");
        e.hidden_dim = hidden_dim;
        e.w1 = Matrix(hidden_dim, input_dim);
        e.b1.assign(hidden_dim, 0.0);
    }
    return e;
}

Classifier make_classifier(EmbedderKind kind, std::size_t input_dim,
                           std::size_t num_classes, std::size_t hidden_dim) {
    Classifier clf;
    clf.embedder = make_embedder(kind, input_dim, hidden_dim);
    clf.head.weights = Matrix(num_classes, clf.embedder.output_dim());
    clf.head.biases.assign(num_classes, 0.0);
    return clf;
}

Gradients zero_gradients(const Classifier& clf) {
    Gradients g;
    if (clf.embedder.kind == EmbedderKind::OneHidden) {
        g.w1 = Matrix(clf.embedder.hidden_dim, clf.embedder.input_dim);
        g.b1.assign(clf.embedder.hidden_dim, 0.0);
    }
    g.w = Matrix(clf.head.weights.rows, clf.head.weights.cols);
    g.b.assign(clf.head.biases.size(), 0.0);
    return g;
}

AdamState make_adam_state(const Classifier& clf) {
    AdamState s;
    s.m = zero_gradients(clf);
    s.v = zero_gradients(clf);
    s.t = 0;
    return s;
}

namespace {

// Logits u_i = W_i . z + b_i.
void head_logits(const Classifier& clf, std::span<const double> z,
                 std::vector<double>& u) {
    const std::size_t k = clf.num_classes();
    const std::size_t m = clf.head.weights.cols;
    u.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        double a = clf.head.biases[i];
        for (std::size_t j = 0; j < m; ++j) a += clf.head.weights(i, j) * z[j];
        u[i] = a;
    }
}

// In-place softmax with max subtraction; every intermediate exp is <= 1.
void softmax_inplace(std::vector<double>& u) {
    double mx = u[0];
    for (double v : u) {
        if (!std::isfinite(v)) throw NumericError("softmax: non-finite logit");
        mx = std::max(mx, v);
    }
    double sum = 0.0;
    for (double& v : u) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : u) v /= sum;
}

}  // namespace

std::vector<double> softmax_probs(const Classifier& clf,
                                  std::span<const double> x) {
    std::vector<double> z;
    clf.embedder.embed(x, z);
    std::vector<double> p;
    head_logits(clf, z, p);
    softmax_inplace(p);
    return p;
}

BatchResult batch_loss_and_grads(const Classifier& clf,
                                 const std::vector<Sample>& dataset,
                                 std::span<const std::size_t> indices) {
    if (indices.empty())
        throw UsageError("batch_loss_and_grads: empty batch");
    const std::size_t k = clf.num_classes();
    const std::size_t m = clf.head.weights.cols;
    const bool hidden = clf.embedder.kind == EmbedderKind::OneHidden;
    const double inv_n = 1.0 / static_cast<double>(indices.size());

    BatchResult res;
    res.grads = zero_gradients(clf);

    std::vector<double> z, pre, u, dz;
    for (std::size_t idx : indices) {
        const Sample& s = dataset[idx];
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= k)
            throw UsageError("batch_loss_and_grads: label " +
                             std::to_string(s.label) + " outside [0, " +
                             std::to_string(k) + ") for sample " +
                             std::to_string(s.id));
        clf.embedder.embed(s.features, z, hidden ? &pre : nullptr);
        head_logits(clf, z, u);

        // Stable log-prob of the true label: u_y - max - ln(sum exp(u - max)).
        double mx = u[0];
        for (double v : u) {
            if (!std::isfinite(v))
                throw NumericError("batch_loss_and_grads: non-finite logit");
            mx = std::max(mx, v);
        }
        double sum = 0.0;
        for (double v : u) sum += std::exp(v - mx);
        res.loss -=
            (u[static_cast<std::size_t>(s.label)] - mx - std::log(sum)) * inv_n;

        // u becomes dL/du = (P - onehot(label)) / batch_size
        softmax_inplace(u);
        u[static_cast<std::size_t>(s.label)] -= 1.0;
        for (double& v : u) v *= inv_n;

        for (std::size_t i = 0; i < k; ++i) {
            res.grads.b[i] += u[i];
            for (std::size_t j = 0; j < m; ++j)
                res.grads.w(i, j) += u[i] * z[j];
        }
        if (hidden) {
            dz.assign(m, 0.0);
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < m; ++j)
                    dz[j] += clf.head.weights(i, j) * u[i];
            for (std::size_t h = 0; h < m; ++h) {
                if (pre[h] <= 0.0) continue;  // relu subgradient at 0 is 0
                res.grads.b1[h] += dz[h];
                for (std::size_t d = 0; d < clf.embedder.input_dim; ++d)
                    res.grads.w1(h, d) += dz[h] * s.features[d];
            }
        }
    }
    return res;
}

double batch_loss(const Classifier& clf, const std::vector<Sample>& dataset,
                  std::span<const std::size_t> indices) {
    if (indices.empty()) throw UsageError("batch_loss: empty batch");
    const std::size_t k = clf.num_classes();
    const double inv_n = 1.0 / static_cast<double>(indices.size());
    double loss = 0.0;
    std::vector<double> z, u;
    for (std::size_t idx : indices) {
        const Sample& s = dataset[idx];
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= k)
            throw UsageError("batch_loss: label outside [0, K)");
        clf.embedder.embed(s.features, z);
        head_logits(clf, z, u);
        double mx = *std::max_element(u.begin(), u.end());
        double sum = 0.0;
        for (double v : u) sum += std::exp(v - mx);
        loss -= (u[static_cast<std::size_t>(s.label)] - mx - std::log(sum)) * inv_n;
    }
    return loss;
}

void adam_update_block(std::span<double> params, std::span<const double> grads,
                       std::span<double> m, std::span<double> v, long t,
                       const TrainConfig& config) {
    const double step = config.learning_rate *
                        std::sqrt(1.0 - std::pow(config.beta2, t)) /
                        (1.0 - std::pow(config.beta1, t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        if (!std::isfinite(g))
            throw NumericError("adam: non-finite gradient entry");
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
        params[i] -= step * m[i] / (std::sqrt(v[i]) + config.epsilon);
    }
}

void adam_step(Classifier& clf, const Gradients& grads, AdamState& state,
               const TrainConfig& config) {
    state.t += 1;
    if (clf.embedder.kind == EmbedderKind::OneHidden) {
        adam_update_block(clf.embedder.w1.data, grads.w1.data, state.m.w1.data,
                          state.v.w1.data, state.t, config);
        adam_update_block(clf.embedder.b1, grads.b1, state.m.b1, state.v.b1,
                          state.t, config);
    }
    adam_update_block(clf.head.weights.data, grads.w.data, state.m.w.data,
                      state.v.w.data, state.t, config);
    adam_update_block(clf.head.biases, grads.b, state.m.b, state.v.b, state.t,
                      config);
}

void initialize_parameters(Classifier& clf, double init_scale,
                           std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x1417ULL));
    if (clf.embedder.kind == EmbedderKind::OneHidden) {
        for (double& w : clf.embedder.w1.data) w = rng.normal(0.0, init_scale);
        std::fill(clf.embedder.b1.begin(), clf.embedder.b1.end(), 0.0);
    }
    for (double& w : clf.head.weights.data) w = rng.normal(0.0, init_scale);
    std::fill(clf.head.biases.begin(), clf.head.biases.end(), 0.0);
}

FitResult fit(const Classifier& clf, const std::vector<Sample>& train,
              const TrainConfig& config, bool reinitialize) {
    if (train.empty()) throw UsageError("fit: empty training set");
    if (!(config.beta1 > 0.0 && config.beta1 < 1.0) ||
        !(config.beta2 > 0.0 && config.beta2 < 1.0))
        throw ConfigError("fit: beta1/beta2 must lie in (0,1)");
    if (!(config.epsilon > 0.0)) throw ConfigError("fit: epsilon must be > 0");
    if (config.batch_size == 0) throw ConfigError("fit: batch_size must be >= 1");

    FitResult res;
    res.model = clf;
    if (reinitialize)
        initialize_parameters(res.model, config.init_scale, config.seed);

    AdamState state = make_adam_state(res.model);
    Rng shuffle_rng(derive_seed(config.seed, 0xba7cULL));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += config.batch_size) {
            const std::size_t len =
                std::min(config.batch_size, order.size() - start);
            std::span<const std::size_t> batch(order.data() + start, len);
            BatchResult br = batch_loss_and_grads(res.model, train, batch);
            epoch_loss += br.loss * static_cast<double>(len);
            adam_step(res.model, br.grads, state, config);
        }
        res.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    return res;
}

namespace {

// Parameter tensors in checkpoint/grad_check order.
std::vector<std::pair<const char*, std::span<double>>> param_blocks(
    Classifier& clf) {
    std::vector<std::pair<const char*, std::span<double>>> blocks;
    if (clf.embedder.kind == EmbedderKind::OneHidden) {
        blocks.emplace_back("hidden.weights", std::span<double>(clf.embedder.w1.data));
        blocks.emplace_back("hidden.biases", std::span<double>(clf.embedder.b1));
    }
    blocks.emplace_back("head.weights", std::span<double>(clf.head.weights.data));
    blocks.emplace_back("head.biases", std::span<double>(clf.head.biases));
    return blocks;
}

std::vector<double> flatten_grads(const Classifier& clf, const Gradients& g) {
    std::vector<double> flat;
    if (clf.embedder.kind == EmbedderKind::OneHidden) {
        flat.insert(flat.end(), g.w1.data.begin(), g.w1.data.end());
        flat.insert(flat.end(), g.b1.begin(), g.b1.end());
    }
    flat.insert(flat.end(), g.w.data.begin(), g.w.data.end());
    flat.insert(flat.end(), g.b.begin(), g.b.end());
    return flat;
}

}  // namespace

double grad_check(const Classifier& clf, const std::vector<Sample>& dataset,
                  std::span<const std::size_t> indices, double step) {
    if (!(step > 0.0 && step <= 1e-2))
        throw UsageError("grad_check: step must lie in (0, 1e-2]");

    const std::vector<double> analytic =
        flatten_grads(clf, batch_loss_and_grads(clf, dataset, indices).grads);

    Classifier probe = clf;
    auto blocks = param_blocks(probe);
    double max_rel = 0.0;
    std::size_t flat = 0;
    for (auto& [name, span] : blocks) {
        for (std::size_t i = 0; i < span.size(); ++i, ++flat) {
            const double saved = span[i];
            span[i] = saved + step;
            const double up = batch_loss(probe, dataset, indices);
            span[i] = saved - step;
            const double down = batch_loss(probe, dataset, indices);
            span[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double denom =
                std::max({std::abs(analytic[flat]), std::abs(numeric), 1e-12});
            max_rel = std::max(max_rel, std::abs(analytic[flat] - numeric) / denom);
        }
    }
    return max_rel;
}

int predict_class(const Classifier& clf, std::span<const double> x) {
    const std::vector<double> p = softmax_probs(clf, x);
    // argmax; ties broken by lowest class id
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = i;
    return static_cast<int>(best);
}

void write_checkpoint(const std::string& path, const Classifier& clf) {
    CsvWriter w;
    w.row({"rarefind-checkpoint", "1"});
    w.row({"embedder",
           clf.embedder.kind == EmbedderKind::Identity ? "identity" : "one_hidden",
           std::to_string(clf.embedder.input_dim),
           std::to_string(clf.embedder.hidden_dim),
           std::to_string(clf.num_classes())});
    auto tensor_row = [&](const char* name, std::size_t rows, std::size_t cols,
                          std::span<const double> values) {
        std::vector<std::string> cells = {name, std::to_string(rows),
                                          std::to_string(cols)};
        for (double v : values) cells.push_back(format_double(v));
        w.row(cells);
    };
    if (clf.embedder.kind == EmbedderKind::OneHidden) {
        tensor_row("hidden.weights", clf.embedder.w1.rows, clf.embedder.w1.cols,
                   clf.embedder.w1.data);
        tensor_row("hidden.biases", 1, clf.embedder.b1.size(), clf.embedder.b1);
    }
    tensor_row("head.weights", clf.head.weights.rows, clf.head.weights.cols,
               clf.head.weights.data);
    tensor_row("head.biases", 1, clf.head.biases.size(), clf.head.biases);
    w.save(path);
}

Classifier read_checkpoint(const std::string& path) {
    auto rows = read_csv(path);
    if (rows.size() < 2 || rows[0].empty() || rows[0][0] != "rarefind-checkpoint")
        throw ConfigError(path + ": not a rarefind checkpoint");
    if (rows[1].size() != 5 || rows[1][0] != "embedder")
        throw ConfigError(path + ": malformed embedder line");
    const EmbedderKind kind = rows[1][1] == "identity" ? EmbedderKind::Identity
                                                       : EmbedderKind::OneHidden;
    const auto input_dim =
        static_cast<std::size_t>(parse_int(rows[1][2], path + ":2"));
    const auto hidden_dim =
        static_cast<std::size_t>(parse_int(rows[1][3], path + ":2"));
    const auto num_classes =
        static_cast<std::size_t>(parse_int(rows[1][4], path + ":2"));

    Classifier clf = make_classifier(kind, input_dim, num_classes, hidden_dim);
    auto blocks = param_blocks(clf);
    if (rows.size() != blocks.size() + 2)
        throw ConfigError(path + ": expected " + std::to_string(blocks.size()) +
                          " tensor lines");
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& cells = rows[b + 2];
        const std::string where = path + ":" + std::to_string(b + 3);
        if (cells.size() < 3 || cells[0] != blocks[b].first)
            throw ConfigError(where + ": expected tensor '" +
                              std::string(blocks[b].first) + "'");
        const auto n = static_cast<std::size_t>(parse_int(cells[1], where)) *
                       static_cast<std::size_t>(parse_int(cells[2], where));
        if (n != blocks[b].second.size() || cells.size() != n + 3)
            throw ConfigError(where + ": tensor shape mismatch");
        for (std::size_t i = 0; i < n; ++i)
            blocks[b].second[i] = parse_double(cells[i + 3], where);
    }
    return clf;
}

void write_loss_history_csv(const std::string& path,
                            const std::vector<double>& epoch_loss) {
    CsvWriter w;
    w.row({"epoch", "loss"});
    for (std::size_t e = 0; e < epoch_loss.size(); ++e)
        w.row({std::to_string(e + 1), format_double(epoch_loss[e])});
    w.save(path);
}

}  // namespace rarefind
