#include "rarefind/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "rarefind/csv.hpp"

namespace rarefind {

Episode sample_episode(const std::vector<Sample>& dataset,
                       const EpisodeConfig& config, Rng& rng) {
    if (config.way < 2) throw ConfigError("sample_episode: way must be >= 2");
    if (config.shot < 1) throw ConfigError("sample_episode: shot must be >= 1");
    if (config.queries < 1)
        throw ConfigError("sample_episode: queries must be >= 1");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        by_class[dataset[i].label].push_back(i);

    const auto need = static_cast<std::size_t>(config.shot + config.queries);
    std::vector<int> eligible;
    for (const auto& [cls, idx] : by_class)
        if (idx.size() >= need) eligible.push_back(cls);
    if (eligible.size() < static_cast<std::size_t>(config.way))
        throw ConfigError("sample_episode: only " +
                          std::to_string(eligible.size()) +
                          " classes have >= " + std::to_string(need) +
                          " samples, need way = " + std::to_string(config.way));

    rng.shuffle(eligible);
    eligible.resize(static_cast<std::size_t>(config.way));

    Episode ep;
    ep.way = config.way;
    ep.shot = config.shot;
    ep.queries = config.queries;
    ep.episode_classes = eligible;
    for (int cls : eligible) {
        auto idx = by_class[cls];
        rng.shuffle(idx);
        for (int k = 0; k < config.shot; ++k)
            ep.support.push_back(dataset[idx[static_cast<std::size_t>(k)]]);
        for (int k = 0; k < config.queries; ++k)
            ep.query.push_back(
                dataset[idx[static_cast<std::size_t>(config.shot + k)]]);
    }
    return ep;
}

std::vector<double> prototype_embedding(const Embedder& emb,
                                        std::span<const Sample> support) {
    if (support.empty())
        throw UsageError("prototype_embedding: empty support set");
    std::vector<double> proto(emb.output_dim(), 0.0), z;
    for (const Sample& s : support) {
        emb.embed(s.features, z);
        for (std::size_t j = 0; j < proto.size(); ++j) proto[j] += z[j];
    }
    for (double& v : proto) v /= static_cast<double>(support.size());
    return proto;
}

namespace {

EmbedderGrads zero_embedder_grads(const Embedder& emb) {
    EmbedderGrads g;
    if (emb.kind == EmbedderKind::OneHidden) {
        g.w1 = Matrix(emb.hidden_dim, emb.input_dim);
        g.b1.assign(emb.hidden_dim, 0.0);
    }
    return g;
}

// dL/dz for one embedded sample -> parameter gradients.
void embedder_backward(const Embedder& emb, const Sample& sample,
                       std::span<const double> pre, std::span<const double> dz,
                       EmbedderGrads& grads) {
    if (emb.kind == EmbedderKind::Identity) return;
    for (std::size_t h = 0; h < emb.hidden_dim; ++h) {
        if (pre[h] <= 0.0) continue;
        grads.b1[h] += dz[h];
        for (std::size_t d = 0; d < emb.input_dim; ++d)
            grads.w1(h, d) += dz[h] * sample.features[d];
    }
}

struct EmbeddedSet {
    std::vector<std::vector<double>> z;
    std::vector<std::vector<double>> pre;
};

EmbeddedSet embed_all(const Embedder& emb, const std::vector<Sample>& samples) {
    EmbeddedSet out;
    out.z.resize(samples.size());
    out.pre.resize(samples.size());
    const bool hidden = emb.kind == EmbedderKind::OneHidden;
    for (std::size_t i = 0; i < samples.size(); ++i)
        emb.embed(samples[i].features, out.z[i], hidden ? &out.pre[i] : nullptr);
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

double protonet_episode_loss(const Embedder& emb, const Episode& episode,
                             EmbedderGrads* grads) {
    const auto way = static_cast<std::size_t>(episode.way);
    const auto shot = static_cast<std::size_t>(episode.shot);
    const std::size_t m = emb.output_dim();
    const std::size_t nq = episode.query.size();
    if (nq == 0 || episode.support.size() != way * shot)
        throw UsageError("protonet_episode_loss: malformed episode");

    const EmbeddedSet sup = embed_all(emb, episode.support);
    const EmbeddedSet qry = embed_all(emb, episode.query);

    std::vector<std::vector<double>> protos(way, std::vector<double>(m, 0.0));
    for (std::size_t c = 0; c < way; ++c)
        for (std::size_t k = 0; k < shot; ++k)
            for (std::size_t j = 0; j < m; ++j)
                protos[c][j] += sup.z[c * shot + k][j] / static_cast<double>(shot);

    if (grads) *grads = zero_embedder_grads(emb);

    double loss = 0.0;
    std::vector<double> logits(way), dz(m);
    std::vector<std::vector<double>> dproto(way, std::vector<double>(m, 0.0));
    for (std::size_t q = 0; q < nq; ++q) {
        const std::size_t label = q / static_cast<std::size_t>(episode.queries);
        for (std::size_t c = 0; c < way; ++c) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double diff = qry.z[q][j] - protos[c][j];
                d2 += diff * diff;
            }
            logits[c] = -d2;
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double v : logits) sum += std::exp(v - mx);
        loss -= (logits[label] - mx - std::log(sum)) / static_cast<double>(nq);

        if (!grads) continue;
        for (std::size_t c = 0; c < way; ++c) {
            const double p = std::exp(logits[c] - mx) / sum;
            const double g =
                (p - (c == label ? 1.0 : 0.0)) / static_cast<double>(nq);
            // logit_c = -|z_q - p_c|^2
            for (std::size_t j = 0; j < m; ++j) {
                const double diff = qry.z[q][j] - protos[c][j];
                dz[j] = g * (-2.0) * diff;
                dproto[c][j] += g * 2.0 * diff;
            }
            embedder_backward(emb, episode.query[q], qry.pre[q], dz, *grads);
            std::fill(dz.begin(), dz.end(), 0.0);
        }
    }

    if (grads) {
        for (std::size_t c = 0; c < way; ++c) {
            for (std::size_t j = 0; j < m; ++j)
                dproto[c][j] /= static_cast<double>(shot);
            for (std::size_t k = 0; k < shot; ++k)
                embedder_backward(emb, episode.support[c * shot + k],
                                  sup.pre[c * shot + k], dproto[c], *grads);
        }
    }
    return loss;
}

double protonet_episode_accuracy(const Embedder& emb, const Episode& episode) {
    const auto way = static_cast<std::size_t>(episode.way);
    const auto shot = static_cast<std::size_t>(episode.shot);
    const std::size_t m = emb.output_dim();
    const EmbeddedSet sup = embed_all(emb, episode.support);
    const EmbeddedSet qry = embed_all(emb, episode.query);

    std::vector<std::vector<double>> protos(way, std::vector<double>(m, 0.0));
    for (std::size_t c = 0; c < way; ++c)
        for (std::size_t k = 0; k < shot; ++k)
            for (std::size_t j = 0; j < m; ++j)
                protos[c][j] += sup.z[c * shot + k][j] / static_cast<double>(shot);

    std::size_t correct = 0;
    for (std::size_t q = 0; q < episode.query.size(); ++q) {
        const std::size_t label = q / static_cast<std::size_t>(episode.queries);
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < way; ++c) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double diff = qry.z[q][j] - protos[c][j];
                d2 += diff * diff;
            }
            if (d2 < best_d2) {
                best_d2 = d2;
                best = c;
            }
        }
        if (best == label) ++correct;
    }
    return static_cast<double>(correct) /
           static_cast<double>(episode.query.size());
}

Embedder train_protonet(const Embedder& init, const std::vector<Sample>& dataset,
                        const EpisodeConfig& config) {
    Embedder emb = init;
    if (emb.kind == EmbedderKind::Identity) return emb;  // no parameters

    Rng rng(derive_seed(config.seed, 0x9107ULL));
    std::vector<double> mw(emb.w1.size(), 0.0), vw(emb.w1.size(), 0.0);
    std::vector<double> mb(emb.b1.size(), 0.0), vb(emb.b1.size(), 0.0);

    EmbedderGrads grads;
    for (long t = 1; t <= config.episodes; ++t) {
        const Episode ep = sample_episode(dataset, config, rng);
        protonet_episode_loss(emb, ep, &grads);
        adam_update_block(emb.w1.data, grads.w1.data, mw, vw, t, config.optim);
        adam_update_block(emb.b1, grads.b1, mb, vb, t, config.optim);
    }
    return emb;
}

RelationModel make_relation_model(const Embedder& embedder,
                                  std::size_t relation_hidden) {
    if (relation_hidden == 0)
        throw ConfigError("make_relation_model: relation_hidden must be >= 1");
    RelationModel model;
    model.embedder = embedder;
    const std::size_t m = embedder.output_dim();
    model.head.w1 = Matrix(relation_hidden, 2 * m);
    model.head.b1.assign(relation_hidden, 0.0);
    model.head.w2.assign(relation_hidden, 0.0);
    model.head.b2 = 0.0;
    return model;
}

void initialize_relation_model(RelationModel& model, double init_scale,
                               std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x4e1a7ULL));
    if (model.embedder.kind == EmbedderKind::OneHidden) {
        for (double& w : model.embedder.w1.data) w = rng.normal(0.0, init_scale);
        std::fill(model.embedder.b1.begin(), model.embedder.b1.end(), 0.0);
    }
    for (double& w : model.head.w1.data) w = rng.normal(0.0, init_scale);
    std::fill(model.head.b1.begin(), model.head.b1.end(), 0.0);
    for (double& w : model.head.w2) w = rng.normal(0.0, init_scale);
    model.head.b2 = 0.0;
}

namespace {

// Forward pass of the relation head; returns the score and fills the hidden
// activations needed by backward.
double relation_forward(const RelationHead& head, std::span<const double> proto,
                        std::span<const double> query,
                        std::vector<double>* hidden_pre = nullptr,
                        std::vector<double>* hidden_act = nullptr) {
    const std::size_t hr = head.b1.size();
    const std::size_t m = proto.size();
    double out = head.b2;
    if (hidden_pre) hidden_pre->resize(hr);
    if (hidden_act) hidden_act->resize(hr);
    for (std::size_t h = 0; h < hr; ++h) {
        double a = head.b1[h];
        for (std::size_t j = 0; j < m; ++j) a += head.w1(h, j) * proto[j];
        for (std::size_t j = 0; j < m; ++j) a += head.w1(h, m + j) * query[j];
        const double act = a > 0.0 ? a : 0.0;
        if (hidden_pre) (*hidden_pre)[h] = a;
        if (hidden_act) (*hidden_act)[h] = act;
        out += head.w2[h] * act;
    }
    return sigmoid(out);
}

}  // namespace

double relation_score(const RelationModel& model,
                      std::span<const double> proto_emb,
                      std::span<const double> query_emb) {
    if (!model.trained)
        throw UsageError("relation_score: model has not been trained");
    return relation_forward(model.head, proto_emb, query_emb);
}

double relation_episode_loss(const RelationModel& model, const Episode& episode,
                             RelationGrads* grads) {
    const Embedder& emb = model.embedder;
    const auto way = static_cast<std::size_t>(episode.way);
    const auto shot = static_cast<std::size_t>(episode.shot);
    const std::size_t m = emb.output_dim();
    const std::size_t nq = episode.query.size();
    const std::size_t hr = model.head.b1.size();

    const EmbeddedSet sup = embed_all(emb, episode.support);
    const EmbeddedSet qry = embed_all(emb, episode.query);

    std::vector<std::vector<double>> protos(way, std::vector<double>(m, 0.0));
    for (std::size_t c = 0; c < way; ++c)
        for (std::size_t k = 0; k < shot; ++k)
            for (std::size_t j = 0; j < m; ++j)
                protos[c][j] += sup.z[c * shot + k][j] / static_cast<double>(shot);

    if (grads) {
        grads->emb = zero_embedder_grads(emb);
        grads->hw1 = Matrix(hr, 2 * m);
        grads->hb1.assign(hr, 0.0);
        grads->hw2.assign(hr, 0.0);
        grads->hb2 = 0.0;
    }

    const double inv_pairs = 1.0 / static_cast<double>(way * nq);
    double loss = 0.0;
    std::vector<double> hpre, hact, dz(m);
    std::vector<std::vector<double>> dproto(way, std::vector<double>(m, 0.0));
    std::vector<std::vector<double>> dquery(nq, std::vector<double>(m, 0.0));
    for (std::size_t c = 0; c < way; ++c) {
        for (std::size_t q = 0; q < nq; ++q) {
            const std::size_t label = q / static_cast<std::size_t>(episode.queries);
            const double target = label == c ? 1.0 : 0.0;
            const double s =
                relation_forward(model.head, protos[c], qry.z[q], &hpre, &hact);
            loss += (s - target) * (s - target) * inv_pairs;

            if (!grads) continue;
            const double dpre2 = 2.0 * (s - target) * inv_pairs * s * (1.0 - s);
            grads->hb2 += dpre2;
            for (std::size_t h = 0; h < hr; ++h) {
                grads->hw2[h] += dpre2 * hact[h];
                if (hpre[h] <= 0.0) continue;
                const double dpre1 = dpre2 * model.head.w2[h];
                grads->hb1[h] += dpre1;
                for (std::size_t j = 0; j < m; ++j) {
                    grads->hw1(h, j) += dpre1 * protos[c][j];
                    grads->hw1(h, m + j) += dpre1 * qry.z[q][j];
                    dproto[c][j] += dpre1 * model.head.w1(h, j);
                    dquery[q][j] += dpre1 * model.head.w1(h, m + j);
                }
            }
        }
    }

    if (grads && emb.kind == EmbedderKind::OneHidden) {
        for (std::size_t q = 0; q < nq; ++q)
            embedder_backward(emb, episode.query[q], qry.pre[q], dquery[q],
                              grads->emb);
        for (std::size_t c = 0; c < way; ++c) {
            for (std::size_t j = 0; j < m; ++j)
                dproto[c][j] /= static_cast<double>(shot);
            for (std::size_t k = 0; k < shot; ++k)
                embedder_backward(emb, episode.support[c * shot + k],
                                  sup.pre[c * shot + k], dproto[c], grads->emb);
        }
    }
    return loss;
}

void write_relation_checkpoint(const std::string& path,
                               const RelationModel& model) {
    CsvWriter w;
    w.row({"rarefind-relation-checkpoint", "1"});
    const Embedder& emb = model.embedder;
    w.row({"embedder",
           emb.kind == EmbedderKind::Identity ? "identity" : "one_hidden",
           std::to_string(emb.input_dim), std::to_string(emb.hidden_dim),
           std::to_string(model.head.b1.size()), model.trained ? "1" : "0"});
    auto tensor_row = [&](const char* name, std::size_t rows, std::size_t cols,
                          std::span<const double> values) {
        std::vector<std::string> cells = {name, std::to_string(rows),
                                          std::to_string(cols)};
        for (double v : values) cells.push_back(format_double(v));
        w.row(cells);
    };
    if (emb.kind == EmbedderKind::OneHidden) {
        tensor_row("hidden.weights", emb.w1.rows, emb.w1.cols, emb.w1.data);
        tensor_row("hidden.biases", 1, emb.b1.size(), emb.b1);
    }
    tensor_row("relation.weights", model.head.w1.rows, model.head.w1.cols,
               model.head.w1.data);
    tensor_row("relation.biases", 1, model.head.b1.size(), model.head.b1);
    tensor_row("relation.out_weights", 1, model.head.w2.size(), model.head.w2);
    tensor_row("relation.out_bias", 1, 1,
               std::span<const double>(&model.head.b2, 1));
    w.save(path);
}

RelationModel read_relation_checkpoint(const std::string& path) {
    auto rows = read_csv(path);
    if (rows.size() < 2 || rows[0].empty() ||
        rows[0][0] != "rarefind-relation-checkpoint")
        throw ConfigError(path + ": not a relation checkpoint");
    if (rows[1].size() != 6 || rows[1][0] != "embedder")
        throw ConfigError(path + ": malformed embedder line");
    const EmbedderKind kind = rows[1][1] == "identity" ? EmbedderKind::Identity
                                                       : EmbedderKind::OneHidden;
    const auto input_dim =
        static_cast<std::size_t>(parse_int(rows[1][2], path + ":2"));
    const auto hidden_dim =
        static_cast<std::size_t>(parse_int(rows[1][3], path + ":2"));
    const auto relation_hidden =
        static_cast<std::size_t>(parse_int(rows[1][4], path + ":2"));

    RelationModel model = make_relation_model(
        make_embedder(kind, input_dim, hidden_dim), relation_hidden);
    model.trained = rows[1][5] == "1";

    std::vector<std::pair<const char*, std::span<double>>> blocks;
    if (kind == EmbedderKind::OneHidden) {
        blocks.emplace_back("hidden.weights",
                            std::span<double>(model.embedder.w1.data));
        blocks.emplace_back("hidden.biases", std::span<double>(model.embedder.b1));
    }
    blocks.emplace_back("relation.weights", std::span<double>(model.head.w1.data));
    blocks.emplace_back("relation.biases", std::span<double>(model.head.b1));
    blocks.emplace_back("relation.out_weights", std::span<double>(model.head.w2));
    blocks.emplace_back("relation.out_bias", std::span<double>(&model.head.b2, 1));
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
    return model;
}

RelationModel train_relationnet(const RelationModel& init,
                                const std::vector<Sample>& dataset,
                                const EpisodeConfig& config) {
    RelationModel model = init;
    model.trained = true;
    if (config.episodes == 0) return model;

    Rng rng(derive_seed(config.seed, 0x4e1a7ULL, 0x7a41ULL));
    const bool hidden_emb = model.embedder.kind == EmbedderKind::OneHidden;
    std::vector<double> mew(hidden_emb ? model.embedder.w1.size() : 0, 0.0);
    std::vector<double> vew(mew.size(), 0.0);
    std::vector<double> meb(hidden_emb ? model.embedder.b1.size() : 0, 0.0);
    std::vector<double> veb(meb.size(), 0.0);
    std::vector<double> mh1(model.head.w1.size(), 0.0), vh1(model.head.w1.size(), 0.0);
    std::vector<double> mb1(model.head.b1.size(), 0.0), vb1(model.head.b1.size(), 0.0);
    std::vector<double> mh2(model.head.w2.size(), 0.0), vh2(model.head.w2.size(), 0.0);
    double mb2 = 0.0, vb2 = 0.0;

    RelationGrads grads;
    for (long t = 1; t <= config.episodes; ++t) {
        const Episode ep = sample_episode(dataset, config, rng);
        relation_episode_loss(model, ep, &grads);
        if (hidden_emb) {
            adam_update_block(model.embedder.w1.data, grads.emb.w1.data, mew, vew,
                              t, config.optim);
            adam_update_block(model.embedder.b1, grads.emb.b1, meb, veb, t,
                              config.optim);
        }
        adam_update_block(model.head.w1.data, grads.hw1.data, mh1, vh1, t,
                          config.optim);
        adam_update_block(model.head.b1, grads.hb1, mb1, vb1, t, config.optim);
        adam_update_block(model.head.w2, grads.hw2, mh2, vh2, t, config.optim);
        adam_update_block(std::span<double>(&model.head.b2, 1),
                          std::span<const double>(&grads.hb2, 1),
                          std::span<double>(&mb2, 1), std::span<double>(&vb2, 1),
                          t, config.optim);
    }
    return model;
}

}  // namespace rarefind
