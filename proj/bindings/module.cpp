#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <numeric>

#include "rarefind/classifier.hpp"
#include "rarefind/config.hpp"
#include "rarefind/data.hpp"
#include "rarefind/fewshot.hpp"
#include "rarefind/loop.hpp"
#include "rarefind/metrics.hpp"
#include "rarefind/pca.hpp"
#include "rarefind/strategies.hpp"

namespace py = pybind11;
using namespace rarefind;

namespace {

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw UsageError("expected a non-empty matrix");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols)
            throw UsageError("ragged matrix rows");
        for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = rows[r][c];
    }
    return m;
}

std::vector<std::vector<double>> from_matrix(const Matrix& m) {
    std::vector<std::vector<double>> rows(m.rows, std::vector<double>(m.cols));
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) rows[r][c] = m(r, c);
    return rows;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Active search for rare classes on synthetic feature data";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<Sample>(m, "Sample")
        .def(py::init<>())
        .def(py::init([](std::uint64_t id, std::vector<double> features,
                         int label) {
                 return Sample{id, std::move(features), label};
             }),
             py::arg("id"), py::arg("features"), py::arg("label"))
        .def_readwrite("id", &Sample::id)
        .def_readwrite("features", &Sample::features)
        .def_readwrite("label", &Sample::label)
        .def("__repr__", [](const Sample& s) {
            return "Sample(id=" + std::to_string(s.id) +
                   ", label=" + std::to_string(s.label) + ")";
        });

    py::class_<ClusterSpec>(m, "ClusterSpec")
        .def(py::init([](int class_id, std::vector<double> mean, double stddev,
                         std::size_t count) {
                 return ClusterSpec{class_id, std::move(mean), stddev, count};
             }),
             py::arg("class_id"), py::arg("mean"), py::arg("stddev"),
             py::arg("count"))
        .def_readwrite("class_id", &ClusterSpec::class_id)
        .def_readwrite("mean", &ClusterSpec::mean)
        .def_readwrite("stddev", &ClusterSpec::stddev)
        .def_readwrite("count", &ClusterSpec::count);

    py::class_<SplitFractions>(m, "SplitFractions")
        .def(py::init([](double train, double val, double pool) {
                 return SplitFractions{train, val, pool};
             }),
             py::arg("train") = 0.3, py::arg("val") = 0.1, py::arg("pool") = 0.6)
        .def_readwrite("train", &SplitFractions::train)
        .def_readwrite("val", &SplitFractions::val)
        .def_readwrite("pool", &SplitFractions::pool);

    py::class_<SplitConfig>(m, "SplitConfig")
        .def(py::init<>())
        .def_readwrite("rare_classes", &SplitConfig::rare_classes)
        .def_readwrite("train_per_rare", &SplitConfig::train_per_rare)
        .def_readwrite("val_per_rare", &SplitConfig::val_per_rare)
        .def_readwrite("common", &SplitConfig::common)
        .def_readwrite("seed", &SplitConfig::seed);

    py::class_<SplitBundle>(m, "SplitBundle")
        .def(py::init<>())
        .def_readwrite("train", &SplitBundle::train)
        .def_readwrite("validation", &SplitBundle::validation)
        .def_readwrite("pool", &SplitBundle::pool)
        .def_readwrite("rare_classes", &SplitBundle::rare_classes)
        .def_readwrite("dim", &SplitBundle::dim);

    py::enum_<EmbedderKind>(m, "EmbedderKind")
        .value("Identity", EmbedderKind::Identity)
        .value("OneHidden", EmbedderKind::OneHidden);

    py::class_<Embedder>(m, "Embedder")
        .def_readonly("kind", &Embedder::kind)
        .def_readonly("input_dim", &Embedder::input_dim)
        .def_readonly("hidden_dim", &Embedder::hidden_dim)
        .def("output_dim", &Embedder::output_dim)
        .def("embed", [](const Embedder& e, const std::vector<double>& x) {
            std::vector<double> z;
            e.embed(x, z);
            return z;
        });

    py::class_<Classifier>(m, "Classifier")
        .def_property_readonly("num_classes", &Classifier::num_classes)
        .def_property_readonly("input_dim", &Classifier::input_dim)
        .def_readonly("embedder", &Classifier::embedder)
        .def("__repr__", [](const Classifier& c) {
            return "Classifier(input_dim=" + std::to_string(c.input_dim()) +
                   ", num_classes=" + std::to_string(c.num_classes()) + ")";
        });

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("beta1", &TrainConfig::beta1)
        .def_readwrite("beta2", &TrainConfig::beta2)
        .def_readwrite("epsilon", &TrainConfig::epsilon)
        .def_readwrite("init_scale", &TrainConfig::init_scale)
        .def_readwrite("seed", &TrainConfig::seed);

    py::enum_<StrategyKind>(m, "StrategyKind")
        .value("MaxRareProb", StrategyKind::MaxRareProb)
        .value("Entropy", StrategyKind::Entropy)
        .value("Random", StrategyKind::Random)
        .value("ProtoDistance", StrategyKind::ProtoDistance)
        .value("RelationSim", StrategyKind::RelationSim);

    py::class_<ScoredPool>(m, "ScoredPool")
        .def_readonly("strategy", &ScoredPool::strategy)
        .def_readonly("rare_class", &ScoredPool::rare_class)
        .def_readonly("ids", &ScoredPool::ids)
        .def_readonly("scores", &ScoredPool::scores);

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("kind", &ModelConfig::kind)
        .def_readwrite("hidden_dim", &ModelConfig::hidden_dim);

    py::class_<EpisodeConfig>(m, "EpisodeConfig")
        .def(py::init<>())
        .def_readwrite("way", &EpisodeConfig::way)
        .def_readwrite("shot", &EpisodeConfig::shot)
        .def_readwrite("queries", &EpisodeConfig::queries)
        .def_readwrite("episodes", &EpisodeConfig::episodes)
        .def_readwrite("seed", &EpisodeConfig::seed)
        .def_readwrite("relation_hidden", &EpisodeConfig::relation_hidden)
        .def_readwrite("optim", &EpisodeConfig::optim);

    py::class_<LoopConfig>(m, "LoopConfig")
        .def(py::init<>())
        .def_readwrite("n_per_class", &LoopConfig::n_per_class)
        .def_readwrite("iterations", &LoopConfig::iterations)
        .def_readwrite("strategy", &LoopConfig::strategy)
        .def_readwrite("model", &LoopConfig::model)
        .def_readwrite("train", &LoopConfig::train)
        .def_readwrite("episode", &LoopConfig::episode)
        .def_readwrite("runs", &LoopConfig::runs)
        .def_readwrite("ci_level", &LoopConfig::ci_level)
        .def_readwrite("base_seed", &LoopConfig::base_seed)
        .def_readwrite("warm_start", &LoopConfig::warm_start)
        .def_readwrite("threads", &LoopConfig::threads);

    py::class_<MovedGroup>(m, "MovedGroup")
        .def_readonly("rare_class", &MovedGroup::rare_class)
        .def_readonly("ids", &MovedGroup::ids)
        .def_readonly("true_labels", &MovedGroup::true_labels);

    py::class_<IterationRecord>(m, "IterationRecord")
        .def_readonly("t", &IterationRecord::t)
        .def_readonly("n_rare", &IterationRecord::n_rare)
        .def_readonly("f1_rare_macro", &IterationRecord::f1_rare_macro)
        .def_readonly("f1_overall", &IterationRecord::f1_overall)
        .def_readonly("moved", &IterationRecord::moved);

    py::class_<AggregateRow>(m, "AggregateRow")
        .def_readonly("t", &AggregateRow::t)
        .def_readonly("n_rare_mean", &AggregateRow::n_rare_mean)
        .def_readonly("n_rare_ci_lo", &AggregateRow::n_rare_ci_lo)
        .def_readonly("n_rare_ci_hi", &AggregateRow::n_rare_ci_hi)
        .def_readonly("f1_mean", &AggregateRow::f1_mean)
        .def_readonly("f1_ci_lo", &AggregateRow::f1_ci_lo)
        .def_readonly("f1_ci_hi", &AggregateRow::f1_ci_hi)
        .def_readonly("has_ci", &AggregateRow::has_ci);

    py::class_<RunReport>(m, "RunReport")
        .def_readonly("strategy", &RunReport::strategy)
        .def_readonly("runs", &RunReport::runs)
        .def_readonly("aggregate", &RunReport::aggregate);

    py::class_<MetricSummary>(m, "MetricSummary")
        .def_readonly("mean", &MetricSummary::mean)
        .def_readonly("ci_lo", &MetricSummary::ci_lo)
        .def_readonly("ci_hi", &MetricSummary::ci_hi)
        .def_readonly("n", &MetricSummary::n);

    py::class_<DissectRow>(m, "DissectRow")
        .def_readonly("id", &DissectRow::id)
        .def_readonly("split", &DissectRow::split)
        .def_readonly("label", &DissectRow::label)
        .def_readonly("coords", &DissectRow::coords);

    // dataset generation and splitting
    m.def("generate_pool", &generate_pool, py::arg("specs"), py::arg("seed"));
    m.def("split_dataset", &split_dataset, py::arg("dataset"), py::arg("config"));
    m.def("inject_synthetic_seed", &inject_synthetic_seed, py::arg("bundle"),
          py::arg("spec"), py::arg("offset"), py::arg("scale"), py::arg("seed"));
    m.def("write_dataset_csv", &write_dataset_csv);
    m.def("read_dataset_csv", &read_dataset_csv);

    // classifier
    m.def("make_classifier", &make_classifier, py::arg("kind"),
          py::arg("input_dim"), py::arg("num_classes"), py::arg("hidden_dim") = 0);
    m.def(
        "fit",
        [](const Classifier& clf, const std::vector<Sample>& train,
           const TrainConfig& cfg, bool reinitialize) {
            FitResult res = fit(clf, train, cfg, reinitialize);
            return py::make_tuple(res.model, res.epoch_loss);
        },
        py::arg("classifier"), py::arg("train"), py::arg("config"),
        py::arg("reinitialize") = true,
        "Returns (trained classifier, per-epoch loss history).");
    m.def(
        "softmax_probs",
        [](const Classifier& clf, const std::vector<double>& x) {
            return softmax_probs(clf, x);
        },
        py::arg("classifier"), py::arg("x"));
    m.def(
        "predict_class",
        [](const Classifier& clf, const std::vector<double>& x) {
            return predict_class(clf, x);
        },
        py::arg("classifier"), py::arg("x"));
    m.def(
        "grad_check",
        [](const Classifier& clf, const std::vector<Sample>& batch, double step) {
            return grad_check(clf, batch, all_indices(batch.size()), step);
        },
        py::arg("classifier"), py::arg("batch"), py::arg("step") = 1e-5);
    m.def("write_checkpoint", &write_checkpoint);
    m.def("read_checkpoint", &read_checkpoint);

    // strategies
    m.def("score_max_rare_prob", &score_max_rare_prob, py::arg("classifier"),
          py::arg("pool"), py::arg("rare_class"));
    m.def("score_entropy", &score_entropy, py::arg("classifier"), py::arg("pool"));
    m.def("score_random", &score_random, py::arg("pool"), py::arg("seed"));
    m.def(
        "score_proto_distance",
        [](const Embedder& emb, const std::vector<Sample>& support,
           const std::vector<Sample>& pool) {
            return score_proto_distance(emb, support, pool);
        },
        py::arg("embedder"), py::arg("support"), py::arg("pool"));
    m.def("select_top_n", &select_top_n, py::arg("scored"), py::arg("n"));

    // active loop
    m.def(
        "run_active_loop",
        [](const SplitBundle& bundle, const LoopConfig& cfg) {
            py::gil_scoped_release release;
            return run_active_loop(bundle, cfg);
        },
        py::arg("bundle"), py::arg("config"));
    m.def(
        "oracle_label",
        [](const std::vector<Sample>& pool,
           const std::vector<std::uint64_t>& ids) {
            return oracle_label(pool, ids);
        },
        py::arg("pool"), py::arg("ids"));

    // metrics
    m.def(
        "f1_scores",
        [](const std::vector<int>& preds, const std::vector<int>& labels,
           const std::set<int>& class_set) {
            const F1Result res = f1_scores(preds, labels, class_set);
            return py::make_tuple(res.per_class, res.macro);
        },
        py::arg("predictions"), py::arg("labels"), py::arg("class_set"),
        "Returns (per-class F1 dict, macro F1).");
    m.def("n_rare", &n_rare, py::arg("bundle"), py::arg("rare_classes"));
    m.def(
        "confidence_interval",
        [](const std::vector<double>& values, double level) {
            return confidence_interval(values, level);
        },
        py::arg("values"), py::arg("level") = 0.95);
    m.def("student_t_quantile", &student_t_quantile, py::arg("p"), py::arg("dof"));

    // dissection
    m.def(
        "uncentered_pca",
        [](const std::vector<std::vector<double>>& features, std::size_t k) {
            const Projection p = uncentered_pca(to_matrix(features), k);
            return from_matrix(p.basis);
        },
        py::arg("features"), py::arg("k"),
        "Rows of the result are the top-k principal directions.");
    m.def("dissect_report", &dissect_report, py::arg("classifier"),
          py::arg("bundle"), py::arg("rare_class"), py::arg("k") = 2);
}
