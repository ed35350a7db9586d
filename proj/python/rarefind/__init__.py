"""Active search for rare classes on synthetic feature data.

Thin wrapper around the C++ core; see the project README for the CLI and
file formats.
"""

from ._core import (  # noqa: F401
    AggregateRow,
    Classifier,
    ClusterSpec,
    ConfigError,
    DissectRow,
    Embedder,
    EmbedderKind,
    EpisodeConfig,
    IterationRecord,
    LoopConfig,
    MetricSummary,
    ModelConfig,
    MovedGroup,
    NumericError,
    RunReport,
    Sample,
    ScoredPool,
    SplitBundle,
    SplitConfig,
    SplitFractions,
    StrategyKind,
    TrainConfig,
    UsageError,
    confidence_interval,
    dissect_report,
    f1_scores,
    fit,
    generate_pool,
    grad_check,
    inject_synthetic_seed,
    make_classifier,
    n_rare,
    oracle_label,
    predict_class,
    read_checkpoint,
    read_dataset_csv,
    run_active_loop,
    score_entropy,
    score_max_rare_prob,
    score_proto_distance,
    score_random,
    select_top_n,
    softmax_probs,
    split_dataset,
    student_t_quantile,
    uncentered_pca,
    write_checkpoint,
    write_dataset_csv,
)

__version__ = "0.1.0"
