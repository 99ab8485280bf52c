"""dialectoscope: measure how two communities use the same words differently."""

__version__ = "0.1.0"

from .corpus import (
    CoocMatrix,
    Corpus,
    Vocabulary,
    build_vocabulary,
    cooc_share,
    count_cooccurrences,
    dedup_documents,
    load_corpus,
)
from .glove import (
    EmbeddingSet,
    GloveConfig,
    finalize_embedding,
    glove_loss,
    train_glove,
)
from .align import (
    AlignedPair,
    align,
    frequency_adjust,
    mistranslation_set,
    prepare_and_align,
    translate,
)
from .measures import (
    MeasureTable,
    SvmConfig,
    build_measure_table,
    cosine_distance,
    excess_cooccurrence,
    knn_overlap_distance,
    rank_words,
    sense_separation,
    spearman_rho,
)
from .dialectogram import (
    AggregateTable,
    Dialectogram,
    MeanOffsetProjection,
    aggregate_characteristic_use,
    build_dialectogram,
    export_dialectogram,
    mean_offset_projection,
    project_offset,
)
from .swapbench import (
    EvalReport,
    SwapPlan,
    apply_swaps,
    run_swapbench,
    sample_swap_pairs,
)
from .pipeline import PipelineConfig, parse_config, run_pipeline

__all__ = [
    "__version__",
    "Corpus",
    "Vocabulary",
    "CoocMatrix",
    "load_corpus",
    "dedup_documents",
    "build_vocabulary",
    "count_cooccurrences",
    "cooc_share",
    "GloveConfig",
    "EmbeddingSet",
    "train_glove",
    "glove_loss",
    "finalize_embedding",
    "AlignedPair",
    "align",
    "prepare_and_align",
    "frequency_adjust",
    "translate",
    "mistranslation_set",
    "MeasureTable",
    "SvmConfig",
    "build_measure_table",
    "cosine_distance",
    "knn_overlap_distance",
    "excess_cooccurrence",
    "sense_separation",
    "spearman_rho",
    "rank_words",
    "Dialectogram",
    "build_dialectogram",
    "export_dialectogram",
    "project_offset",
    "MeanOffsetProjection",
    "mean_offset_projection",
    "AggregateTable",
    "aggregate_characteristic_use",
    "SwapPlan",
    "sample_swap_pairs",
    "apply_swaps",
    "EvalReport",
    "run_swapbench",
    "PipelineConfig",
    "parse_config",
    "run_pipeline",
]
