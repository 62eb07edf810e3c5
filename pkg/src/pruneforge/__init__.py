"""Training-free two-stage pruning of large image corpora.

Stage I drops low-information images by grayscale Shannon entropy.
Stage II clusters the survivors against reference-derived centroids on the
unit hypersphere and keeps a quota-balanced, similarity-ranked subset.
"""

from ._util import derive_seed
from .assign import (
    AssignmentTable,
    CandidatePools,
    assign_nearest,
    pool_by_cluster,
    read_assignment,
    write_assignment,
)
from .baselines import (
    BASELINE_STRATEGIES,
    cluster_nearest_select,
    moderate_ds_select,
    random_select,
)
from .bench import (
    BenchReport,
    SyntheticSpec,
    compare_strategies,
    component_recall,
    draw_component_means,
    generate_synthetic,
    redundancy,
    reference_vs_full_study,
    run_scaling_study,
    synthetic_manifest,
    write_report,
)
from .cluster import (
    CentroidSet,
    ClusterConfig,
    cluster_objective,
    kmeanspp_init,
    load_centroids,
    save_centroids,
    spherical_kmeans,
)
from .config import (
    PipelineConfig,
    check_pipeline_config,
    parse_config_text,
    render_config,
    validate_config,
    write_config,
)
from .embedding import (
    EmbeddingMatrix,
    check_unit_norms,
    concat_embeddings,
    l2_normalize,
    read_embeddings,
    write_embeddings,
)
from .entropy import (
    EntropyConfig,
    Histogram,
    apply_threshold,
    apply_top_fraction,
    entropy_filter,
    grayscale_histogram,
    read_scores,
    shannon_entropy,
    write_rejects,
    write_scores,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateInputError,
    FormatError,
    InfeasibleBudgetError,
    ParseError,
    PruneforgeError,
    ValidationError,
)
from .manifest import (
    DatasetManifest,
    SampleRecord,
    SelectionEntry,
    load_manifest,
    read_selection,
    write_manifest,
    write_selection,
)
from .pipeline import (
    ASSIGNMENTS_FILE,
    CENTROIDS_FILE,
    REJECTS_FILE,
    SCORES_FILE,
    SELECTION_FILE,
    STATS_FILE,
    run_pipeline,
)
from .sample import (
    SamplingConfig,
    SelectionResult,
    compute_budget,
    read_selection_stats,
    stratified_select,
    write_selection_stats,
)

__version__ = "0.1.0"

__all__ = [
    "ASSIGNMENTS_FILE",
    "AssignmentTable",
    "BASELINE_STRATEGIES",
    "BenchReport",
    "CENTROIDS_FILE",
    "CandidatePools",
    "CentroidSet",
    "ClusterConfig",
    "ConfigError",
    "DataError",
    "DatasetManifest",
    "DegenerateInputError",
    "EmbeddingMatrix",
    "EntropyConfig",
    "FormatError",
    "Histogram",
    "InfeasibleBudgetError",
    "ParseError",
    "PipelineConfig",
    "PruneforgeError",
    "REJECTS_FILE",
    "SCORES_FILE",
    "SELECTION_FILE",
    "STATS_FILE",
    "SampleRecord",
    "SamplingConfig",
    "SelectionEntry",
    "SelectionResult",
    "SyntheticSpec",
    "ValidationError",
    "apply_threshold",
    "apply_top_fraction",
    "assign_nearest",
    "check_pipeline_config",
    "check_unit_norms",
    "cluster_nearest_select",
    "cluster_objective",
    "compare_strategies",
    "component_recall",
    "compute_budget",
    "concat_embeddings",
    "derive_seed",
    "draw_component_means",
    "entropy_filter",
    "generate_synthetic",
    "grayscale_histogram",
    "kmeanspp_init",
    "l2_normalize",
    "load_centroids",
    "load_manifest",
    "moderate_ds_select",
    "parse_config_text",
    "pool_by_cluster",
    "random_select",
    "read_assignment",
    "read_embeddings",
    "read_scores",
    "read_selection",
    "read_selection_stats",
    "redundancy",
    "reference_vs_full_study",
    "render_config",
    "run_pipeline",
    "run_scaling_study",
    "save_centroids",
    "shannon_entropy",
    "spherical_kmeans",
    "stratified_select",
    "synthetic_manifest",
    "validate_config",
    "write_assignment",
    "write_config",
    "write_embeddings",
    "write_manifest",
    "write_rejects",
    "write_report",
    "write_scores",
    "write_selection",
    "write_selection_stats",
]
