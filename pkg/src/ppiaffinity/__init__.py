"""Protein-protein binding affinity regression harness.

Trains and evaluates affinity regressors over precomputed complex
embeddings, with leakage-safe similarity splits, PMID-homogeneous batches,
and a composite Huber-plus-rank objective.
"""

from .errors import (
    AlignmentError,
    DatasetValidationError,
    DataWarning,
    ParseError,
    PpiAffinityError,
    TrainingDivergedError,
    UndefinedCorrelationError,
)
from .ingest import (
    Complex,
    Dataset,
    apply_exclusions,
    default_exclusions_path,
    kd_to_pkd,
    load_exclusions,
    parse_dataset,
)
from .losses import (
    LossConfig,
    LossOutput,
    composite_loss,
    huber_loss,
    rank_loss_surrogate,
    rank_loss_verbatim,
)
from .metrics import EvalReport, average_ranks, evaluate, pearson, rmse, spearman
from .regressor import (
    AffinityModel,
    EmbeddingTable,
    FusionHead,
    MlpHead,
    Standardizer,
    TrainConfig,
    backward,
    fit_standardizer,
    forward,
    fuse,
    he_init,
    init_fusion,
    load_embedding_table,
    load_model,
    predict,
    save_embedding_table,
    save_model,
    train,
)
from .sampler import BatchPlan, batch_coverage_report, plan_batches
from .seeding import substream_rng, substream_seed
from .splitter import (
    DistanceMatrix,
    SplitAssignment,
    SplitParams,
    assign_splits,
    audit_split,
    build_similarity_graph,
    complex_distance,
    compute_distance_matrix,
    connected_components,
    levenshtein,
    load_split,
    make_split,
    save_split,
)

__version__ = "0.1.0"
