"""Detection re-scoring with image-text similarity, hard-negative loss checks,
k-shot protocol tooling, and COCO-style AP evaluation."""

from .bnrl import (
    BnrlParams,
    ClassDistribution,
    MonotonicityReport,
    bnrl_gradient,
    bnrl_per_class,
    bnrl_total,
    max_valid_alpha,
    mirror_sum,
    noise_distribution,
    verify_monotonicity,
)
from .cocoio import (
    AnnotationSet,
    KShotSeed,
    MissingStats,
    aggregate_ci,
    aggregate_missing,
    missing_annotation_stats,
    parse_annotations,
    sample_kshot,
)
from .embedding import (
    EmbeddingMatrix,
    ScoreMatrix,
    SimilarityParams,
    l2_normalize,
    load_embeddings,
    save_embeddings,
    similarity_scores,
)
from .errors import RiscoreError
from .evaluation import ApReport, average_precision, coco_map, iou, match_detections
from .rescore import (
    Detection,
    FusionParams,
    RescoreResult,
    fuse_scores,
    load_detections,
    rescore_detections,
    save_detections,
)

__all__ = [
    "AnnotationSet",
    "ApReport",
    "BnrlParams",
    "ClassDistribution",
    "Detection",
    "EmbeddingMatrix",
    "FusionParams",
    "KShotSeed",
    "MissingStats",
    "MonotonicityReport",
    "RescoreResult",
    "RiscoreError",
    "ScoreMatrix",
    "SimilarityParams",
    "aggregate_ci",
    "aggregate_missing",
    "average_precision",
    "bnrl_gradient",
    "bnrl_per_class",
    "bnrl_total",
    "coco_map",
    "fuse_scores",
    "iou",
    "l2_normalize",
    "load_detections",
    "load_embeddings",
    "match_detections",
    "max_valid_alpha",
    "mirror_sum",
    "missing_annotation_stats",
    "noise_distribution",
    "parse_annotations",
    "rescore_detections",
    "sample_kshot",
    "save_detections",
    "save_embeddings",
    "similarity_scores",
    "verify_monotonicity",
]

__version__ = "0.1.0"
