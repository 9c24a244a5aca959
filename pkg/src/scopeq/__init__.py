"""Procedure-quality metrics from frame-embedding streams.

Pipeline: contrastive encoder training over augmented frame pairs, k-means
with sharpened soft assignment, a linear online quality classifier over
10 s windows, a histogram-ratio detection-likelihood table, and offline
per-procedure aggregation, all exercised against a synthetic procedure
simulator with planted ground truth.
"""

from ._kernels import BACKEND
from .augment import AugmentConfig, augment
from .bayes import BayesTable, fit_bayes, histogram, p_detect_given_exists
from .clustering import ClusterModel, assign_stream, hard_assign, kmeans_fit, soft_assign
from .contrastive import (
    ContrastiveConfig,
    cosine_similarity,
    nt_xent_grad,
    nt_xent_loss,
    nt_xent_loss_and_grad,
)
from .encoder import (
    DenseLayer,
    EncoderParams,
    embed_batch,
    encoder_forward,
    encoder_init,
    encoder_input_jacobian,
    train_encoder,
)
from .errors import (
    DegenerateInputError,
    DegenerateTrainingError,
    DivergenceError,
    InfeasibleClusteringError,
    InsufficientDataError,
    OrderingError,
    ParseError,
    RangeError,
    SamplingError,
    SchemaError,
    ScopeqError,
    ShapeMismatchError,
    UndefinedLossError,
)
from .offline import (
    DistributionReport,
    ProcedureScore,
    offline_score,
    quintile_report,
    score_distribution_report,
)
from .optim import AdamConfig, AdamState, adam_init, adam_step
from .quality import (
    QTrainConfig,
    QualityModel,
    WindowSample,
    build_training_set,
    label_window,
    q_forward,
    score_assigned,
    score_online,
    train_q,
    window_average,
)
from .records import FrameRecord, FrameTensor, ProcedureAnnotation, group_by_procedure
from .simulate import PolypTruth, SimConfig, SimProcedure, generate_cohort, truth_detection_curve

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    "AugmentConfig",
    "augment",
    "BayesTable",
    "fit_bayes",
    "histogram",
    "p_detect_given_exists",
    "ClusterModel",
    "kmeans_fit",
    "soft_assign",
    "assign_stream",
    "hard_assign",
    "ContrastiveConfig",
    "cosine_similarity",
    "nt_xent_loss",
    "nt_xent_grad",
    "nt_xent_loss_and_grad",
    "DenseLayer",
    "EncoderParams",
    "encoder_init",
    "encoder_forward",
    "embed_batch",
    "encoder_input_jacobian",
    "train_encoder",
    "ScopeqError",
    "DegenerateInputError",
    "DegenerateTrainingError",
    "DivergenceError",
    "InfeasibleClusteringError",
    "InsufficientDataError",
    "OrderingError",
    "ParseError",
    "RangeError",
    "SamplingError",
    "SchemaError",
    "ShapeMismatchError",
    "UndefinedLossError",
    "ProcedureScore",
    "DistributionReport",
    "offline_score",
    "quintile_report",
    "score_distribution_report",
    "AdamConfig",
    "AdamState",
    "adam_init",
    "adam_step",
    "QualityModel",
    "QTrainConfig",
    "WindowSample",
    "window_average",
    "label_window",
    "build_training_set",
    "train_q",
    "q_forward",
    "score_assigned",
    "score_online",
    "FrameRecord",
    "FrameTensor",
    "ProcedureAnnotation",
    "group_by_procedure",
    "SimConfig",
    "SimProcedure",
    "PolypTruth",
    "generate_cohort",
    "truth_detection_curve",
]
