"""Composed-retrieval refinement toolkit.

Trains a small two-tower encoder contrastively, diagnoses its failures by
exact retrieval, synthesizes oracle-verified corrective triplets for the
distractors it preferred, and refines the encoder with grouped contrastive
batches.  A synthetic attribute world with an exact mock oracle makes the
whole loop testable end to end.
"""

from .encoder import EncoderParameters, encode_query, encode_target, init_params
from .errors import RecallForgeError
from .index import Gallery, MetricsReport, avg_metric, rank_all, recall_at_k
from .losses import LossBatch, LossConfig, info_nce, total_loss, triplet_margin
from .mining import MiningConfig, MiningReport, mine, random_mine
from .oracle import MockOracle, RemoteOracle
from .records import CorrectiveTriplet, Triplet
from .training import TrainConfig, refine, train_base
from .vectors import cosine_similarity
from .world import World, WorldSpec, generate_world, ground_truth_diff

__version__ = "0.1.0"

__all__ = [
    "CorrectiveTriplet", "EncoderParameters", "Gallery", "LossBatch",
    "LossConfig", "MetricsReport", "MiningConfig", "MiningReport",
    "MockOracle", "RecallForgeError", "RemoteOracle", "TrainConfig",
    "Triplet", "World", "WorldSpec", "avg_metric", "cosine_similarity",
    "encode_query", "encode_target", "generate_world", "ground_truth_diff",
    "info_nce", "init_params", "mine", "random_mine", "rank_all",
    "recall_at_k", "refine", "total_loss", "train_base", "triplet_margin",
    "__version__",
]
