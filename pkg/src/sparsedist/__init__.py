"""Conditional L2 distances for sparsely observed random trajectories."""
from ._accel import backend_name
from .distance import DistanceMatrix, distance_matrix, pair_distance
from .fpca import FittedModel, ScoreMoments, SparseTrajectory, conditional_scores, fit_model
from .smoothing import Grid

__version__ = "0.1.0"

__all__ = [
    "DistanceMatrix",
    "FittedModel",
    "Grid",
    "ScoreMoments",
    "SparseTrajectory",
    "backend_name",
    "conditional_scores",
    "distance_matrix",
    "fit_model",
    "pair_distance",
]
