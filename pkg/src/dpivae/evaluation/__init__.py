"""Scoring, traversals and multi-run experiments for trained models."""

from .baselines import BASELINES, fit_baseline
from .disentangle import SUBSETS, DisentanglementReport, disentanglement_scores, score_latents
from .experiments import (
    MODES,
    PAPER_LAMBDAS,
    BenchmarkResult,
    SweepResult,
    benchmark,
    benchmark_split,
    fit_dpivae,
    lambda_sweep,
)
from .metrics import mse, r_squared, r_squared_multi
from .traversal import TraversalResult, traversal_grid, traverse


def predict_class(model, x):
    """Class predictive (mean, std) from responses alone, via the posterior mean of z_y."""
    return model.predict_class(x)
