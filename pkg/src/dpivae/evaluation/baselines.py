"""Class-prediction baselines: ordinary least squares, Gaussian process and MLP.

All baselines see standardised response vectors; GPR and MLP also predict
standardised targets.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.compose import TransformedTargetRegressor
from sklearn.dummy import DummyRegressor
from sklearn.exceptions import ConvergenceWarning
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import RBF, ConstantKernel, WhiteKernel
from sklearn.linear_model import LinearRegression
from sklearn.neural_network import MLPRegressor
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from ..errors import ConfigurationError, NumericError

BASELINES = ("LIN", "GPR", "MLP")


def _gpr(cfg):
    d = cfg["n_features"]
    kernel = ConstantKernel(1.0, (1e-3, 1e3)) * RBF(np.sqrt(d), (1.0, 1e3)) + WhiteKernel(1e-2, (1e-10, 1e1))
    return GaussianProcessRegressor(
        kernel, normalize_y=True, n_restarts_optimizer=cfg.get("n_restarts", 1), random_state=cfg.get("seed", 0)
    )


def _mlp(cfg):
    net = MLPRegressor(
        hidden_layer_sizes=(128, 128),
        activation="relu",
        max_iter=cfg.get("max_iter", 2000),
        tol=cfg.get("tol", 1e-6),
        n_iter_no_change=cfg.get("n_iter_no_change", 50),
        random_state=cfg.get("seed", 0),
    )
    return TransformedTargetRegressor(net, transformer=StandardScaler())


def fit_baseline(kind, x, y, config=None):
    """Fitted predictor (``.predict``) for x -> y; kind is LIN, GPR or MLP."""
    cfg = dict(config or {})
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cfg.setdefault("n_features", x.shape[1])
    if kind not in BASELINES:
        raise ConfigurationError(f"unknown baseline {kind!r}; expected one of {BASELINES}")
    if len(y) and np.all(np.ptp(y, axis=0) == 0):
        # degenerate target: every learner reduces to its mean
        return make_pipeline(StandardScaler(), DummyRegressor()).fit(x, y)
    if kind == "LIN":
        est = LinearRegression()
    elif kind == "GPR":
        est = _gpr(cfg)
    else:
        est = _mlp(cfg)
    model = make_pipeline(StandardScaler(), est)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        try:
            model.fit(x, y)
        except (np.linalg.LinAlgError, ValueError) as exc:
            if kind == "GPR":
                raise NumericError(f"GPR kernel matrix not positive definite: {exc}") from exc
            raise
    return model
