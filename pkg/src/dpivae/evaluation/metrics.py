"""Regression metrics."""

import numpy as np

from ..errors import DomainError, SizeError


def r_squared(y_true, y_pred):
    """Coefficient of determination 1 - SS_res / SS_tot for one target."""
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if len(y_true) != len(y_pred) or len(y_true) < 2:
        raise SizeError("need two equal-length vectors of at least two values")
    ss_tot = np.sum((y_true - y_true.mean()) ** 2)
    if ss_tot <= 1e-300:
        raise DomainError("R^2 is undefined for a constant target")
    return 1.0 - np.sum((y_true - y_pred) ** 2) / ss_tot


def r_squared_multi(y_true, y_pred):
    """Uniform average of per-column R^2."""
    y_true = np.asarray(y_true, dtype=float).reshape(len(y_true), -1)
    y_pred = np.asarray(y_pred, dtype=float).reshape(len(y_pred), -1)
    return float(np.mean([r_squared(y_true[:, j], y_pred[:, j]) for j in range(y_true.shape[1])]))


def mse(y_true, y_pred):
    return float(np.mean((np.asarray(y_true, dtype=float) - np.asarray(y_pred, dtype=float)) ** 2))
