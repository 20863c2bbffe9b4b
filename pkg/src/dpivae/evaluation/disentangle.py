"""Disentanglement scores: R^2 of per-subset regressors predicting each factor."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import torch
from sklearn.linear_model import LinearRegression

from ..cases import get_case
from ..datagen import make_dataset
from ..errors import ConfigurationError, DomainError
from ..latent import sample_reparam, workspace_to_constrained
from .metrics import r_squared

SUBSETS = ("z_x", "z_c", "z_y")


@dataclass
class DisentanglementReport:
    r2: np.ndarray  # (3, n_factors), NaN where undefined
    factors: list
    n_train: int
    n_test: int
    regressor_id: str

    def get(self, subset, factor):
        return float(self.r2[SUBSETS.index(subset), self.factors.index(factor)])

    def rows(self):
        return [
            {"subset": s, "factor": f, "r2": float(self.r2[i, j])}
            for i, s in enumerate(SUBSETS)
            for j, f in enumerate(self.factors)
        ]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, ["subset", "factor", "r2"])
            w.writeheader()
            w.writerows(self.rows())


def _regressor(kind):
    if kind == "linear":
        return LinearRegression
    if callable(kind):
        return kind
    raise ConfigurationError(f"unknown regressor {kind!r}")


def posterior_samples(model, x, seed=0):
    """One constrained-space posterior sample per record, shape (n, d_z)."""
    with torch.no_grad():
        q = model.encode(x)
        g = torch.Generator().manual_seed(int(seed))
        eps = torch.randn(q.mean.shape, generator=g, dtype=q.mean.dtype)
        z, _ = workspace_to_constrained(sample_reparam(q, eps), model.layout)
    return z.double().numpy()


def score_latents(z_train, s_train, z_test, s_test, layout, factor_names, regressor="linear"):
    """R^2 table from given latents and factors (the regression half of the procedure)."""
    make = _regressor(regressor)
    slices = (layout.sx, layout.sc, layout.sy)
    r2 = np.full((3, len(factor_names)), np.nan)
    for i, sl in enumerate(slices):
        if z_train[:, sl].shape[1] == 0:
            continue
        for j in range(len(factor_names)):
            reg = make().fit(z_train[:, sl], s_train[:, j])
            try:
                r2[i, j] = r_squared(s_test[:, j], reg.predict(z_test[:, sl]))
            except DomainError:
                pass
    return r2


def disentanglement_scores(model, case_id=None, n_train=1024, n_test=512, regressor="linear", seed=0, noise=None):
    """Fresh factor draws, one posterior sample per record, 3 x N_f regressors, test R^2."""
    case = get_case(case_id or model.case.case_id)
    data = make_dataset(case.case_id, n_train + n_test, seed, noise)
    z = posterior_samples(model, data.x, seed + 1)
    s, names = data.factors.as_matrix()
    r2 = score_latents(z[:n_train], s[:n_train], z[n_train:], s[n_train:], model.layout, names, regressor)
    rid = regressor if isinstance(regressor, str) else getattr(regressor, "__name__", "custom")
    return DisentanglementReport(r2, names, n_train, n_test, rid)
