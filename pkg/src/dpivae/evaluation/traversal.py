"""Traversals of one generative factor with the decoder decomposition recorded."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import torch

from ..cases import get_case
from ..datagen import GenerativeFactors, clean_responses, generate_observations
from ..errors import ConfigurationError
from ..latent import sample_reparam, workspace_to_constrained


@dataclass
class TraversalResult:
    factor: str
    grid: np.ndarray  # (n_grid,)
    z: np.ndarray  # (n_grid, n_real, d_z) constrained posterior samples
    x_hat_p: np.ndarray  # (n_grid, n_real, d_x)
    x_hat_d: np.ndarray
    x_draw: np.ndarray  # Normal(x_hat_p + x_hat_d, sigma_x^2) draws
    x_clean: np.ndarray  # (n_grid, d_x) noise-free input signal
    sigma_x: float

    @property
    def n_samples(self):
        return self.z.shape[0] * self.z.shape[1]

    def grid_means(self, which):
        return getattr(self, which).mean(axis=1)

    def variation(self, which):
        """Norm over sensors of the across-grid std of the per-grid mean."""
        m = self.x_clean if which == "x_clean" else self.grid_means(which)
        return float(np.linalg.norm(m.std(axis=0)))

    def variance(self, which):
        """Across-grid variance of the per-grid mean, summed over sensors."""
        m = self.x_clean if which == "x_clean" else self.grid_means(which)
        return float(m.var(axis=0).sum())

    def summary_rows(self):
        """Per grid value and sensor: mean and +-2 std bands of each component."""
        rows = []
        for g, val in enumerate(self.grid):
            for k in range(self.x_hat_p.shape[2]):
                row = {"factor": self.factor, "value": float(val), "sensor": k, "x_clean": float(self.x_clean[g, k])}
                for name in ("x_hat_p", "x_hat_d", "x_draw"):
                    v = getattr(self, name)[g, :, k]
                    m, s = float(v.mean()), float(v.std())
                    row.update({f"{name}_mean": m, f"{name}_lo": m - 2 * s, f"{name}_hi": m + 2 * s})
                rows.append(row)
        return rows

    def latent_rows(self):
        rows = []
        for g, val in enumerate(self.grid):
            for r in range(self.z.shape[1]):
                rows.append({"value": float(val), "realization": r, **{f"z{j}": float(v) for j, v in enumerate(self.z[g, r])}})
        return rows

    def to_csv(self, path, latents_path=None):
        rows = self.summary_rows()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, list(rows[0]))
            w.writeheader()
            w.writerows(rows)
        if latents_path:
            rows = self.latent_rows()
            with open(latents_path, "w", newline="") as fh:
                w = csv.DictWriter(fh, list(rows[0]))
                w.writeheader()
                w.writerows(rows)


def traversal_grid(factor, n_grid=5):
    """n_grid points between the 5th and 95th percentiles of a uniform factor."""
    lo, hi = factor.percentile([5.0, 95.0])
    return np.linspace(lo, hi, n_grid)


def traverse(model, case_id=None, factor="E", fixed_values=None, n_grid=5, n_real=1000, seed=0, noise=None):
    """Vary one factor over its grid, others fixed (default: range midpoints)."""
    case = get_case(case_id or model.case.case_id)
    names = [f.name for f in case.factors]
    if factor not in names:
        raise ConfigurationError(f"case {case.case_id!r} has no generative factor {factor!r}")
    fixed = {f.name: f.midpoint for f in case.factors}
    for k, v in (fixed_values or {}).items():
        if k not in fixed:
            raise ConfigurationError(f"case {case.case_id!r} has no generative factor {k!r}")
        fixed[k] = float(v)
    grid = traversal_grid(case.factor(factor), n_grid)
    g = torch.Generator().manual_seed(int(seed))
    out = {k: [] for k in ("z", "x_hat_p", "x_hat_d", "x_draw", "x_clean")}
    for i, val in enumerate(grid):
        vals = dict(fixed, **{factor: val})
        parts = {}
        for attr, role in (("s_x", "physics"), ("s_c", "domain"), ("s_y", "class"), ("s_u", "unknown")):
            row = [vals[n] for n in case.names(role)]
            parts[attr] = np.tile(np.asarray(row, dtype=float), (n_real, 1)).reshape(n_real, len(row))
        facs = GenerativeFactors(case.case_id, **parts)
        out["x_clean"].append(clean_responses(case, facs.subset(slice(0, 1)))[0])
        data = generate_observations(case.case_id, facs, noise, rng_seed=[int(seed), i])
        with torch.no_grad():
            q = model.encode(data.x)
            eps = torch.randn(q.mean.shape, generator=g, dtype=q.mean.dtype)
            z, _ = workspace_to_constrained(sample_reparam(q, eps), model.layout)
            x_p, x_d, sigma = model.decode_response(z)
            draw = x_p + x_d + sigma * torch.randn(x_p.shape, generator=g, dtype=x_p.dtype)
        for k, v in (("z", z), ("x_hat_p", x_p), ("x_hat_d", x_d), ("x_draw", draw)):
            out[k].append(v.double().numpy())
    return TraversalResult(
        factor, grid, *(np.stack(out[k]) for k in ("z", "x_hat_p", "x_hat_d", "x_draw", "x_clean")),
        sigma_x=float(model.sigma_x.detach()),
    )
