"""Feed-forward surrogates of the physics simulators.

Data can optionally be synthesised through a network fitted to simulator
runs instead of the simulator itself: a full surrogate maps every
generative factor to the response, and a nominal surrogate maps the physics
factors alone with the remaining factors frozen at reference values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..errors import ConfigurationError, TrainingError


@dataclass
class SurrogateConfig:
    hidden: int = 128
    n_layers: int = 2
    epochs: int = 3000
    lr: float = 1e-3
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1 or self.n_layers < 1 or self.epochs < 0:
            raise ConfigurationError("surrogate sizes must be positive")
        if not 0 <= self.val_fraction < 1:
            raise ConfigurationError("val_fraction must lie in [0, 1)")


class Surrogate(nn.Module):
    """Standardised MLP regressor; differentiable with respect to its inputs."""

    def __init__(self, d_in, d_out, cfg: SurrogateConfig):
        super().__init__()
        layers, width = [], d_in
        for _ in range(cfg.n_layers):
            layers += [nn.Linear(width, cfg.hidden), nn.ReLU()]
            width = cfg.hidden
        layers.append(nn.Linear(width, d_out))
        self.net = nn.Sequential(*layers).double()
        for name, d in (("in_mean", d_in), ("in_std", d_in), ("out_mean", d_out), ("out_std", d_out)):
            self.register_buffer(name, torch.zeros(d, dtype=torch.float64))
        self.r2 = float("nan")

    def forward(self, s):
        s = torch.as_tensor(s, dtype=torch.float64)
        return self.net((s - self.in_mean) / self.in_std) * self.out_std + self.out_mean

    def predict(self, s) -> np.ndarray:
        with torch.no_grad():
            return self(np.asarray(s, dtype=float)).numpy()

    def as_simulator(self):
        """Callable with the datagen simulator signature (s_x, s_c, s_y, s_u) -> x."""
        return lambda *parts: self.predict(np.hstack(parts))


def _std(a):
    s = a.std(0)
    return np.where(s > 1e-12, s, 1.0)


def train_surrogate(inputs, outputs, cfg: SurrogateConfig | None = None) -> Surrogate:
    """Fit a surrogate by full-batch Adam on mean squared error.

    A held-out fraction gives ``surrogate.r2`` (uniform average over outputs,
    NaN when the held-out targets are constant).
    """
    cfg = cfg or SurrogateConfig()
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    Y = np.asarray(outputs, dtype=float)
    Y = Y.reshape(len(Y), -1)
    if len(X) != len(Y) or len(X) < 2:
        raise ConfigurationError("need at least two paired samples")
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(X))
    n_val = int(round(cfg.val_fraction * len(X)))
    val, tr = perm[:n_val], perm[n_val:]

    torch.manual_seed(cfg.seed)
    model = Surrogate(X.shape[1], Y.shape[1], cfg)
    model.in_mean.copy_(torch.as_tensor(X[tr].mean(0)))
    model.in_std.copy_(torch.as_tensor(_std(X[tr])))
    model.out_mean.copy_(torch.as_tensor(Y[tr].mean(0)))
    # constant outputs get zero scale, so they are reproduced exactly
    model.out_std.copy_(torch.as_tensor(np.where(Y[tr].std(0) > 1e-12, Y[tr].std(0), 0.0)))
    xt = torch.as_tensor(X[tr])
    yt = (torch.as_tensor(Y[tr]) - model.out_mean) / torch.as_tensor(_std(Y[tr]))
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    for epoch in range(cfg.epochs):
        opt.zero_grad()
        pred = model.net((xt - model.in_mean) / model.in_std)
        loss = ((pred - yt) ** 2).mean()
        if not torch.isfinite(loss):
            raise TrainingError(f"surrogate loss became non-finite at epoch {epoch}")
        loss.backward()
        opt.step()

    if n_val >= 2:
        pred = model.predict(X[val])
        ss_tot = ((Y[val] - Y[val].mean(0)) ** 2).sum(0)
        ss_res = ((Y[val] - pred) ** 2).sum(0)
        ok = ss_tot > 1e-12 * max(1.0, float(np.abs(Y).max()) ** 2)
        if ok.any():
            model.r2 = float(np.mean(1 - ss_res[ok] / ss_tot[ok]))
    return model


def reference_values(case, role):
    """Midpoints of the ground-truth ranges, used to freeze non-physics factors."""
    return np.array([f.midpoint for f in case.by_role(role)])


def surrogate_pathway(case, n, seed=0, cfg: SurrogateConfig | None = None, reference=None):
    """Fit the full surrogate (all factors) and the nominal surrogate (physics factors).

    ``reference`` maps role name ("domain", "class", "unknown") to the frozen
    values used for the nominal surrogate; defaults are range midpoints.
    Returns (full, nominal, nominal_training_inputs).
    """
    from ..datagen import clean_responses, sample_generative_factors

    factors = sample_generative_factors(case.case_id, n, seed)
    full_x = clean_responses(case, factors)
    full = train_surrogate(np.hstack([factors.s_x, factors.s_c, factors.s_y, factors.s_u]), full_x, cfg)

    reference = reference or {}
    frozen = factors.subset(slice(None))
    for attr, role in (("s_c", "domain"), ("s_y", "class"), ("s_u", "unknown")):
        ref = np.asarray(reference.get(role, reference_values(case, role)), dtype=float)
        setattr(frozen, attr, np.broadcast_to(ref, getattr(factors, attr).shape).copy())
    nominal_x = clean_responses(case, frozen)
    nominal = train_surrogate(frozen.s_x, nominal_x, cfg)
    return full, nominal, frozen
