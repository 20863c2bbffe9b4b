"""Weighted evidence lower bound over (x, c, y) with Monte Carlo estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .errors import ConfigurationError, NumericError
from .latent import LOG_2PI, physics_log_prior, sample_reparam, workspace_to_constrained

TERMS = ("total", "recon_x", "recon_c", "recon_y", "kld")


@dataclass
class ObjectiveConfig:
    alpha_x: float = 1.0
    alpha_c: float = 1.0
    alpha_y: float = 1.0
    beta: float = 1.0
    grl_lambda: float | None = None  # None: use the model's GRL coefficient
    n_mc_train: int = 8
    n_mc_eval: int = 512
    beta_schedule: str = "constant"  # or "linear-warmup"
    warmup_epochs: int = 0

    def __post_init__(self):
        if min(self.n_mc_train, self.n_mc_eval) < 1:
            raise ConfigurationError("Monte Carlo sample counts must be at least 1")
        weights = (self.alpha_x, self.alpha_c, self.alpha_y, self.beta)
        if not all(math.isfinite(w) and w >= 0 for w in weights):
            raise ConfigurationError("alpha and beta weights must be finite and non-negative")
        if self.beta_schedule not in ("constant", "linear-warmup"):
            raise ConfigurationError(f"unknown beta schedule {self.beta_schedule!r}")
        if self.beta_schedule == "linear-warmup" and self.warmup_epochs < 1:
            raise ConfigurationError("linear-warmup needs warmup_epochs >= 1")


@dataclass
class ObjectiveBreakdown:
    total: torch.Tensor
    recon_x: torch.Tensor
    recon_c: torch.Tensor
    recon_y: torch.Tensor
    kld: torch.Tensor

    def as_floats(self):
        return {k: float(getattr(self, k).detach()) for k in TERMS}


def beta_at(epoch, cfg: ObjectiveConfig):
    if epoch < 0:
        raise ConfigurationError("epoch must be non-negative")
    if cfg.beta_schedule == "constant":
        return cfg.beta
    return cfg.beta * min(1.0, epoch / cfg.warmup_epochs)


def _normal_log_prob(v, mean, std):
    return (-0.5 * ((v - mean) / std) ** 2 - torch.log(std) - 0.5 * math.log(2 * math.pi)).sum(-1)


def elbo(model, x, c, y, cfg: ObjectiveConfig, n_mc=None, generator=None, eps=None, beta=None, reduce=True):
    """Monte Carlo estimate of the weighted bound, averaged over the batch.

    Draw ``n_mc`` reparameterised workspace samples per record; ``eps`` of shape
    (n_mc, batch, d_z) may be passed for common random numbers. Returns an
    :class:`ObjectiveBreakdown` of scalars, or per-record values with
    ``reduce=False``.
    """
    x, c, y = model.as_tensor(x), model.as_tensor(c), model.as_tensor(y)
    if len(x) == 0:
        raise ConfigurationError("batch must be non-empty")
    layout = model.layout
    q = model.encode(x)
    if eps is None:
        n_mc = n_mc or cfg.n_mc_train
        eps = torch.randn((n_mc,) + q.mean.shape, generator=generator, dtype=model.dtype)
    u = sample_reparam(q, eps)
    z, logdet = workspace_to_constrained(u, layout)
    z_x, z_c, z_y = layout.split(z)

    x_p, x_d, sigma_x = model.decode_response(z, cfg.grl_lambda)
    recon_x = _normal_log_prob(x, x_p + x_d, sigma_x).mean(0)
    recon_c = _normal_log_prob(c, *model.decode_domain(z_c)).mean(0)
    recon_y = _normal_log_prob(y, *model.decode_class(z_y)).mean(0)

    pc_mean, pc_std = model.prior_domain(c)
    py_mean, py_std = model.prior_class(y)
    log_p = physics_log_prior(z_x, layout) + _normal_log_prob(z_c, pc_mean, pc_std) + _normal_log_prob(z_y, py_mean, py_std)
    # L^{-1}(u - mean) is eps exactly, so log q(u) needs no triangular solve
    log_q = -0.5 * (eps**2).sum(-1) - torch.log(torch.diagonal(q.chol, dim1=-2, dim2=-1)).sum(-1) \
        - 0.5 * layout.d_z * LOG_2PI
    kld = (log_q - log_p - logdet).mean(0)

    beta = cfg.beta if beta is None else beta
    total = cfg.alpha_x * recon_x + cfg.alpha_c * recon_c + cfg.alpha_y * recon_y - beta * kld
    out = ObjectiveBreakdown(total, recon_x, recon_c, recon_y, kld)
    if reduce:
        out = ObjectiveBreakdown(*(getattr(out, k).mean() for k in TERMS))
        for k in TERMS[1:] + TERMS[:1]:  # components first so the message names the source
            if not torch.isfinite(getattr(out, k)):
                raise NumericError(f"non-finite ELBO term {k!r}")
    return out
