"""Latent workspace transforms, Cholesky-parameterised Gaussians and KLD estimators.

The encoder's Gaussian lives in an unbounded workspace u. Physics latents are
mapped to their bounds with a logistic-affine transform; domain and class
latents pass through unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import ConfigurationError, DomainError

LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class LatentLayout:
    d_zx: int
    d_zc: int
    d_zy: int
    bounds: tuple  # ((lb, ub), ...) per physics dimension
    prior_x: tuple = ()  # cases.PhysicsLatent per physics dimension

    def __post_init__(self):
        if len(self.bounds) != self.d_zx:
            raise ConfigurationError("one (LB, UB) pair is needed per physics latent")
        if self.prior_x and len(self.prior_x) != self.d_zx:
            raise ConfigurationError("one prior is needed per physics latent")
        for lb, ub in self.bounds:
            if not lb < ub:
                raise ConfigurationError(f"invalid latent bounds ({lb}, {ub})")
        if min(self.d_zx, self.d_zc, self.d_zy) < 0:
            raise ConfigurationError("latent sizes must be non-negative")

    @classmethod
    def from_case(cls, case, d_zc=None, d_zy=None):
        pl = case.physics_latents
        return cls(len(pl), d_zc or case.d_zc, d_zy or case.d_zy, tuple((p.lb, p.ub) for p in pl), tuple(pl))

    @property
    def d_z(self):
        return self.d_zx + self.d_zc + self.d_zy

    @property
    def sx(self):
        return slice(0, self.d_zx)

    @property
    def sc(self):
        return slice(self.d_zx, self.d_zx + self.d_zc)

    @property
    def sy(self):
        return slice(self.d_zx + self.d_zc, self.d_z)

    def split(self, z):
        return z[..., self.sx], z[..., self.sc], z[..., self.sy]

    def _lb_width(self, ref):
        lb = torch.tensor([b[0] for b in self.bounds], dtype=ref.dtype, device=ref.device)
        ub = torch.tensor([b[1] for b in self.bounds], dtype=ref.dtype, device=ref.device)
        return lb, ub - lb

    def to_dict(self):
        return {"d_zx": self.d_zx, "d_zc": self.d_zc, "d_zy": self.d_zy, "bounds": [list(b) for b in self.bounds]}


@dataclass
class GaussianWithCholesky:
    """Multivariate normal given by a mean (..., d) and lower Cholesky factor (..., d, d)."""

    mean: torch.Tensor
    chol: torch.Tensor

    @property
    def dim(self):
        return self.mean.shape[-1]

    @property
    def covariance(self):
        return self.chol @ self.chol.transpose(-1, -2)

    @classmethod
    def diagonal(cls, mean, std):
        return cls(mean, torch.diag_embed(std))

    def marginal(self, sl: slice) -> "GaussianWithCholesky":
        """Marginal over a contiguous block; exact only for block-diagonal factors or leading blocks."""
        if sl.start not in (0, None):
            cov = self.covariance[..., sl, sl]
            return GaussianWithCholesky(self.mean[..., sl], torch.linalg.cholesky(cov))
        return GaussianWithCholesky(self.mean[..., sl], self.chol[..., sl, sl])


def workspace_to_constrained(u, layout: LatentLayout):
    """Map workspace u (..., d_z) to constrained z and log|dz/du| (...)."""
    if layout.d_zx == 0:
        return u, torch.zeros(u.shape[:-1], dtype=u.dtype, device=u.device)
    lb, width = layout._lb_width(u)
    ux = u[..., layout.sx]
    zx = lb + width * torch.sigmoid(ux)
    logdet = (torch.log(width) + F.logsigmoid(ux) + F.logsigmoid(-ux)).sum(-1)
    return torch.cat([zx, u[..., layout.d_zx:]], dim=-1), logdet


def constrained_to_workspace(z, layout: LatentLayout):
    """Exact inverse of :func:`workspace_to_constrained`; log-det is negated."""
    z = torch.as_tensor(z, dtype=torch.float64) if not torch.is_tensor(z) else z
    if layout.d_zx == 0:
        return z, torch.zeros(z.shape[:-1], dtype=z.dtype)
    lb, width = layout._lb_width(z)
    p = (z[..., layout.sx] - lb) / width
    if torch.any((p <= 0) | (p >= 1)):
        raise DomainError("physics latents must lie strictly inside their bounds")
    ux = torch.logit(p)
    logdet = (torch.log(width) + torch.log(p) + torch.log1p(-p)).sum(-1)
    return torch.cat([ux, z[..., layout.d_zx:]], dim=-1), -logdet


def sample_reparam(q: GaussianWithCholesky, eps):
    """mean + chol @ eps, broadcasting leading sample dimensions of ``eps``."""
    return q.mean + (q.chol @ eps.unsqueeze(-1)).squeeze(-1)


def gaussian_log_prob(q: GaussianWithCholesky, v):
    diff = (v - q.mean).unsqueeze(-1)
    chol = q.chol.expand(diff.shape[:-2] + q.chol.shape[-2:])
    w = torch.linalg.solve_triangular(chol, diff, upper=False).squeeze(-1)
    half_logdet = torch.log(torch.diagonal(q.chol, dim1=-2, dim2=-1)).sum(-1)
    return -0.5 * (w**2).sum(-1) - half_logdet - 0.5 * q.dim * LOG_2PI


def kld_gaussian_analytic(q: GaussianWithCholesky, p: GaussianWithCholesky):
    """KL(q || p) in closed form."""
    if q.dim != p.dim:
        raise ConfigurationError("dimension mismatch")
    d = q.dim
    Lp = p.chol.expand(torch.broadcast_shapes(q.chol.shape, p.chol.shape))
    A = torch.linalg.solve_triangular(Lp, q.chol.expand_as(Lp), upper=False)
    trace = (A**2).sum((-1, -2))
    m = torch.linalg.solve_triangular(Lp, (p.mean - q.mean).unsqueeze(-1), upper=False).squeeze(-1)
    logdet_p = 2 * torch.log(torch.diagonal(p.chol, dim1=-2, dim2=-1)).sum(-1)
    logdet_q = 2 * torch.log(torch.diagonal(q.chol, dim1=-2, dim2=-1)).sum(-1)
    return 0.5 * (trace + (m**2).sum(-1) - d + logdet_p - logdet_q)


def physics_log_prior(z_x, layout: LatentLayout):
    """Log density of the physics latents under their (untruncated) priors, summed over dims.

    Values outside the support of a uniform prior get -inf.
    """
    out = torch.zeros(z_x.shape[:-1], dtype=z_x.dtype, device=z_x.device)
    for i, p in enumerate(layout.prior_x):
        v = z_x[..., i]
        if p.kind == "normal":
            out = out - 0.5 * ((v - p.loc) / p.scale) ** 2 - math.log(p.scale) - 0.5 * LOG_2PI
        else:
            inside = (v >= p.lb) & (v <= p.ub)
            lp = torch.where(inside, torch.zeros_like(v), torch.full_like(v, -math.inf))
            out = out + lp - math.log(p.ub - p.lb)
    return out


def kld_monte_carlo(q: GaussianWithCholesky, prior_eval, layout: LatentLayout, n_mc=8, generator=None, eps=None,
                    per_sample=False):
    """Monte Carlo KL(q(u) || p(z(u))) with the change-of-variables correction.

    ``prior_eval`` maps constrained z (n_mc, ..., d_z) to log p(z). Samples where
    the prior density vanishes contribute +inf; ``per_sample=True`` returns the
    (n_mc, ...) contributions so callers can flag them.
    """
    if n_mc < 1:
        raise ConfigurationError("n_mc must be at least 1")
    if eps is None:
        eps = torch.randn((n_mc,) + q.mean.shape, generator=generator, dtype=q.mean.dtype)
    u = sample_reparam(q, eps)
    z, logdet = workspace_to_constrained(u, layout)
    terms = gaussian_log_prob(q, u) - prior_eval(z) - logdet
    return terms if per_sample else terms.mean(0)
