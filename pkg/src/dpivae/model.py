"""Encoder, gradient reversal, hybrid decoder, auxiliary decoders and prior networks."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from .cases import CaseSpec, get_case
from .errors import ConfigurationError, NumericError
from .latent import GaussianWithCholesky, LatentLayout

CHECKPOINT_VERSION = 1


class _GradientReversal(torch.autograd.Function):
    @staticmethod
    def forward(ctx, v, lam):
        ctx.lam = lam
        return v.view_as(v)

    @staticmethod
    def backward(ctx, grad):
        return -ctx.lam * grad, None


def grl(v, lam):
    """Identity in the forward pass; scales the upstream gradient by -lam."""
    return _GradientReversal.apply(v, float(lam))


@dataclass
class GrlConfig:
    lambda_: float = 1 / 256

    def __post_init__(self):
        if not math.isfinite(self.lambda_):
            raise ConfigurationError("GRL coefficient must be finite")


@dataclass
class ModelConfig:
    hidden: int = 128
    shared_encoder: bool = True
    mean_clamp: tuple = (-10.0, 10.0)
    logstd_clamp: tuple = (-7.0, 2.0)
    cov_clamp: tuple = (-5.0, 5.0)
    aux_logstd_clamp: tuple = (-7.0, 2.0)
    sigma_x_init: float = 0.1
    use_correction: bool = True
    conditional_priors: bool = True
    d_zc: int | None = None
    d_zy: int | None = None
    dtype: str = "float64"

    def __post_init__(self):
        for name in ("mean_clamp", "logstd_clamp", "cov_clamp", "aux_logstd_clamp"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigurationError(f"{name} must be an increasing pair")
            setattr(self, name, (float(lo), float(hi)))
        if self.dtype not in ("float32", "float64"):
            raise ConfigurationError(f"unsupported dtype {self.dtype!r}")
        if self.hidden < 1 or self.sigma_x_init <= 0:
            raise ConfigurationError("hidden width and sigma_x_init must be positive")


class Standardizer(nn.Module):
    """Fixed affine map to zero mean / unit variance, stored as buffers."""

    def __init__(self, dim):
        super().__init__()
        self.register_buffer("mean", torch.zeros(dim, dtype=torch.float64))
        self.register_buffer("std", torch.ones(dim, dtype=torch.float64))

    def fit(self, data):
        data = torch.as_tensor(np.asarray(data), dtype=self.mean.dtype)
        if len(data):
            self.mean.copy_(data.mean(0))
            self.std.copy_(data.std(0).clamp_min(1e-8) if len(data) > 1 else torch.ones_like(self.std))
        return self

    def forward(self, v):
        return (v - self.mean) / self.std


def _mlp(d_in, hidden, d_out):
    return nn.Sequential(nn.Linear(d_in, hidden), nn.ReLU(), nn.Linear(hidden, d_out))


class Encoder(nn.Module):
    """Shared full-covariance encoder, or one diagonal encoder per latent subset."""

    def __init__(self, d_x, layout: LatentLayout, cfg: ModelConfig):
        super().__init__()
        self.layout = layout
        self.cfg = cfg
        d = layout.d_z
        self.scaler = Standardizer(d_x)
        if cfg.shared_encoder:
            self.body = nn.Sequential(nn.Linear(d_x, cfg.hidden), nn.ReLU())
            self.mean_head = nn.Linear(cfg.hidden, d)
            self.logstd_head = nn.Linear(cfg.hidden, d)
            self.cov_head = nn.Linear(cfg.hidden, d * d)
        else:
            sizes = (layout.d_zx, layout.d_zc, layout.d_zy)
            self.subnets = nn.ModuleList([_mlp(d_x, cfg.hidden, 2 * k) for k in sizes])
        # strictly-lower-triangular mask, reused every call
        self.register_buffer("tril_mask", torch.tril(torch.ones(d, d, dtype=torch.float64), -1))

    def heads(self, x):
        """Clamped (mean, logstd, cov) head outputs; cov is None for separate encoders."""
        h = self.scaler(x)
        c = self.cfg
        if self.cfg.shared_encoder:
            h = self.body(h)
            mean = self.mean_head(h).clamp(*c.mean_clamp)
            logstd = self.logstd_head(h).clamp(*c.logstd_clamp)
            cov = self.cov_head(h).clamp(*c.cov_clamp)
            return mean, logstd, cov.unflatten(-1, (self.layout.d_z, self.layout.d_z))
        means, logstds = [], []
        for net in self.subnets:
            out = net(h)
            k = out.shape[-1] // 2
            means.append(out[..., :k])
            logstds.append(out[..., k:])
        mean = torch.cat(means, -1).clamp(*c.mean_clamp)
        logstd = torch.cat(logstds, -1).clamp(*c.logstd_clamp)
        return mean, logstd, None

    def forward(self, x) -> GaussianWithCholesky:
        mean, logstd, cov = self.heads(x)
        chol = torch.diag_embed(torch.exp(logstd))
        if cov is not None:
            chol = chol + cov * self.tril_mask
        if not (torch.all(torch.isfinite(mean)) and torch.all(torch.isfinite(chol))):
            raise NumericError("encoder produced non-finite output")
        return GaussianWithCholesky(mean, chol)

    def subset_parameters(self, index):
        """Parameters of the separate encoder for subset 0 (z_x), 1 (z_c) or 2 (z_y)."""
        if self.cfg.shared_encoder:
            raise ConfigurationError("the shared encoder has no per-subset parameters")
        return list(self.subnets[index].parameters())


class GaussianHead(nn.Module):
    """[d_in -> hidden -> (mean, log-std)] diagonal Gaussian with standardised input/output."""

    def __init__(self, d_in, d_out, hidden, logstd_clamp):
        super().__init__()
        self.net = _mlp(d_in, hidden, 2 * d_out)
        self.d_out = d_out
        self.logstd_clamp = logstd_clamp
        self.in_scaler = Standardizer(d_in)
        self.out_scaler = Standardizer(d_out)

    def forward(self, v):
        out = self.net(self.in_scaler(v))
        mean = out[..., : self.d_out] * self.out_scaler.std + self.out_scaler.mean
        logstd = out[..., self.d_out :].clamp(*self.logstd_clamp) + torch.log(self.out_scaler.std)
        return mean, torch.exp(logstd)


class DPIVAE(nn.Module):
    """Physics-informed VAE with latent partition (z_x, z_c, z_y).

    The response likelihood is Normal(f(z_x) + g(grl(z_c, z_y)), sigma_x^2 I)
    with f the case's nominal physics model.
    """

    def __init__(self, case: CaseSpec | str, cfg: ModelConfig | None = None, grl_lambda=None, seed=None):
        super().__init__()
        if seed is not None:
            torch.manual_seed(seed)
        self.case = get_case(case)
        self.cfg = cfg = cfg or ModelConfig()
        self.layout = LatentLayout.from_case(self.case, cfg.d_zc, cfg.d_zy)
        self.grl = GrlConfig(self.case.grl_lambda if grl_lambda is None else grl_lambda)
        L, h = self.layout, cfg.hidden
        d_x, d_c, d_y = self.case.d_x, self.case.d_c, self.case.d_y
        self.encoder = Encoder(d_x, L, cfg)
        self.correction = _mlp(L.d_zc + L.d_zy, h, d_x)
        self.register_buffer("x_scale", torch.ones((), dtype=torch.float64))
        self.log_sigma_x = nn.Parameter(torch.tensor(math.log(cfg.sigma_x_init), dtype=torch.float64))
        self.aux_c = GaussianHead(L.d_zc, d_c, h, cfg.aux_logstd_clamp)
        self.aux_y = GaussianHead(L.d_zy, d_y, h, cfg.aux_logstd_clamp)
        self.prior_c = GaussianHead(d_c, L.d_zc, h, cfg.logstd_clamp)
        self.prior_y = GaussianHead(d_y, L.d_zy, h, cfg.logstd_clamp)
        self.to(self.dtype)

    # -- setup -----------------------------------------------------------

    def fit_normalization(self, x, c, y):
        """Set input/output standardisation from training data (no learning)."""
        self.encoder.scaler.fit(x)
        self.x_scale.fill_(float(np.std(np.asarray(x))) if len(x) > 1 else 1.0)
        self.aux_c.out_scaler.fit(c)
        self.aux_y.out_scaler.fit(y)
        self.prior_c.in_scaler.fit(c)
        self.prior_y.in_scaler.fit(y)
        return self

    def parameter_groups(self):
        """(x-encoder params, other encoder params, sigma_x, everything else).

        With a shared encoder every encoder parameter counts as x-encoder.
        """
        if self.cfg.shared_encoder:
            enc_x = list(self.encoder.parameters())
            enc_other = []
        else:
            enc_x = self.encoder.subset_parameters(0)
            enc_other = self.encoder.subset_parameters(1) + self.encoder.subset_parameters(2)
        taken = {id(p) for p in enc_x + enc_other} | {id(self.log_sigma_x)}
        rest = [p for p in self.parameters() if id(p) not in taken]
        return enc_x, enc_other, [self.log_sigma_x], rest

    # -- model pieces ----------------------------------------------------

    @property
    def dtype(self):
        return getattr(torch, self.cfg.dtype)

    def as_tensor(self, v):
        return torch.as_tensor(v, dtype=self.dtype)

    def encode(self, x) -> GaussianWithCholesky:
        return self.encoder(self.as_tensor(x))

    @property
    def sigma_x(self):
        return torch.exp(self.log_sigma_x)

    def decode_response(self, z, lam=None):
        """(x_hat_p, x_hat_d, sigma_x) for constrained latents z (..., d_z)."""
        lam = self.grl.lambda_ if lam is None else lam
        z_x, z_c, z_y = self.layout.split(z)
        x_p = self.case.nominal(z_x).to(z.dtype)
        if self.cfg.use_correction:
            x_d = self.correction(grl(torch.cat([z_c, z_y], -1), lam)) * self.x_scale
        else:
            x_d = torch.zeros_like(x_p)
        return x_p, x_d, self.sigma_x

    def decode_domain(self, z_c):
        return self.aux_c(z_c)

    def decode_class(self, z_y):
        return self.aux_y(z_y)

    def _prior(self, head, obs, d):
        if self.cfg.conditional_priors:
            return head(obs)
        zeros = torch.zeros(obs.shape[:-1] + (d,), dtype=self.dtype)
        return zeros, torch.ones_like(zeros)

    def prior_domain(self, c):
        return self._prior(self.prior_c, self.as_tensor(c), self.layout.d_zc)

    def prior_class(self, y):
        return self._prior(self.prior_y, self.as_tensor(y), self.layout.d_zy)

    @torch.no_grad()
    def predict_class(self, x):
        """Class mean and std from the posterior mean of z_y (responses only)."""
        q = self.encode(x)
        mean, std = self.decode_class(q.mean[..., self.layout.sy])
        return mean.numpy(), std.numpy()

    # -- persistence -----------------------------------------------------

    def manifest(self):
        cfg = asdict(self.cfg)
        return {
            "version": CHECKPOINT_VERSION,
            "case_id": self.case.case_id,
            "layout": self.layout.to_dict(),
            "model_config": cfg,
            "grl_lambda": self.grl.lambda_,
        }

    def save(self, path, extra=None):
        torch.save({"manifest": self.manifest(), "state": self.state_dict(), "extra": extra or {}}, path)

    @classmethod
    def load(cls, path, expect_layout: LatentLayout | None = None):
        blob = torch.load(path, weights_only=False)
        man = blob.get("manifest", {})
        if man.get("version") != CHECKPOINT_VERSION:
            raise ConfigurationError(f"{path}: unsupported checkpoint version {man.get('version')}")
        cfg = ModelConfig(**man["model_config"])
        model = cls(man["case_id"], cfg, man["grl_lambda"])
        if model.layout.to_dict() != man["layout"]:
            raise ConfigurationError(f"{path}: latent layout does not match the case definition")
        if expect_layout is not None and expect_layout.to_dict() != man["layout"]:
            raise ConfigurationError(f"{path}: latent layout mismatch with the expected layout")
        try:
            model.load_state_dict(blob["state"])
        except RuntimeError as exc:
            raise ConfigurationError(f"{path}: parameter layout mismatch: {exc}") from exc
        model.extra = blob.get("extra", {})
        return model
