"""Case-study definitions: generative factors, latent priors and model handles.

Each case bundles the ground-truth factor distribution (all uniform), the
physics-grounded latent variables with their priors and bounds, default noise
levels and the two physics models: the full simulator used to synthesise data
and the nominal model embedded in the decoder.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import torch

from .errors import ConfigurationError, DomainError
from .physics.beam import BeamCase, beam_full_response, beam_nominal_deflection
from .physics.bridge import BridgeCase, bridge_full_strain, bridge_nominal_strain
from .physics.oscillator import OscillatorCase, oscillator_full, oscillator_nominal

CASE_IDS = ("beam", "oscillator", "bridge")
ROLES = ("physics", "domain", "class", "unknown")


@dataclass(frozen=True)
class NoiseSpec:
    sigma_x: float
    sigma_c: float
    sigma_y: float

    def __post_init__(self):
        if min(self.sigma_x, self.sigma_c, self.sigma_y) < 0:
            raise DomainError("noise standard deviations must be non-negative")


@dataclass(frozen=True)
class Factor:
    """A ground-truth generative factor with a uniform distribution."""

    name: str
    role: str
    low: float
    high: float
    unit: str = ""

    def percentile(self, q):
        return self.low + np.asarray(q) / 100.0 * (self.high - self.low)

    @property
    def midpoint(self):
        return 0.5 * (self.low + self.high)


@dataclass(frozen=True)
class PhysicsLatent:
    """Bounded physics-grounded latent variable and its prior density.

    ``kind`` is "normal" (loc, scale; untruncated density inside the bounds)
    or "uniform" (constant density over the bounds).
    """

    name: str
    lb: float
    ub: float
    kind: str = "uniform"
    loc: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.lb < self.ub:
            raise ConfigurationError(f"latent {self.name}: lower bound must be below upper bound")
        if self.kind not in ("normal", "uniform"):
            raise ConfigurationError(f"latent {self.name}: unknown prior kind {self.kind!r}")


@dataclass(frozen=True)
class CaseSpec:
    case_id: str
    factors: tuple
    physics_latents: tuple
    d_zc: int
    d_zy: int
    noise: NoiseSpec
    grl_lambda: float
    constants: object
    response_scale: float = 1.0
    response_unit: str = ""

    def names(self, role):
        return [f.name for f in self.factors if f.role == role]

    def by_role(self, role):
        return [f for f in self.factors if f.role == role]

    def factor(self, name) -> Factor:
        for f in self.factors:
            if f.name == name:
                return f
        raise ConfigurationError(f"case {self.case_id!r} has no generative factor {name!r}")

    @property
    def d_x(self) -> int:
        c = self.constants
        return {"beam": lambda: c.n_sensors, "oscillator": lambda: c.n_times, "bridge": lambda: c.n_times}[
            self.case_id
        ]()

    @property
    def d_c(self) -> int:
        return len(self.names("domain"))

    @property
    def d_y(self) -> int:
        return len(self.names("class"))

    @property
    def d_zx(self) -> int:
        return len(self.physics_latents)

    def full_response(self, s_x, s_c, s_y, s_u) -> np.ndarray:
        """Noise-free response of one record from the ground-truth simulator."""
        c = self.constants
        if self.case_id == "beam":
            (E, x_F), (T,), (log_kv,) = s_x, s_c, s_y
            out = beam_full_response(E, x_F, T, log_kv, c)
        elif self.case_id == "oscillator":
            (m,), (T,), (zeta,), (x0,) = s_x, s_c, s_y, s_u
            out = oscillator_full(m, zeta, T, x0, c).numpy()
        else:
            (kv1, kv2), (dv, ds), (y1, y2, y3), (dF,) = s_x, s_c, s_y, s_u
            out = bridge_full_strain(kv1, kv2, y1, y2, y3, dv, ds, dF, c)
        return self.response_scale * np.asarray(out)

    def nominal(self, z_x: torch.Tensor) -> torch.Tensor:
        """Nominal physics f(z_x) in observation units; z_x has shape (..., d_zx)."""
        c = self.constants
        if self.case_id == "beam":
            out = beam_nominal_deflection(z_x[..., 0], z_x[..., 1], c, check=False)
        elif self.case_id == "oscillator":
            out = oscillator_nominal(z_x[..., 0], c)
        else:
            out = bridge_nominal_strain(z_x[..., 0], z_x[..., 1], z_x[..., 2], c, check=False)
        return self.response_scale * out

    def nominal_reference(self, s_x) -> np.ndarray:
        """Nominal physics at ground-truth physics factors (reference domain/class)."""
        s_x = np.atleast_2d(np.asarray(s_x, dtype=float))
        if self.case_id == "bridge":
            s_x = np.concatenate([s_x, np.zeros((len(s_x), 1))], axis=1)
        with torch.no_grad():
            return self.nominal(torch.as_tensor(s_x, dtype=torch.float64)).numpy()


def _beam(**overrides):
    return CaseSpec(
        case_id="beam",
        factors=(
            Factor("E", "physics", 2.5, 4.5, "Pa"),
            Factor("x_F", "physics", 0.3, 0.7, "m"),
            Factor("T", "domain", -11.0, 5.0, "C"),
            Factor("log_kv", "class", 6.0, 8.0, "N/m"),
        ),
        physics_latents=(
            PhysicsLatent("E", 0.1, 10.0, "normal", 4.0, 1.0),
            PhysicsLatent("x_F", 0.0, 1.0, "normal", 0.5, 0.2),
        ),
        d_zc=2,
        d_zy=2,
        noise=NoiseSpec(0.02, 0.02, 0.02),
        grl_lambda=1 / 256,
        constants=BeamCase(),
        response_scale=1e3,
        response_unit="mm",
    )


def _oscillator():
    return CaseSpec(
        case_id="oscillator",
        factors=(
            Factor("m", "physics", 1.2, 1.8, "kg"),
            Factor("zeta", "class", 0.0, 2.0, ""),
            Factor("T", "domain", 0.0, 40.0, "C"),
            Factor("x0", "unknown", 0.9, 1.1, "m"),
        ),
        physics_latents=(PhysicsLatent("m", 1.0, 2.0, "uniform"),),
        d_zc=4,
        d_zy=4,
        noise=NoiseSpec(0.01, 0.01, 0.01),
        grl_lambda=1 / 128,
        constants=OscillatorCase(),
        response_unit="m",
    )


def _bridge():
    return CaseSpec(
        case_id="bridge",
        factors=(
            Factor("log_kv1", "physics", 9.0, 11.0, "N/m"),
            Factor("log_kv2", "physics", 9.0, 11.0, "N/m"),
            Factor("y1", "class", 0.0, 0.9, ""),
            Factor("y2", "class", 0.0, 0.9, ""),
            Factor("y3", "class", 0.0, 0.9, ""),
            Factor("delta_v", "domain", -0.1, 0.1, "m/s"),
            Factor("delta_s", "domain", -2.0, 2.0, "m"),
            Factor("delta_F", "unknown", -0.1, 0.1, "kN"),
        ),
        physics_latents=(
            PhysicsLatent("log_kv1", 8.0, 12.0, "uniform"),
            PhysicsLatent("log_kv2", 8.0, 12.0, "uniform"),
            PhysicsLatent("delta_s", -2.0, 2.0, "uniform"),
        ),
        d_zc=4,
        d_zy=4,
        noise=NoiseSpec(0.001, 0.001, 0.001),
        grl_lambda=1 / 1024,
        constants=BridgeCase(),
        response_unit="microstrain",
    )


_BUILDERS: dict[str, Callable[[], CaseSpec]] = {
    "beam": _beam,
    "oscillator": _oscillator,
    "bridge": _bridge,
}


def get_case(case_id: str, **overrides) -> CaseSpec:
    """Case definition by id; keyword overrides replace CaseSpec fields."""
    if isinstance(case_id, CaseSpec):
        return replace(case_id, **overrides) if overrides else case_id
    try:
        spec = _BUILDERS[case_id]()
    except KeyError:
        raise ConfigurationError(f"unknown case id {case_id!r}; expected one of {CASE_IDS}") from None
    return replace(spec, **overrides) if overrides else spec
