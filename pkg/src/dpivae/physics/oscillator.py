"""Free vibration of a mass-spring-dashpot system released from rest."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..errors import DomainError


@dataclass(frozen=True)
class OscillatorCase:
    k_ref: float = 1.0
    T_ref: float = 20.0
    alpha_T: float = 0.01
    n_times: int = 64
    t_end: float = 10.0

    def __post_init__(self):
        if self.k_ref <= 0:
            raise DomainError("k_ref must be positive")

    @property
    def time_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_times)


def oscillator_spring_stiffness(T, case: OscillatorCase = OscillatorCase()):
    k = case.k_ref + case.alpha_T * (case.T_ref - np.asarray(T, dtype=float))
    if np.any(k <= 0):
        raise DomainError(f"spring stiffness non-positive at T={T}")
    return k


def oscillator_nominal(m, case: OscillatorCase = OscillatorCase()):
    """Undamped unit-amplitude response cos(sqrt(k_ref/m) t) on the time grid."""
    m = torch.as_tensor(m, dtype=torch.float64)
    t = torch.as_tensor(case.time_grid, dtype=m.dtype)
    return torch.cos(torch.sqrt(case.k_ref / m[..., None]) * t)


def _free_vibration(m, zeta, k, x0, t):
    # x = x0 exp(-g t) [C(t) + g S(t)] with w2 = k/m - g^2, where
    # C = cos(sqrt(w2) t), S = sin(sqrt(w2) t)/sqrt(w2); both are entire in w2,
    # so the same expression covers all damping regimes.
    g = zeta / (2 * m)
    w2 = k / m - g**2
    arg = w2 * t**2
    small = torch.abs(arg) < 1e-6
    w = torch.sqrt(torch.abs(torch.where(small, torch.ones_like(w2), w2)))
    C_under = torch.cos(w * t)
    S_under = torch.sin(w * t) / w
    C_over = torch.cosh(w * t)
    S_over = torch.sinh(w * t) / w
    C_series = 1 - arg / 2 + arg**2 / 24
    S_series = t * (1 - arg / 6 + arg**2 / 120)
    C = torch.where(small, C_series, torch.where(w2 > 0, C_under, C_over))
    S = torch.where(small, S_series, torch.where(w2 > 0, S_under, S_over))
    return x0 * torch.exp(-g * t) * (C + g * S)


def oscillator_full(m, zeta, T, x0, case: OscillatorCase = OscillatorCase()):
    """Closed-form solution of m x'' + zeta x' + k(T) x = 0, x(0)=x0, x'(0)=0.

    Inputs broadcast; the output gains a trailing time axis.
    """
    m = torch.as_tensor(m, dtype=torch.float64)
    if torch.any(m <= 0):
        raise DomainError("mass must be positive")
    zeta = torch.as_tensor(zeta, dtype=m.dtype)
    if torch.any(zeta < 0):
        raise DomainError("damping must be non-negative")
    T = torch.as_tensor(T, dtype=m.dtype)
    k = case.k_ref + case.alpha_T * (case.T_ref - T)
    if torch.any(k <= 0):
        raise DomainError("spring stiffness non-positive")
    x0 = torch.as_tensor(x0, dtype=m.dtype)
    t = torch.as_tensor(case.time_grid, dtype=m.dtype)
    return _free_vibration(m[..., None], zeta[..., None], k[..., None], x0[..., None], t)
