"""Simply supported beam with a point load, and its ground-truth counterpart.

The nominal model is the textbook simply-supported deflection line and is
written in torch so the decoder can backpropagate through it. The full model
adds a temperature-dependent rotational spring and a damaged vertical spring
at the right support, solved with Hermite beam elements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from scipy.special import expit

from ..errors import DomainError
from . import fem


@dataclass(frozen=True)
class BeamCase:
    L: float = 1.0
    F: float = 1.0
    I: float = 2.0
    A: float = 1.0
    n_sensors: int = 32
    n_elements: int = 64
    # base of the logarithm used for the vertical spring stiffness
    log_base: float = float(np.e)

    def __post_init__(self):
        if min(self.L, self.F, self.I, self.A) <= 0:
            raise DomainError("beam constants must be positive")

    @property
    def sensor_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n_sensors)


def beam_nominal_deflection(E, x_F, case: BeamCase = BeamCase(), check=True):
    """Deflection of the simply supported beam at the sensor grid.

    ``E`` and ``x_F`` broadcast; the output gains a trailing sensor axis.
    Downward deflection is positive.
    """
    E = torch.as_tensor(E, dtype=torch.float64)
    x_F = torch.as_tensor(x_F, dtype=E.dtype)
    if check:
        if torch.any(E <= 0):
            raise DomainError("Young's modulus must be positive")
        if torch.any((x_F <= 0) | (x_F >= case.L)):
            raise DomainError(f"load position must lie in (0, {case.L})")
    x = torch.as_tensor(case.sensor_grid, dtype=E.dtype)
    E = E[..., None]
    x_F = x_F[..., None]
    L, P, EI = case.L, case.F, E * case.I
    b = L - x_F
    w = P * b * x * (L**2 - b**2 - x**2) / (6 * L * EI)
    return w + P * torch.clamp(x - x_F, min=0.0) ** 3 / (6 * EI)


def beam_rotational_stiffness(T):
    """Support rotational stiffness k_r(T) = exp(8 - 10 / (1 + exp(-T)))."""
    return np.exp(8.0 - 10.0 * expit(np.asarray(T, dtype=float)))


def beam_fe_deflection(E, x_F, k_v, k_r, case: BeamCase = BeamCase(), n_elements=None):
    """FE deflection of the beam pinned at the left end.

    The right end rests on a vertical spring ``k_v`` and a rotational spring
    ``k_r``; pass ``k_v=np.inf`` for a rigid support.
    """
    if E <= 0:
        raise DomainError("Young's modulus must be positive")
    if not 0 < x_F < case.L:
        raise DomainError(f"load position must lie in (0, {case.L})")
    n_el = n_elements or case.n_elements
    nodes = fem.mesh_nodes(case.L, n_el, [x_F])
    EI = np.full(len(nodes) - 1, E * case.I)
    ab = fem.assemble_banded(nodes, EI)
    last = len(nodes) - 1
    fem.fix_dof(ab, 0)
    if np.isinf(k_v):
        fem.fix_dof(ab, 2 * last)
    else:
        fem.add_spring(ab, 2 * last, k_v)
    fem.add_spring(ab, 2 * last + 1, k_r)
    f = np.zeros(2 * len(nodes))
    f[2 * int(np.argmin(np.abs(nodes - x_F)))] = case.F
    u = fem.solve(ab, f)
    return fem.interpolate_deflection(nodes, u, case.sensor_grid)


def beam_full_response(E, x_F, T, log_kv, case: BeamCase = BeamCase(), n_elements=None):
    """Ground-truth deflection for one record of the beam case."""
    k_v = case.log_base ** float(log_kv)
    k_r = float(beam_rotational_stiffness(T))
    return beam_fe_deflection(E, x_F, k_v, k_r, case, n_elements)
