"""Two-span bridge on three vertical springs under a slowly moving point load.

This is a quasi-static 1-D Euler-Bernoulli reduction: the sensor records the
strain influence line of the moving load, sampled on a time grid.

The nominal model is solved in closed form with the flexibility method (pier
reaction as redundant) and is differentiable in torch. The full model uses
Hermite beam elements so that local thickness loss near the supports can be
represented. Nodes sit on the pier and the damage-zone boundaries, loads are
applied as consistent nodal vectors and the sensor moment is recovered from
the left support reaction, so results do not depend on the mesh density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..errors import DomainError
from . import fem


@dataclass(frozen=True)
class BridgeCase:
    L_total: float = 12.5
    width: float = 0.1
    height: float = 0.6
    E_mat: float = 210e9
    rho: float = 7800.0
    nu: float = 0.3
    n_elements: int = 128
    v_ref: float = 0.5
    F_ref: float = 1.0  # kN
    damage_zone: float = 0.1
    n_times: int = 64
    t_end: float = 25.0
    sensor_position: float = 12.5 / 4
    log_base: float = 10.0

    def __post_init__(self):
        consts = (self.L_total, self.width, self.height, self.E_mat, self.rho, self.v_ref, self.F_ref)
        if min(consts) <= 0:
            raise DomainError("bridge constants must be positive")
        if not 0 < self.sensor_position < self.L_total / 2 - 2.0:
            raise DomainError("sensor must lie in the left span for every pier offset")

    @property
    def I(self) -> float:
        return self.width * self.height**3 / 12

    @property
    def EI(self) -> float:
        return self.E_mat * self.I

    @property
    def time_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_times)


def _green(x, p, L, EI):
    # deflection at x of a simply supported beam for a unit load at p
    lo = torch.minimum(x, p)
    hi = torch.maximum(x, p)
    b = L - hi
    return lo * b * (L**2 - b**2 - lo**2) / (6 * L * EI)


def _moment_ss(s, p, L):
    return torch.minimum(s, p) * (L - torch.maximum(s, p)) / L


def bridge_nominal_strain(
    log_kv1,
    log_kv2,
    delta_s,
    case: BridgeCase = BridgeCase(),
    velocity=None,
    load=None,
    sensor=None,
    check=True,
):
    """Sensor strain time series (microstrain) of the undamaged bridge.

    ``velocity`` and ``load`` (kN) default to the reference vehicle; all
    inputs broadcast and the output gains a trailing time axis. Tension at
    the bottom fibre (sagging) is positive.
    """
    log_kv1 = torch.as_tensor(log_kv1, dtype=torch.float64)
    log_kv2 = torch.as_tensor(log_kv2, dtype=log_kv1.dtype)
    delta_s = torch.as_tensor(delta_s, dtype=log_kv1.dtype)
    L, EI = case.L_total, case.EI
    a = (L / 2 + delta_s)[..., None]
    if check and torch.any((a <= 0) | (a >= L)):
        raise DomainError("pier must lie strictly inside the bridge")
    v = case.v_ref if velocity is None else torch.as_tensor(velocity, dtype=a.dtype)[..., None]
    P = 1e3 * (case.F_ref if load is None else torch.as_tensor(load, dtype=a.dtype)[..., None])
    s = torch.as_tensor(case.sensor_position if sensor is None else sensor, dtype=a.dtype)
    t = torch.as_tensor(case.time_grid, dtype=a.dtype)
    k1 = (case.log_base ** log_kv1)[..., None]
    k2 = (case.log_base ** log_kv2)[..., None]
    k3 = k1

    p = v * t
    on = (p >= 0) & (p <= L)
    p = torch.clamp(p, 0.0, L)
    # primary structure: beam on the two end springs, pier removed
    delta_p = _green(a, p, L, EI) + (L - p) * (L - a) / (L**2 * k1) + p * a / (L**2 * k3)
    f_aa = _green(a, a, L, EI) + ((L - a) / L) ** 2 / k1 + (a / L) ** 2 / k3
    R2 = delta_p / (f_aa + 1.0 / k2)
    M = P * (_moment_ss(s, p, L) - R2 * _moment_ss(s, a, L))
    strain = M * (case.height / 2) / EI * 1e6
    return torch.where(on, strain, torch.zeros_like(strain))


def damage_zones(case: BridgeCase, pier):
    """Damaged intervals of length damage_zone * L around the three supports.

    The pier zone is centred on the pier; the end zones extend inwards.
    """
    w = case.damage_zone * case.L_total
    L = case.L_total
    return [(0.0, w), (pier - w / 2, pier + w / 2), (L - w, L)]


def bridge_fe_strain(
    log_kv1,
    log_kv2,
    y=(0.0, 0.0, 0.0),
    delta_v=0.0,
    delta_s=0.0,
    delta_F=0.0,
    case: BridgeCase = BridgeCase(),
    n_elements=None,
    sensor=None,
):
    """FE strain influence line (microstrain) including support-zone damage.

    Thickness loss ``y_i`` in the zone around support i scales the bending
    stiffness there by (1 - y_i)^3.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(y >= 1):
        raise DomainError("damage scores must lie in [0, 1)")
    L = case.L_total
    pier = L / 2 + delta_s
    if not 0 < pier < L:
        raise DomainError("pier must lie strictly inside the bridge")
    s = case.sensor_position if sensor is None else sensor
    v = case.v_ref + delta_v
    t = case.time_grid
    p_all = v * t
    on = (p_all >= 0) & (p_all <= L)
    loads = p_all[on]
    zones = damage_zones(case, pier)
    required = [pier, *[b for z in zones for b in z]]
    nodes = fem.mesh_nodes(L, n_elements or case.n_elements, required)
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    EI = np.full(len(mid), case.EI)
    for (lo, hi), yi in zip(zones, y):
        EI[(mid > lo) & (mid < hi)] *= (1 - yi) ** 3
    ab = fem.assemble_banded(nodes, EI)
    j_pier = int(np.argmin(np.abs(nodes - pier)))
    fem.add_spring(ab, 0, case.log_base**log_kv1)
    fem.add_spring(ab, 2 * j_pier, case.log_base**log_kv2)
    fem.add_spring(ab, 2 * (len(nodes) - 1), case.log_base**log_kv1)

    strain = np.zeros(len(t))
    if loads.size:
        P = 1e3 * (case.F_ref + delta_F)
        u = fem.solve(ab, fem.point_loads(nodes, loads, P))
        # sagging moment at the sensor from the left free body; differencing
        # nodal displacements loses precision when supports are soft
        R1 = case.log_base**log_kv1 * u[0]
        M = R1 * s - P * np.clip(s - loads, 0.0, None)
        strain[on] = M * case.height / 2 / case.EI * 1e6
    return strain


def bridge_full_strain(log_kv1, log_kv2, y1, y2, y3, delta_v, delta_s, delta_F, case=BridgeCase(), n_elements=None):
    """Ground-truth strain series for one bridge of the population."""
    return bridge_fe_strain(
        log_kv1, log_kv2, (y1, y2, y3), delta_v, delta_s, delta_F, case=case, n_elements=n_elements
    )
