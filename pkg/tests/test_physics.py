"""Oracle tests for the nominal and full physics models."""

import math

import numpy as np
import pytest
import torch

from dpivae.errors import DomainError
from dpivae.physics import fem
from dpivae.physics.beam import (
    BeamCase,
    beam_fe_deflection,
    beam_full_response,
    beam_nominal_deflection,
    beam_rotational_stiffness,
)
from dpivae.physics.bridge import BridgeCase, bridge_fe_strain, bridge_full_strain, bridge_nominal_strain
from dpivae.physics.oscillator import (
    OscillatorCase,
    oscillator_full,
    oscillator_nominal,
    oscillator_spring_stiffness,
)

BEAM = BeamCase()
OSC = OscillatorCase()
BRIDGE = BridgeCase()


def rk4_oscillator(m, zeta, k, x0, t_grid, dt=1e-4):
    """Classical fourth-order Runge-Kutta on m x'' + zeta x' + k x = 0.

    Each grid interval is split into equal steps no longer than ``dt`` so the
    integrator lands exactly on the sampling times.
    """

    def f(s):
        return np.array([s[1], -(zeta * s[1] + k * s[0]) / m])

    state = np.array([x0, 0.0])
    out = [x0]
    for t0, t1 in zip(t_grid[:-1], t_grid[1:]):
        n = int(np.ceil((t1 - t0) / dt))
        h = (t1 - t0) / n
        for _ in range(n):
            k1 = f(state)
            k2 = f(state + 0.5 * h * k1)
            k3 = f(state + 0.5 * h * k2)
            k4 = f(state + h * k3)
            state = state + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(state[0])
    return np.array(out)


def central_jacobian(fn, args, h=1e-5):
    """Central finite differences on inputs normalised by their magnitude."""
    cols = []
    for i, a in enumerate(args):
        scale = max(abs(a), 1.0)
        up = list(args)
        dn = list(args)
        up[i] = a + h * scale
        dn[i] = a - h * scale
        cols.append((fn(*up) - fn(*dn)) / (2 * h * scale))
    return np.stack(cols, -1)


def autograd_jacobian(fn, args):
    inp = [torch.tensor(a, dtype=torch.float64, requires_grad=True) for a in args]
    out = fn(*inp)
    rows = []
    for k in range(out.shape[-1]):
        g = torch.autograd.grad(out[k], inp, retain_graph=True, allow_unused=True)
        rows.append([0.0 if gi is None else float(gi) for gi in g])
    return np.array(rows)


# --------------------------------------------------------------------- FE


class TestFiniteElements:
    def test_element_rigid_body_modes(self):
        k = fem.element_stiffness(np.array([3.0]), np.array([0.7]))[0]
        translation = np.array([1.0, 0.0, 1.0, 0.0])
        rotation = np.array([0.0, 1.0, 0.7, 1.0])
        np.testing.assert_allclose(k @ translation, 0.0, atol=1e-12)
        np.testing.assert_allclose(k @ rotation, 0.0, atol=1e-12)
        np.testing.assert_allclose(k, k.T)

    def test_banded_assembly_matches_dense(self):
        nodes = np.array([0.0, 0.2, 0.5, 0.55, 1.0])
        EI = np.array([1.0, 2.0, 0.5, 3.0])
        ab = fem.assemble_banded(nodes, EI)
        ke = fem.element_stiffness(EI, np.diff(nodes))
        dense = np.zeros((10, 10))
        for e in range(4):
            dense[2 * e : 2 * e + 4, 2 * e : 2 * e + 4] += ke[e]
        rebuilt = np.zeros_like(dense)
        for col in range(10):
            for off in range(fem.BANDWIDTH + 1):
                row = col - off
                if row >= 0:
                    rebuilt[row, col] = rebuilt[col, row] = ab[fem.BANDWIDTH - off, col]
        np.testing.assert_allclose(rebuilt, dense)

    def test_mesh_contains_required_points_without_slivers(self):
        nodes = fem.mesh_nodes(10.0, 20, [3.3333, 3.3334, 7.1])
        for p in (0.0, 3.3333, 3.3334, 7.1, 10.0):
            assert np.min(np.abs(nodes - p)) < 1e-12
        assert np.all(np.diff(nodes) > 0)
        assert np.max(np.diff(nodes)) <= 0.5 + 1e-12


# ------------------------------------------------------------------- beam


class TestBeamNominal:
    def test_pinned_ends(self):
        w = beam_nominal_deflection(3.0, 0.4).numpy()
        assert abs(w[0]) < 1e-15 and abs(w[-1]) < 1e-15

    def test_midspan_closed_form(self):
        case = BeamCase(n_sensors=33)  # odd grid puts a sensor at midspan
        w = beam_nominal_deflection(4.0, 0.5, case).numpy()
        expected = case.F * case.L**3 / (48 * 4.0 * case.I)
        assert abs(w[16] - expected) < 1e-9
        assert expected == pytest.approx(1 / 384)

    def test_branches_continuous_at_load(self):
        # load placed on a sensor: both branch formulas must agree there
        a = float(BEAM.sensor_grid[11])
        E = 3.3
        w = beam_nominal_deflection(E, a).numpy()[11]
        L, EI, P = BEAM.L, E * BEAM.I, BEAM.F
        b = L - a
        left = P * b * a * (L**2 - b**2 - a**2) / (6 * L * EI)
        right = P * a * b * (L**2 - a**2 - b**2) / (6 * L * EI)
        assert abs(w - left) < 1e-12
        assert abs(left - right) < 1e-12

    def test_matches_textbook_general_formula(self):
        # w(x) for x >= a from the mirrored left-branch formula
        E, a = 2.7, 0.31
        w = beam_nominal_deflection(E, a).numpy()
        x = BEAM.sensor_grid
        L, EI, P = BEAM.L, E * BEAM.I, BEAM.F
        b = L - a
        ref = np.where(
            x <= a,
            P * b * x * (L**2 - b**2 - x**2) / (6 * L * EI),
            P * a * (L - x) * (L**2 - a**2 - (L - x) ** 2) / (6 * L * EI),
        )
        np.testing.assert_allclose(w, ref, rtol=1e-12, atol=1e-16)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            beam_nominal_deflection(3.0, 1.2)
        with pytest.raises(DomainError):
            beam_nominal_deflection(-1.0, 0.5)

    def test_gradient_matches_finite_differences(self):
        def fwd(E, xF):
            return beam_nominal_deflection(E, xF).numpy()

        args = (3.1, 0.43)
        J_fd = central_jacobian(fwd, args)
        J_ad = autograd_jacobian(lambda E, xF: beam_nominal_deflection(E, xF), args)
        mask = np.abs(J_fd) > 1e-8
        np.testing.assert_allclose(J_ad[mask], J_fd[mask], rtol=1e-4)
        np.testing.assert_allclose(J_ad[~mask], J_fd[~mask], atol=1e-10)


class TestBeamFull:
    def test_rotational_stiffness_values(self):
        assert math.log(beam_rotational_stiffness(0.0)) == pytest.approx(3.0)
        assert beam_rotational_stiffness(0.0) == pytest.approx(20.0855, abs=1e-4)
        assert math.log(beam_rotational_stiffness(5.0)) == pytest.approx(-1.9331, abs=1e-4)
        assert math.log(beam_rotational_stiffness(-60.0)) == pytest.approx(8.0)

    def test_pinned_rigid_limit_equals_nominal(self):
        for E, xF in [(4.0, 0.5), (2.6, 0.33), (4.4, 0.69)]:
            fe = beam_fe_deflection(E, xF, np.inf, 0.0)
            ref = beam_nominal_deflection(E, xF).numpy()
            np.testing.assert_allclose(fe, ref, rtol=1e-9, atol=1e-14)

    def test_soft_spring_adds_rigid_rotation(self):
        # with k_r = 0 the beam is statically determinate: R_B = F x_F / L
        E, xF, kv = 3.0, 0.42, 250.0
        fe = beam_fe_deflection(E, xF, kv, 0.0)
        R_B = BEAM.F * xF / BEAM.L
        ref = beam_nominal_deflection(E, xF).numpy() + BEAM.sensor_grid / BEAM.L * R_B / kv
        np.testing.assert_allclose(fe, ref, rtol=1e-9, atol=1e-14)
        assert fe[-1] == pytest.approx(R_B / kv, rel=1e-10)

    def test_linear_in_load(self):
        w1 = beam_full_response(3.0, 0.6, -2.0, 7.0)
        w2 = beam_full_response(3.0, 0.6, -2.0, 7.0, BeamCase(F=2.0))
        np.testing.assert_allclose(w2, 2 * w1, rtol=1e-12)

    def test_rotational_restraint_reduces_deflection(self):
        free = beam_fe_deflection(3.0, 0.5, np.inf, 0.0)
        held = beam_fe_deflection(3.0, 0.5, np.inf, beam_rotational_stiffness(-11.0))
        assert np.all(held[1:-1] < free[1:-1])

    def test_mesh_independent(self):
        a = beam_full_response(3.7, 0.47, 1.5, 6.5)
        b = beam_full_response(3.7, 0.47, 1.5, 6.5, n_elements=4 * BEAM.n_elements)
        assert np.max(np.abs(a - b)) <= 1e-6 * np.max(np.abs(b))

    def test_domain_error(self):
        with pytest.raises(DomainError):
            beam_full_response(3.0, 0.0, 0.0, 7.0)


# ------------------------------------------------------------- oscillator


class TestOscillator:
    def test_nominal_values(self):
        case = OscillatorCase(n_times=5, t_end=2 * math.pi)
        x = oscillator_nominal(1.0, case).numpy()
        assert x[0] == 1.0
        assert x[-1] == pytest.approx(1.0, abs=1e-12)
        assert x[1] == pytest.approx(0.0, abs=1e-12)  # t = pi/2

    def test_spring_stiffness(self):
        assert oscillator_spring_stiffness(20.0) == pytest.approx(1.0)
        assert oscillator_spring_stiffness(0.0) == pytest.approx(1.2)
        assert oscillator_spring_stiffness(40.0) == pytest.approx(0.8)
        with pytest.raises(DomainError):
            oscillator_spring_stiffness(200.0)

    def test_undamped_reference_equals_nominal(self):
        for m in (1.2, 1.5, 1.8):
            np.testing.assert_allclose(
                oscillator_full(m, 0.0, 20.0, 1.0).numpy(), oscillator_nominal(m).numpy(), rtol=0, atol=1e-15
            )

    def test_initial_condition(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            m, z, T, x0 = rng.uniform([1.2, 0, 0, 0.9], [1.8, 5, 40, 1.1])
            assert float(oscillator_full(m, z, T, x0)[0]) == pytest.approx(x0, abs=1e-14)

    @pytest.mark.parametrize("m,zeta,T,x0", [(1.5, 1.2, 10.0, 1.05), (1.3, 3.9, 35.0, 0.95), (1.7, 0.05, 2.0, 1.0)])
    def test_matches_rk4(self, m, zeta, T, x0):
        k = float(oscillator_spring_stiffness(T))
        ref = rk4_oscillator(m, zeta, k, x0, OSC.time_grid)
        got = oscillator_full(m, zeta, T, x0).numpy()
        assert np.max(np.abs(got - ref)) < 1e-6

    def test_continuous_at_critical_damping(self):
        m, T = 1.4, 12.0
        k = float(oscillator_spring_stiffness(T))
        zc = 2 * math.sqrt(m * k)
        a = oscillator_full(m, zc - 1e-8, T, 1.0).numpy()
        b = oscillator_full(m, zc + 1e-8, T, 1.0).numpy()
        c = oscillator_full(m, zc, T, 1.0).numpy()
        assert np.max(np.abs(a - b)) < 1e-6
        assert np.max(np.abs(a - c)) < 1e-6
        # critically damped closed form x0 (1 + w t) exp(-w t)
        w = math.sqrt(k / m)
        t = OSC.time_grid
        np.testing.assert_allclose(c, (1 + w * t) * np.exp(-w * t), atol=1e-9)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            oscillator_full(-1.0, 0.1, 20.0, 1.0)
        with pytest.raises(DomainError):
            oscillator_full(1.0, -0.1, 20.0, 1.0)

    def test_nominal_gradient_matches_finite_differences(self):
        J_fd = central_jacobian(lambda m: oscillator_nominal(m).numpy(), (1.37,))
        J_ad = autograd_jacobian(lambda m: oscillator_nominal(m), (1.37,))
        mask = np.abs(J_fd) > 1e-8
        np.testing.assert_allclose(J_ad[mask], J_fd[mask], rtol=1e-4)

    def test_full_gradient_through_regimes(self):
        for zeta in (0.5, 2 * math.sqrt(1.5 * 1.1) + 0.3):
            J_fd = central_jacobian(lambda m, z: oscillator_full(m, z, 10.0, 1.0).numpy(), (1.5, zeta))
            J_ad = autograd_jacobian(lambda m, z: oscillator_full(m, z, 10.0, 1.0), (1.5, zeta))
            mask = np.abs(J_fd) > 1e-6
            np.testing.assert_allclose(J_ad[mask], J_fd[mask], rtol=1e-4)


# ----------------------------------------------------------------- bridge


class TestBridge:
    def test_off_bridge_is_zero(self):
        s = bridge_fe_strain(10.0, 10.0, delta_v=0.1)
        t = BRIDGE.time_grid
        off = (BRIDGE.v_ref + 0.1) * t > BRIDGE.L_total
        assert off.any()
        assert np.all(s[off] == 0.0)
        n = bridge_nominal_strain(10.0, 10.0, 0.0, velocity=0.6).numpy()
        assert np.all(n[off] == 0.0)

    def test_full_equals_nominal_when_undamaged(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            kv1, kv2, ds = rng.uniform([9, 9, -2], [11, 11, 2])
            full = bridge_full_strain(kv1, kv2, 0, 0, 0, 0.0, ds, 0.0)
            nom = bridge_nominal_strain(kv1, kv2, ds).numpy()
            np.testing.assert_allclose(full, nom, rtol=1e-7, atol=1e-9 * np.abs(nom).max())

    def test_symmetry_of_symmetric_structure(self):
        fwd = bridge_nominal_strain(10.3, 9.6, 0.0).numpy()
        mirrored = bridge_nominal_strain(10.3, 9.6, 0.0, sensor=BRIDGE.L_total - BRIDGE.sensor_position).numpy()
        np.testing.assert_allclose(fwd[::-1], mirrored, rtol=1e-10, atol=1e-14)

    def test_linear_in_load(self):
        a = bridge_nominal_strain(10.0, 10.5, 1.0).numpy()
        b = bridge_nominal_strain(10.0, 10.5, 1.0, load=2 * BRIDGE.F_ref).numpy()
        np.testing.assert_allclose(b, 2 * a, rtol=1e-12)
        fa = bridge_fe_strain(10.0, 10.5, (0.3, 0.2, 0.1), delta_s=1.0)
        fb = bridge_fe_strain(10.0, 10.5, (0.3, 0.2, 0.1), delta_s=1.0, case=BridgeCase(F_ref=2 * BRIDGE.F_ref))
        np.testing.assert_allclose(fb, 2 * fa, rtol=1e-10)

    def test_pier_damage_raises_peak_strain(self):
        nominal = bridge_full_strain(10, 10, 0, 0, 0, 0, 0, 0)
        damaged = bridge_full_strain(10, 10, 0, 0.5, 0, 0, 0, 0)
        assert np.abs(damaged).max() > np.abs(nominal).max()
        fine = bridge_fe_strain(10, 10, (0, 0.5, 0), n_elements=4 * BRIDGE.n_elements)
        assert np.max(np.abs(fine - damaged)) <= 0.01 * np.abs(fine).max()

    def test_mesh_refinement(self):
        args = (9.4, 10.7, (0.8, 0.3, 0.6), 0.05, -1.3, 0.07)
        coarse = bridge_fe_strain(*args)
        fine = bridge_fe_strain(*args, n_elements=4 * BRIDGE.n_elements)
        assert np.max(np.abs(fine - coarse)) <= 1e-3 * np.abs(fine).max()

    def test_velocity_compresses_support(self):
        t = BRIDGE.time_grid
        for dv in (0.05, 0.1):
            s = bridge_fe_strain(10, 10, delta_v=dv)
            last = t[np.flatnonzero(s)[-1]]
            assert last <= BRIDGE.L_total / (BRIDGE.v_ref + dv) + 1e-12
            assert last > BRIDGE.L_total / (BRIDGE.v_ref + dv) - (t[1] - t[0])

    def test_damage_domain_error(self):
        with pytest.raises(DomainError):
            bridge_fe_strain(10, 10, (1.0, 0, 0))

    def test_gradient_matches_finite_differences(self):
        args = (10.2, 9.7, 0.8)
        J_fd = central_jacobian(lambda a, b, c: bridge_nominal_strain(a, b, c).numpy(), args)
        J_ad = autograd_jacobian(lambda a, b, c: bridge_nominal_strain(a, b, c), args)
        mask = np.abs(J_fd) > 1e-6 * np.abs(J_fd).max()
        np.testing.assert_allclose(J_ad[mask], J_fd[mask], rtol=1e-4)

    def test_case_validation(self):
        with pytest.raises(DomainError):
            BridgeCase(sensor_position=5.0)
