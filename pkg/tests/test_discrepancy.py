import math

import numpy as np
import pytest

from estentropy.discrepancy import (
    box_gains,
    discrepancy_rhs,
    discrepancy_rhs_linear,
    input_gap_integrals,
    lattice,
    lipschitz_gains,
    local_gain_u,
    local_gain_x,
)
from estentropy.dynamics import dubin, harrier, integrator, pendulum
from estentropy.quantization import Box
from estentropy.signals import Piece, Signal

from helpers import run_pairs

rng = np.random.default_rng(3)


def test_dubin_gains_are_sample_independent():
    for _ in range(3):
        xs = rng.uniform(-4, 4, (20, 3))
        us = rng.uniform(-1, 1, (3, 1))
        assert local_gain_x(dubin(), xs, us) == pytest.approx(5.5, abs=1e-12)
        assert local_gain_u(dubin(), xs, us) == pytest.approx(1.0, abs=1e-12)


def test_integrator_state_gain_is_one_half():
    assert local_gain_x(integrator(), [[0.0]], [[0.3]]) == 0.5


def test_harrier_input_gain():
    xs = lattice(Box([0, 0, -3, 0, 0, 0], [0, 0, 3, 0, 0, 0]), 7)
    g = local_gain_u(harrier(), xs, [[0.0, 0.0]])
    assert g == pytest.approx(math.sqrt(0.01 + 1e-4), abs=1e-12)


def test_harrier_state_gain_full_eigen_solve_vs_single_eigenvalue():
    # the damping entry -c/m' alone gives -1 + 1/2; the full symmetric part has
    # a larger top eigenvalue, driven by the gravity and coupling entries
    g = local_gain_x(harrier(), [np.zeros(6)], [[0.0, 0.0]])
    assert g > -0.5
    jac = np.zeros((6, 6))
    jac[0, 3] = jac[1, 4] = jac[2, 5] = 1.0
    jac[3, 2], jac[3, 3], jac[4, 4] = -9.81, -1.0, -1.0
    expected = np.linalg.eigvalsh(0.5 * (jac + jac.T))[-1] + 0.5
    assert g == pytest.approx(expected, abs=1e-10)


def test_pendulum_gains():
    xs = lattice(Box([-math.pi, -1.0], [math.pi, 1.0]), 9)
    assert local_gain_u(pendulum(), xs, [[0.0]]) == pytest.approx(1.0)
    # top eigenvalue |1 - 0.98 cos x1| / 2 peaks at x1 = pi
    assert local_gain_x(pendulum(), xs, [[0.0]]) == pytest.approx(0.99 + 0.5, abs=1e-12)


def test_lipschitz_gains():
    g = lipschitz_gains(10.0, 1.0, 3, 1)
    assert (g.gx, g.gu, g.kind) == (30.5, 1.0, "global-lipschitz")
    assert lipschitz_gains(0.0, 2.0, 4, 2).gx == 0.5
    assert lipschitz_gains(0.0, 1.0, 1, 4).gu == pytest.approx(8.0)


def test_lipschitz_gain_dominates_local_gain():
    for sys in (dubin(), pendulum(), integrator()):
        xs = rng.uniform(-3, 3, (50, sys.n))
        us = rng.uniform(-1, 1, (4, sys.m))
        assert local_gain_x(sys, xs, us) <= lipschitz_gains(sys.lip_x, sys.lip_u, sys.n, sys.m).gx + 1e-12


def test_gains_grow_with_samples():
    small = box_gains(pendulum(), Box([-0.5, -1], [0.5, 1]), Box([0.0], [0.0]))
    big = box_gains(pendulum(), Box([-3.0, -1], [3.0, 1]), Box([0.0], [0.0]))
    assert big.gx >= small.gx and big.gu >= small.gu


def test_rhs_formulas():
    assert discrepancy_rhs(0.0, 0.0, 3.0, 2.0, 0.5, 1.0) == 0.0
    assert discrepancy_rhs(1.0, 0.0, 0.0, 1.0, 0.7, 1.0) == 1.0
    assert discrepancy_rhs(0.5, 0.2, 1.0, 2.0, 0.1, 0.3) == pytest.approx(
        math.exp(0.2) * 0.25 + 4.0 * math.exp(0.6) * 0.2)
    assert discrepancy_rhs_linear(0.0, 0.0, 5.0, 1.0) == 0.0
    assert discrepancy_rhs_linear(0.1, 0.2, 2.0, 0.5) == pytest.approx(0.3 * math.e)


def test_linear_form_is_exact_for_constant_input_gap_on_integrator():
    from estentropy.dynamics import integrate

    c, T = 0.4, 1.0
    a = integrate(integrator(), [0.0], Signal.constant([c], T), T, 0.01)
    b = integrate(integrator(), [0.0], Signal.constant([0.0], T), T, 0.01)
    _, int_u = input_gap_integrals(Signal.constant([c], T), Signal.constant([0.0], T), a.times)
    rhs = np.array([discrepancy_rhs_linear(0.0, iu, 0.0, t) for iu, t in zip(int_u, a.times)])
    np.testing.assert_allclose(np.abs(a.states - b.states).ravel(), rhs, atol=1e-12)
    np.testing.assert_allclose(rhs, c * a.times, atol=1e-12)


def test_input_gap_integrals_on_ramp_and_step():
    u = Signal([Piece(0.0, [0.0], [1.0])], 1.0)
    v = Signal.piecewise_constant([0.0, 0.5], [[0.0], [1.0]], 1.0)
    times = np.array([0.0, 0.25, 0.5, 1.0])
    sq, ab = input_gap_integrals(u, v, times)
    # int_0^0.5 t^2 = 1/24, int_0.5^1 (t-1)^2 = 1/24
    assert sq[-1] == pytest.approx(1.0 / 12.0, abs=1e-14)
    assert ab[2] == pytest.approx(0.125, abs=1e-14)


@pytest.mark.parametrize("name", ["integrator", "dubin", "harrier", "pendulum", "scalar_a", "scalar_b"])
def test_discrepancy_inequalities_hold_on_random_pairs(name):
    q, lin, worst_q, worst_l = run_pairs(name, pairs=15, seed=11)
    assert q == 0
    assert lin in (0, None)
    assert worst_q <= 1.0 + 1e-9


def test_quadratic_form_fails_for_contracting_system():
    # with a negative state gain, e^{2 gx (t - s)} exceeds e^{2 gx t}, so the
    # input term evaluated at tau = t undershoots; the linear form still holds
    q, lin, worst_q, _ = run_pairs("contracting", pairs=30, seed=6)
    assert q > 0 and worst_q > 1.0
    assert lin == 0
