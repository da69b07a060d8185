"""Gains of the input-to-state discrepancy function and soundness checks.

The quadratic form bounds the squared distance between two trajectories by
``exp(2 Gx t) |dx0|^2 + Gu^2 exp(2 Gx tau) int_0^t |u - u'|^2``. Systems of
the shape ``f(x) + B u`` also satisfy the linear form
``(|dx0| + int_0^t |u - u'|) exp(Lx t)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import System, integrate, jacobian_u, jacobian_x, value_on_step
from .errors import NumericError, RejectedInputError
from .quantization import Box
from .signals import Signal


@dataclass(frozen=True)
class Gains:
    gx: float
    gu: float
    kind: str  # "local" or "global-lipschitz"
    provenance: str = ""


def lattice(box: Box, per_dim=5):
    """Points of a ``per_dim``-per-axis lattice spanning ``box``, corners included."""
    axes = [np.linspace(lo, hi, per_dim) if hi > lo else np.array([lo]) for lo, hi in zip(box.lo, box.hi)]
    return np.array(list(itertools.product(*axes)), dtype=float)


def _jacobian_stack(fun, sys, state_samples, input_samples):
    xs = np.atleast_2d(np.asarray(state_samples, dtype=float))
    us = np.atleast_2d(np.asarray(input_samples, dtype=float))
    if xs.size == 0 or us.size == 0:
        raise RejectedInputError("gain computation needs nonempty sample sets")
    return np.array([fun(sys, x, u) for x in xs for u in us])


def local_gain_x(sys: System, state_samples, input_samples):
    """Max over samples of the top eigenvalue of ``(Jx + Jx^T) / 2``, plus 1/2."""
    jac = _jacobian_stack(jacobian_x, sys, state_samples, input_samples)
    sym = 0.5 * (jac + np.swapaxes(jac, 1, 2))
    eig = np.linalg.eigvalsh(sym)
    if not np.all(np.isfinite(eig)):
        raise NumericError("non-finite eigenvalue in state gain")
    return float(np.max(eig[:, -1]) + 0.5)


def local_gain_u(sys: System, state_samples, input_samples):
    """Max over samples of the spectral norm of the input Jacobian."""
    jac = _jacobian_stack(jacobian_u, sys, state_samples, input_samples)
    sv = np.linalg.svd(jac, compute_uv=False)
    if not np.all(np.isfinite(sv)):
        raise NumericError("non-finite singular value in input gain")
    return float(np.max(sv[:, 0]))


def local_gains(sys: System, state_samples, input_samples):
    xs = np.atleast_2d(state_samples)
    us = np.atleast_2d(input_samples)
    return Gains(
        local_gain_x(sys, xs, us),
        local_gain_u(sys, xs, us),
        "local",
        f"{len(xs)} state samples x {len(us)} input samples",
    )


def box_gains(sys: System, state_box: Box, input_box: Box, per_dim=5, extra_states=None):
    """Local gains over a lattice on the boxes plus any extra state samples."""
    xs = lattice(state_box, per_dim)
    if extra_states is not None:
        xs = np.vstack([xs, np.atleast_2d(extra_states)])
    return local_gains(sys, xs, lattice(input_box, per_dim))


def lipschitz_gains(L_x, L_u, n, m):
    if L_x < 0 or L_u < 0:
        raise RejectedInputError("Lipschitz constants must be nonnegative")
    return Gains(n * L_x + 0.5, m * math.sqrt(m) * L_u, "global-lipschitz", f"L_x={L_x}, L_u={L_u}")


def discrepancy_rhs(dx0, int_u_sq, Mx, Mu, t, tau):
    return math.exp(2 * Mx * t) * dx0**2 + Mu**2 * math.exp(2 * Mx * tau) * int_u_sq


def discrepancy_rhs_linear(dx0, int_u, Lx, t):
    return (dx0 + int_u) * math.exp(Lx * t)


def input_gap_integrals(u: Signal, v: Signal, times):
    """Running integrals of ``|u - v|_2^2`` and ``|u - v|_inf`` over ``times``.

    ``times`` must contain every breakpoint of both signals so that each
    interval sees a single piece of each; Simpson's rule is then exact for
    constant and affine pieces in the squared integral.
    """
    times = np.asarray(times, dtype=float)
    sq = np.zeros(times.size)
    ab = np.zeros(times.size)
    for k in range(times.size - 1):
        a, b = times[k], times[k + 1]
        mid = 0.5 * (a + b)
        d = [value_on_step(u, a, s) - value_on_step(v, a, s) for s in (a, mid, b)]
        h = b - a
        sq[k + 1] = sq[k] + h / 6.0 * (d[0] @ d[0] + 4 * (d[1] @ d[1]) + d[2] @ d[2])
        na = [np.max(np.abs(x)) for x in d]
        ab[k + 1] = ab[k] + h / 6.0 * (na[0] + 4 * na[1] + na[2])
    return sq, ab


@dataclass(frozen=True)
class PairCheck:
    quadratic_violations: int
    linear_violations: int
    worst_quadratic_ratio: float
    worst_linear_ratio: float
    states: np.ndarray  # both trajectories, stacked, for gain coverage checks


def check_pair(sys: System, x0, x0p, u: Signal, up: Signal, T, gains: Gains, dt=1e-3,
               Lx=None, rtol=1e-9):
    """Simulate two trajectories and test both discrepancy inequalities on the grid.

    The left side uses the infinity norm while the right side uses 2-norms
    of the initial and input gaps; the quadratic bound holds in the 2-norm,
    which dominates the infinity norm. The linear form is tested only when
    ``Lx`` is given, using infinity norms on both sides.
    """
    bps = sorted(set(u.breakpoints) | set(up.breakpoints))
    tr1 = integrate(sys, x0, u, T, dt, extra_times=bps)
    tr2 = integrate(sys, x0p, up, T, dt, extra_times=bps)
    if not np.array_equal(tr1.times, tr2.times):
        raise RuntimeError("trajectories landed on different grids")
    times = tr1.times
    gap = np.max(np.abs(tr1.states - tr2.states), axis=1)
    sq, ab = input_gap_integrals(u, up, times)
    d0 = np.asarray(x0, float) - np.asarray(x0p, float)
    rhs_q = np.exp(2 * gains.gx * times) * (d0 @ d0) + gains.gu**2 * np.exp(2 * gains.gx * times) * sq
    lhs_q = gap**2
    viol_q = lhs_q > rhs_q * (1 + rtol) + 1e-300
    ratio_q = float(np.max(np.where(rhs_q > 0, lhs_q / np.where(rhs_q > 0, rhs_q, 1), 0.0)))
    viol_l = np.zeros_like(viol_q)
    ratio_l = 0.0
    if Lx is not None:
        rhs_l = (np.max(np.abs(d0)) + ab) * np.exp(Lx * times)
        viol_l = gap > rhs_l * (1 + rtol) + 1e-300
        ratio_l = float(np.max(np.where(rhs_l > 0, gap / np.where(rhs_l > 0, rhs_l, 1), 0.0)))
    return PairCheck(int(viol_q.sum()), int(viol_l.sum()), ratio_q, ratio_l,
                     np.vstack([tr1.states, tr2.states]))
