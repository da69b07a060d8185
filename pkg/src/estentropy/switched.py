"""Switched systems with a minimum dwell time.

Modes are state-only fields ``f_p(x)`` that broadcast over leading axes, so
many trajectories of one mode can be advanced together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .discrepancy import Gains
from .dynamics import System, Trajectory, time_grid
from .errors import DivergenceError, RejectedInputError
from .quantization import Box
from .signals import Signal, TimeSequence, VariationBudget

LN2 = math.log(2.0)


@dataclass(frozen=True)
class SwitchedSystem:
    modes: Sequence[Callable]
    lips: Sequence[float]
    n: int
    Td: float
    name: str = "switched"

    def __post_init__(self):
        if len(self.modes) < 1 or len(self.modes) != len(self.lips):
            raise RejectedInputError("need at least one mode and one Lipschitz constant per mode")
        if not self.Td > 0:
            raise RejectedInputError("dwell time must be positive")
        if self.n < 1 or any(L < 0 for L in self.lips):
            raise RejectedInputError("need n >= 1 and nonnegative Lipschitz constants")

    @property
    def N(self):
        return len(self.modes)

    @property
    def lip_x(self):
        return max(self.lips)

    def field(self, x, p):
        return np.asarray(self.modes[p](x), dtype=float) + np.zeros_like(x)


def constant_modes(a, b, Td=1.0):
    """Scalar modes ``x' = a`` and ``x' = b``."""
    return SwitchedSystem([lambda x: a + 0.0 * x, lambda x: b + 0.0 * x], [0.0, 0.0], 1, Td,
                          "constant_modes")


def scalar_modes(a, b, Td=1.0):
    """Scalar linear modes ``x' = a x`` and ``x' = b x``."""
    return SwitchedSystem([lambda x: a * x, lambda x: b * x], [abs(a), abs(b)], 1, Td, "scalar_modes")


def _rk4_mode(sw, p, x, h):
    f = lambda y: sw.field(y, p)  # noqa: E731
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass(frozen=True)
class SwitchingPlan:
    """Mode ``modes[k]`` (0-based) is active from ``starts[k]`` on."""

    starts: np.ndarray
    modes: tuple


def plan_from(tseq: TimeSequence, mode_string):
    modes = tuple(_mode_ids(mode_string))
    if len(modes) != len(tseq.gaps):
        raise RejectedInputError(f"{len(modes)} modes for {len(tseq.gaps)} intervals")
    return SwitchingPlan(tseq.instants[:-1].copy(), modes)


def _mode_ids(mode_string):
    """Mode labels as 0-based ints; accepts 1-based ints or letters 'a', 'b', ..."""
    out = []
    for c in mode_string:
        if isinstance(c, str):
            if len(c) != 1 or not c.isalpha():
                raise RejectedInputError(f"bad mode label {c!r}")
            out.append(ord(c.lower()) - ord("a"))
        else:
            if int(c) < 1:
                raise RejectedInputError(f"mode numbers start at 1, got {c}")
            out.append(int(c) - 1)
    return out


def _merge(plan: SwitchingPlan):
    starts, modes = [], []
    for s, p in zip(plan.starts, plan.modes):
        if modes and modes[-1] == p:
            continue
        starts.append(float(s))
        modes.append(p)
    return np.array(starts), modes


def dwell_ok(plan: SwitchingPlan, Td, tol=1e-12):
    """True when consecutive actual switches, counted from time 0, are ``Td`` apart."""
    starts, _ = _merge(plan)
    return bool(np.all(np.diff(starts) >= Td * (1 - tol)))


def switching_signal(tseq: TimeSequence, mode_string, N, Td=None, enforce_dwell=False):
    """One-hot input signal following ``mode_string`` on the intervals of ``tseq``."""
    plan = plan_from(tseq, mode_string)
    if any(p < 0 or p >= N for p in plan.modes):
        raise RejectedInputError(f"mode outside 1..{N}")
    if enforce_dwell:
        if Td is None:
            raise RejectedInputError("dwell enforcement needs Td")
        if not dwell_ok(plan, Td):
            raise RejectedInputError(f"switching signal violates dwell time {Td}")
    starts, modes = _merge(plan)
    eye = np.eye(N)
    return Signal.piecewise_constant(starts, [eye[p] for p in modes], tseq.horizon)


def simulate_switched(sw: SwitchedSystem, x0, plan: SwitchingPlan, T, dt):
    """RK4 on the active mode's field, on a grid that includes every switch."""
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    times = time_grid(T, dt, plan.starts[1:])
    states = np.empty((times.size, sw.n))
    states[0] = x
    for k in range(times.size - 1):
        idx = max(int(np.searchsorted(plan.starts, times[k], side="right")) - 1, 0)
        x = _rk4_mode(sw, plan.modes[idx], x, times[k + 1] - times[k])
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"switched state became non-finite after t={times[k]}", float(times[k]))
        states[k + 1] = x
    return Trajectory(times, states, float(dt))


def random_plan(sw: SwitchedSystem, horizon, rng):
    """Random dwell-respecting plan: gaps of ``Td (1 + Exp(1))``, modes changing at each switch."""
    starts, modes = [0.0], [int(rng.integers(sw.N))]
    t = 0.0
    while True:
        t += sw.Td * (1.0 + rng.exponential(1.0))
        if t >= horizon:
            break
        if sw.N > 1:
            nxt = int(rng.integers(sw.N - 1))
            modes.append(nxt if nxt < modes[-1] else nxt + 1)
        else:
            modes.append(0)
        starts.append(t)
    return SwitchingPlan(np.array(starts), tuple(modes))


def reach_samples(sw: SwitchedSystem, K: Box, horizon=None, n_signals=100, seed=0, dt=None, stride=5):
    """States visited by random dwell-respecting trajectories starting in ``K``.

    Each trajectory draws from its own seeded stream, so a longer horizon
    extends the same trajectories and yields a superset of samples.
    """
    horizon = 5.0 * sw.Td if horizon is None else float(horizon)
    dt = sw.Td / 100.0 if dt is None else dt
    out = []
    for k in range(n_signals):
        rng = np.random.default_rng([int(seed), k])
        x0 = K.sample(rng, 1)[0]
        plan = random_plan(sw, horizon, rng)
        tr = simulate_switched(sw, x0, plan, horizon, dt)
        out.append(tr.states[::stride])
        out.append(tr.states[-1:])
    return np.vstack(out)


def divergence_profile(sw: SwitchedSystem, samples, t_max, dt):
    """Times and running estimate of the mode divergence on ``[0, t_max]``.

    For every sample and every pair of modes, integrates (trapezoid) the
    infinity-norm gap between the two mode fields along the two mode
    trajectories from that sample, then takes the maximum.
    """
    xs = np.atleast_2d(np.asarray(samples, dtype=float))
    if xs.size == 0:
        raise RejectedInputError("divergence needs at least one sample")
    times = time_grid(t_max, dt)
    if sw.N == 1:
        return times, np.zeros(times.size)
    trajs = []
    for p in range(sw.N):
        x = xs.copy()
        vals = [sw.field(x, p)]
        for k in range(times.size - 1):
            x = _rk4_mode(sw, p, x, times[k + 1] - times[k])
            if not np.all(np.isfinite(x)):
                bad = int(np.argwhere(~np.all(np.isfinite(x), axis=1))[0, 0])
                raise DivergenceError(f"mode {p + 1} diverged from sample {xs[bad]} after t={times[k]}",
                                      float(times[k]))
            vals.append(sw.field(x, p))
        trajs.append(np.stack(vals, axis=1))  # (S, len(times), n)
    h = np.diff(times)
    best = np.zeros(times.size)
    for p1 in range(sw.N):
        for p2 in range(p1 + 1, sw.N):
            gap = np.max(np.abs(trajs[p1] - trajs[p2]), axis=2)
            cum = np.concatenate([np.zeros((gap.shape[0], 1)),
                                  np.cumsum(0.5 * h * (gap[:, 1:] + gap[:, :-1]), axis=1)], axis=1)
            best = np.maximum(best, cum.max(axis=0))
    return times, np.maximum.accumulate(best)


def mode_divergence(sw: SwitchedSystem, t, reach, dt):
    if not t > 0:
        raise RejectedInputError("divergence time must be positive")
    times, d = divergence_profile(sw, reach, t, dt)
    return float(d[-1])


@dataclass(frozen=True)
class SwitchedBound:
    Te: float
    d_Te: float
    threshold: float
    bound: float
    diagnosis: str


def switched_bound(sw: SwitchedSystem, eps, alpha, tau, reach, dt=None, iterations=50):
    """Entropy bound ``(L_x + alpha) n / ln 2 + log2(N) / Te``.

    ``Te`` is the largest time in ``(0, min(tau, Td)]`` with
    ``d(Te) <= eps (1 - exp(-alpha (Td - Te)))``, found by bisection on the
    divergence profile. Returns an infinite bound if no positive ``Te`` exists.
    """
    if not (eps > 0 and tau > 0) or alpha < 0:
        raise RejectedInputError("need eps, tau > 0 and alpha >= 0")
    hi = min(tau, sw.Td)
    dt = hi / 4000.0 if dt is None else dt
    times, prof = divergence_profile(sw, reach, hi, dt)

    def d(t):
        return float(np.interp(t, times, prof))

    def rhs(t):
        return eps * (-math.expm1(-alpha * (sw.Td - t)))

    base = (sw.lip_x + alpha) * sw.n / LN2
    if d(hi) <= rhs(hi):
        te = hi
    else:
        lo = 0.0
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if d(mid) <= rhs(mid):
                lo = mid
            else:
                hi = mid
        te = lo
    if te <= 0.0:
        why = "alpha = 0 leaves no room for mode divergence" if alpha == 0 else \
            "mode divergence exceeds the allowance at every positive time"
        return SwitchedBound(0.0, 0.0, rhs(0.0), math.inf, why)
    bound = base + math.log2(sw.N) / te
    return SwitchedBound(te, d(te), rhs(te), bound, "ok")


def embed_as_open(sw: SwitchedSystem, reach=None):
    """Open system with one-hot inputs that reproduces every switched trajectory.

    Returns ``(system, budget, gains)``. The state gain is
    ``n * sum(L_p) + N / 2``. The input gain is the larger of
    ``sqrt(N) * max_p |f_p(x)|_inf`` and the sampled spectral norm of the
    input Jacobian ``[f_1(x) ... f_N(x)]``; the first alone can undershoot
    the spectral norm when ``n > 1``.
    """
    N, n = sw.N, sw.n
    modes = list(sw.modes)

    def f(x, u):
        x = np.asarray(x, dtype=float)
        acc = np.zeros(np.broadcast_shapes(x.shape, x.shape))
        for p in range(N):
            acc = acc + u[..., p : p + 1] * (np.asarray(modes[p](x), dtype=float) + np.zeros_like(x))
        return acc

    if reach is None:
        reach = np.zeros((1, n))
    xs = np.atleast_2d(np.asarray(reach, dtype=float))
    cols = np.stack([sw.field(xs, p) for p in range(N)], axis=-1)  # (S, n, N)
    sup_gu = math.sqrt(N) * float(np.max(np.abs(cols)))
    spectral = float(np.max(np.linalg.svd(cols, compute_uv=False)[:, 0]))
    gu = max(sup_gu, spectral)
    gx = n * float(sum(sw.lips)) + N / 2.0

    def ju(x, u):
        return np.stack([sw.field(np.asarray(x, float), p) for p in range(N)], axis=-1)

    system = System(n, N, f, None, ju, lip_x=float(sum(sw.lips)),
                    lip_u=N * float(np.max(np.abs(cols))), name=f"embedded_{sw.name}", vectorized=True)
    budget = VariationBudget(0.0, 1.0, Box(np.zeros(N), np.ones(N)))
    gains = Gains(gx, gu, "local", f"{len(xs)} reach samples; sqrt(N)*max|f_p|={sup_gu:.9g}, "
                                   f"spectral={spectral:.9g}")
    return system, budget, gains
