"""Continuous-time systems ``x' = f(x, u)`` and fixed-step RK4 integration.

Built-in fields are written with ``[..., i]`` indexing so they also accept a
batch of states of shape ``(B, n)`` with inputs of shape ``(B, m)``; that lets
:func:`integrate_many` advance whole trajectory families at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, NumericError, RejectedInputError
from .signals import Signal

DEFAULT_DT = 1e-3


@dataclass(frozen=True)
class System:
    n: int
    m: int
    field: Callable
    jac_x: Optional[Callable] = None
    jac_u: Optional[Callable] = None
    lip_x: float = 0.0
    lip_u: float = 0.0
    name: str = "custom"
    # True when the field has the shape f(x) + B u with a constant B whose
    # induced infinity norm is at most 1.
    affine_input: bool = False
    # True when ``field`` broadcasts over a leading batch axis.
    vectorized: bool = False
    params: dict = dc_field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise RejectedInputError(f"system needs n, m >= 1, got n={self.n}, m={self.m}")
        if self.lip_x < 0 or self.lip_u < 0:
            raise RejectedInputError("Lipschitz constants must be nonnegative")


def _vec(v, size, what):
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.shape != (size,):
        raise RejectedInputError(f"{what} has shape {arr.shape}, expected ({size},)")
    return arr


def evaluate_field(sys: System, x, u):
    x = _vec(x, sys.n, "state")
    u = _vec(u, sys.m, "input")
    return np.asarray(sys.field(x, u), dtype=float).reshape(sys.n)


def _fd_step(v):
    return 1e-6 * np.maximum(1.0, np.abs(v))


def _finite_difference(fun, v, size_out):
    h = _fd_step(v)
    out = np.empty((size_out, v.size))
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h[i]
        col = (np.asarray(fun(v + e), dtype=float) - np.asarray(fun(v - e), dtype=float)) / (2 * h[i])
        if not np.all(np.isfinite(col)):
            raise NumericError(f"non-finite field value while differencing coordinate {i}")
        out[:, i] = col.reshape(size_out)
    return out


def jacobian_x(sys: System, x, u):
    x = _vec(x, sys.n, "state")
    u = _vec(u, sys.m, "input")
    if sys.jac_x is not None:
        jac = np.asarray(sys.jac_x(x, u), dtype=float).reshape(sys.n, sys.n)
    else:
        jac = _finite_difference(lambda xx: sys.field(xx, u), x, sys.n)
    if not np.all(np.isfinite(jac)):
        bad = np.argwhere(~np.isfinite(jac))[0]
        raise NumericError(f"non-finite state Jacobian entry at {tuple(bad)}")
    return jac


def jacobian_u(sys: System, x, u):
    x = _vec(x, sys.n, "state")
    u = _vec(u, sys.m, "input")
    if sys.jac_u is not None:
        jac = np.asarray(sys.jac_u(x, u), dtype=float).reshape(sys.n, sys.m)
    else:
        jac = _finite_difference(lambda uu: sys.field(x, uu), u, sys.n)
    if not np.all(np.isfinite(jac)):
        bad = np.argwhere(~np.isfinite(jac))[0]
        raise NumericError(f"non-finite input Jacobian entry at {tuple(bad)}")
    return jac


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    step: float

    def at(self, t):
        """Linear interpolation of the state at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        cols = [np.interp(t, self.times, self.states[:, i]) for i in range(self.states.shape[1])]
        return np.stack(cols, axis=-1)

    @property
    def final(self):
        return self.states[-1]


def time_grid(T, dt, breakpoints=()):
    """Uniform grid ``k dt`` on ``[0, T]`` with ``T`` and breakpoints inserted.

    Grid points closer than ``1e-9 dt`` to a breakpoint are replaced by it.
    """
    if not (T > 0 and dt > 0):
        raise RejectedInputError(f"need T > 0 and dt > 0, got T={T}, dt={dt}")
    k = int(math.floor(T / dt * (1 + 1e-12)))
    base = np.arange(k + 1) * dt
    if not len(breakpoints) and abs(base[-1] - T) <= 1e-9 * dt:
        base[-1] = T
        return base
    fixed = np.array(sorted({float(b) for b in breakpoints if 0 < b < T} | {float(T)}))
    tol = 1e-9 * dt
    near = np.min(np.abs(base[:, None] - fixed[None, :]), axis=1) <= tol
    near[0] = False
    return np.union1d(base[~near & (base < T)], fixed)


def _piece_index(signal: Signal, t):
    return max(int(np.searchsorted(signal.starts, t, side="right")) - 1, 0)


def value_on_step(signal: Signal, t_left, s):
    """Input value at ``s`` using the piece active at the step start ``t_left``."""
    return signal.pieces[_piece_index(signal, t_left)].at(s)


def _raise_if_diverged(times, states):
    finite = np.all(np.isfinite(states.reshape(states.shape[0], -1)), axis=1)
    if not finite.all():
        k = int(np.argmin(finite))
        raise DivergenceError(f"state became non-finite after t={times[k - 1]}", last_time=float(times[k - 1]))


def _rk4(f, t0, h, x, uf):
    k1 = f(x, uf(t0))
    k2 = f(x + 0.5 * h * k1, uf(t0 + 0.5 * h))
    k3 = f(x + 0.5 * h * k2, uf(t0 + 0.5 * h))
    k4 = f(x + h * k3, uf(t0 + h))
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(sys: System, x0, u: Signal, T, dt=DEFAULT_DT, extra_times=()):
    """Classic RK4 on a uniform grid refined at the input's breakpoints.

    On each step the input piece active at the step's left end is used, so
    the right limit of the input applies at a discontinuity. ``extra_times``
    adds more grid points, which lets two trajectories share one grid.
    """
    x = _vec(x0, sys.n, "initial state")
    if u.m != sys.m:
        raise RejectedInputError(f"signal has {u.m} inputs, system has {sys.m}")
    times = time_grid(T, dt, list(u.breakpoints) + list(extra_times))
    states = np.empty((times.size, sys.n))
    states[0] = x
    f = sys.field
    which = np.maximum(np.searchsorted(u.starts, times[:-1], side="right") - 1, 0)
    steps = np.diff(times)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(times.size - 1):
            piece = u.pieces[which[k]]
            if piece.slope is None:
                val = piece.value
                uf = lambda s, v=val: v  # noqa: E731
            else:
                uf = piece.at
            x = _rk4(f, times[k], steps[k], x, uf)
            states[k + 1] = x
    _raise_if_diverged(times, states)
    return Trajectory(times, states, float(dt))


def integrate_constant(sys: System, x0, u_value, T, dt):
    """Integrate with a constant input, without building a Signal."""
    return integrate(sys, x0, Signal.constant(np.atleast_1d(u_value), T), T, dt)


def integrate_many(sys: System, x0s, signals, T, dt=DEFAULT_DT):
    """Integrate several initial states and inputs on one shared grid.

    All signals must be piecewise constant. Returns ``(times, states)`` with
    states of shape ``(B, len(times), n)``.
    """
    x = np.asarray(x0s, dtype=float).reshape(-1, sys.n).copy()
    if len(signals) != x.shape[0]:
        raise RejectedInputError("need one signal per initial state")
    if not all(s.is_piecewise_constant for s in signals):
        raise RejectedInputError("integrate_many handles piecewise-constant inputs only")
    bps = sorted({float(b) for s in signals for b in s.breakpoints})
    times = time_grid(T, dt, bps)
    out = np.empty((x.shape[0], times.size, sys.n))
    out[:, 0] = x
    if sys.vectorized:
        f = sys.field
    else:
        def f(xs, us):
            return np.stack([np.asarray(sys.field(a, b), dtype=float) for a, b in zip(xs, us)])
    which = np.stack([np.maximum(np.searchsorted(s.starts, times[:-1], side="right") - 1, 0)
                      for s in signals], axis=1)
    values = [np.stack([p.value for p in s.pieces]) for s in signals]
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(times.size - 1):
            us = np.stack([v[w] for v, w in zip(values, which[k])])
            x = _rk4(f, times[k], times[k + 1] - times[k], x, lambda s, us=us: us)
            out[:, k + 1] = x
    _raise_if_diverged(times, np.swapaxes(out, 0, 1))
    return times, out


# ---------------------------------------------------------------------------
# Built-in systems


def integrator(n=1):
    """``x' = u`` in ``n`` dimensions."""
    n = int(n)
    eye = np.eye(n)
    return System(
        n=n,
        m=n,
        field=lambda x, u: np.array(u, dtype=float, copy=True),
        jac_x=lambda x, u: np.zeros((n, n)),
        jac_u=lambda x, u: eye,
        lip_x=0.0,
        lip_u=1.0,
        name="integrator",
        affine_input=True,
        vectorized=True,
        params={"n": n},
    )


def dubin(v=10.0):
    """Planar vehicle at constant speed ``v`` steered by its turn rate."""
    v = float(v)

    def f(x, u):
        return np.stack([v * np.cos(x[..., 2]), v * np.sin(x[..., 2]), u[..., 0]], axis=-1)

    def jx(x, u):
        s, c = math.sin(x[2]), math.cos(x[2])
        return np.array([[0.0, 0.0, -v * s], [0.0, 0.0, v * c], [0.0, 0.0, 0.0]])

    return System(3, 1, f, jx, lambda x, u: np.array([[0.0], [0.0], [1.0]]),
                  lip_x=v, lip_u=1.0, name="dubin", vectorized=True, params={"v": v})


def harrier(m_prime=100.0, g=9.81, r=5.0, c=100.0, J=50.0, u_max=100.0):
    """Planar vertical take-off aircraft with two thrust inputs.

    ``lip_x`` is the largest absolute row sum of the state Jacobian for
    thrusts bounded by ``u_max``; ``lip_u`` the same for the input Jacobian.
    """
    mp, g, r, c, J = float(m_prime), float(g), float(r), float(c), float(J)

    def f(x, u):
        s, co = np.sin(x[..., 2]), np.cos(x[..., 2])
        u1, u2 = u[..., 0], u[..., 1]
        return np.stack(
            [
                x[..., 3],
                x[..., 4],
                x[..., 5],
                -g * s - c * x[..., 3] / mp + (u1 * co - u2 * s) / mp,
                g * (co - 1.0) - c * x[..., 4] / mp + (u1 * s + u2 * co) / mp,
                (r / J) * u1,
            ],
            axis=-1,
        )

    def jx(x, u):
        s, co = math.sin(x[2]), math.cos(x[2])
        u1, u2 = u[0], u[1]
        out = np.zeros((6, 6))
        out[0, 3] = out[1, 4] = out[2, 5] = 1.0
        out[3, 2] = -g * co - (u1 * s + u2 * co) / mp
        out[3, 3] = -c / mp
        out[4, 2] = -g * s + (u1 * co - u2 * s) / mp
        out[4, 4] = -c / mp
        return out

    def ju(x, u):
        s, co = math.sin(x[2]), math.cos(x[2])
        out = np.zeros((6, 2))
        out[3] = [co / mp, -s / mp]
        out[4] = [s / mp, co / mp]
        out[5] = [r / J, 0.0]
        return out

    lip_x = max(1.0, g + 2.0 * float(u_max) / mp + c / mp)
    lip_u = max(2.0 / mp, r / J)
    return System(6, 2, f, jx, ju, lip_x=lip_x, lip_u=lip_u, name="harrier", vectorized=True,
                  params={"m_prime": mp, "g": g, "r": r, "c": c, "J": J, "u_max": float(u_max)})


def pendulum(k=0.98, I=1.0):
    """Torque-driven pendulum ``x1' = x2, x2' = -k sin x1 + u / I``."""
    k, I = float(k), float(I)

    def f(x, u):
        return np.stack([x[..., 1], -k * np.sin(x[..., 0]) + u[..., 0] / I], axis=-1)

    def jx(x, u):
        return np.array([[0.0, 1.0], [-k * math.cos(x[0]), 0.0]])

    return System(2, 1, f, jx, lambda x, u: np.array([[0.0], [1.0 / I]]),
                  lip_x=max(1.0, k), lip_u=1.0 / I, name="pendulum",
                  affine_input=I >= 1.0, vectorized=True, params={"k": k, "I": I})


def scalar_linear(a=1.0, input_gain=0.0):
    """``x' = a x + input_gain * u`` with one state and one input."""
    a, gain = float(a), float(input_gain)
    return System(
        1, 1,
        lambda x, u: a * x + gain * u,
        lambda x, u: np.array([[a]]),
        lambda x, u: np.array([[gain]]),
        lip_x=abs(a), lip_u=abs(gain), name="scalar_linear",
        affine_input=abs(gain) <= 1.0, vectorized=True, params={"a": a, "input_gain": gain},
    )


_REGISTRY = {
    "integrator": integrator,
    "simple": integrator,
    "dubin": dubin,
    "harrier": harrier,
    "pendulum": pendulum,
    "scalar_linear": scalar_linear,
}


def register_system(name, factory):
    """Make ``factory(**params) -> System`` available to :func:`get_system`."""
    if name in _REGISTRY:
        raise RejectedInputError(f"system {name!r} is already registered")
    _REGISTRY[name] = factory


def get_system(name, **params):
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise RejectedInputError(f"unknown system {name!r}; known: {sorted(_REGISTRY)}") from None
    return factory(**params)


def system_names():
    return sorted(_REGISTRY)
