"""Slowly-varying input signals and the switching time sequences.

A :class:`Signal` is a right-continuous piecewise function built from
constant and affine pieces. :func:`check_variation` tests membership in the
class of signals whose change over any window of length ``tau`` is at most
``mu * tau + eta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import RejectedInputError
from .quantization import Box, floor_tol


@dataclass(frozen=True)
class VariationBudget:
    mu: float
    eta: float
    u0_box: Box

    def __post_init__(self):
        if self.mu < 0 or self.eta < 0:
            raise RejectedInputError(f"variation budget needs mu, eta >= 0, got {self.mu}, {self.eta}")

    @property
    def m(self):
        return self.u0_box.dim


@dataclass(frozen=True)
class Piece:
    start: float
    value: np.ndarray
    slope: Optional[np.ndarray] = None

    def at(self, t):
        if self.slope is None:
            return self.value
        return self.value + self.slope * (t - self.start)


class Signal:
    """Piecewise constant or affine signal on ``[0, horizon]``.

    Evaluation is right-continuous: at a breakpoint the new piece is used.
    Past the horizon the last piece keeps going.
    """

    def __init__(self, pieces: Sequence[Piece], horizon: float):
        if not pieces:
            raise RejectedInputError("a signal needs at least one piece")
        starts = np.array([p.start for p in pieces], dtype=float)
        if starts[0] != 0.0 or np.any(np.diff(starts) <= 0):
            raise RejectedInputError(f"piece starts must increase strictly from 0, got {starts}")
        if not horizon > 0 or starts[-1] > horizon:
            raise RejectedInputError(f"horizon {horizon} does not cover piece starts")
        dims = {np.atleast_1d(p.value).size for p in pieces}
        if len(dims) != 1:
            raise RejectedInputError("pieces disagree on input dimension")
        self.pieces = tuple(
            Piece(
                float(p.start),
                np.atleast_1d(np.asarray(p.value, dtype=float)),
                None if p.slope is None else np.atleast_1d(np.asarray(p.slope, dtype=float)),
            )
            for p in pieces
        )
        self.starts = starts
        self.horizon = float(horizon)
        self.m = dims.pop()

    @classmethod
    def constant(cls, value, horizon):
        return cls([Piece(0.0, value)], horizon)

    @classmethod
    def piecewise_constant(cls, starts, values, horizon):
        return cls([Piece(s, v) for s, v in zip(starts, values)], horizon)

    @property
    def breakpoints(self):
        """Times where a new piece begins, excluding 0."""
        return self.starts[1:]

    @property
    def is_piecewise_constant(self):
        return all(p.slope is None for p in self.pieces)

    def __call__(self, t):
        i = int(np.searchsorted(self.starts, t, side="right")) - 1
        return self.pieces[max(i, 0)].at(t)

    def left_limit(self, t):
        i = int(np.searchsorted(self.starts, t, side="left")) - 1
        return self.pieces[max(i, 0)].at(t)

    def sample(self, ts):
        """Right-continuous values at each time in ``ts``, shape (len, m)."""
        return np.array([self(t) for t in np.asarray(ts, dtype=float)]).reshape(-1, self.m)

    def window(self, t0, length):
        """The signal on ``[t0, t0 + length]`` re-based to start at time 0."""
        i0 = max(int(np.searchsorted(self.starts, t0, side="right")) - 1, 0)
        first = self.pieces[i0]
        pieces = [Piece(0.0, first.at(t0), first.slope)]
        for p in self.pieces[i0 + 1:]:
            if p.start >= t0 + length:
                break
            pieces.append(Piece(p.start - t0, p.value, p.slope))
        return Signal(pieces, length)

    def __eq__(self, other):
        if not isinstance(other, Signal) or self.horizon != other.horizon:
            return False
        if len(self.pieces) != len(other.pieces):
            return False
        for p, q in zip(self.pieces, other.pieces):
            if p.start != q.start or not np.array_equal(p.value, q.value):
                return False
            if (p.slope is None) != (q.slope is None):
                return False
            if p.slope is not None and not np.array_equal(p.slope, q.slope):
                return False
        return True

    def __repr__(self):
        return f"Signal({len(self.pieces)} pieces, horizon={self.horizon})"

    def to_text(self):
        lines = [f"horizon {self.horizon!r}"]
        for p in self.pieces:
            vals = ",".join(repr(float(v)) for v in p.value)
            if p.slope is None:
                lines.append(f"{p.start!r} const {vals}")
            else:
                slopes = ",".join(repr(float(v)) for v in p.slope)
                lines.append(f"{p.start!r} ramp {vals} {slopes}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, horizon=None):
        pieces = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "horizon" and len(parts) == 2:
                    horizon = float(parts[1])
                elif parts[1] == "const" and len(parts) == 3:
                    pieces.append(Piece(float(parts[0]), _floats(parts[2])))
                elif parts[1] == "ramp" and len(parts) == 4:
                    pieces.append(Piece(float(parts[0]), _floats(parts[2]), _floats(parts[3])))
                else:
                    raise ValueError(line)
            except (ValueError, IndexError) as exc:
                raise RejectedInputError(f"bad signal line {lineno}: {raw!r}") from exc
        if horizon is None:
            raise RejectedInputError("signal text has no horizon line")
        return cls(pieces, horizon)


def _floats(csv):
    return np.array([float(v) for v in csv.split(",")])


def check_variation(u: Signal, b: VariationBudget, n_samples=401, tol=1e-9):
    """Sampled test of the slow-variation condition.

    Returns ``(ok, pair)``. ``pair`` is ``None`` when ok, otherwise the first
    violating ``(t, t + tau)`` found, or ``(0.0, 0.0)`` if ``u(0)`` lies
    outside the initial box.
    """
    if n_samples < 2:
        raise RejectedInputError("check_variation needs at least 2 samples")
    if u.m != b.m:
        raise RejectedInputError(f"signal has {u.m} inputs, budget has {b.m}")
    if not b.u0_box.contains(u(0.0), tol):
        return False, (0.0, 0.0)
    grid = np.linspace(0.0, u.horizon, n_samples)
    times = np.concatenate([grid, u.breakpoints, u.breakpoints])
    values = np.concatenate(
        [u.sample(grid), u.sample(u.breakpoints), np.array([u.left_limit(t) for t in u.breakpoints]).reshape(-1, u.m)]
    )
    order = np.argsort(times, kind="stable")
    times, values = times[order], values[order]
    diff = np.max(np.abs(values[None, :, :] - values[:, None, :]), axis=-1)
    allowed = b.mu * (times[None, :] - times[:, None]) + b.eta + tol
    bad = np.triu(diff > allowed)
    if not bad.any():
        return True, None
    i, j = np.argwhere(bad)[0]
    return False, (float(times[i]), float(times[j]))


def random_piecewise_constant(rng, budget: VariationBudget, T, n_pieces):
    """Random piecewise-constant signal inside the variation budget.

    ``u(0)`` is uniform in the initial box; every value is drawn from one
    axis-aligned window of width ``eta`` that contains ``u(0)``, so any two
    values differ by at most ``eta``.
    """
    lo, hi = budget.u0_box.lo, budget.u0_box.hi
    u0 = rng.uniform(lo, hi)
    base = u0 - budget.eta * rng.uniform(0.0, 1.0, size=u0.shape)
    starts = np.concatenate([[0.0], np.sort(rng.uniform(0.0, T, size=max(n_pieces - 1, 0)))])
    starts = np.unique(starts)
    values = [u0] + [base + budget.eta * rng.uniform(0.0, 1.0, size=u0.shape) for _ in starts[1:]]
    return Signal.piecewise_constant(starts, values, T)


@dataclass(frozen=True)
class TimeSequence:
    instants: np.ndarray
    horizon: float

    def __post_init__(self):
        inst = np.asarray(self.instants, dtype=float)
        if inst.ndim != 1 or inst.size < 1 or inst[0] != 0.0:
            raise RejectedInputError("a time sequence starts at 0")
        if np.any(np.diff(inst) <= 0) or inst[-1] > self.horizon:
            raise RejectedInputError("time instants must increase strictly and stay within the horizon")
        object.__setattr__(self, "instants", inst)
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def gaps(self):
        return np.diff(self.instants)


def make_piecewise_constant(tseq: TimeSequence, se: str, a: float, b: float, horizon=None):
    """Signal taking value ``a`` or ``b`` on each interval of ``tseq``.

    Character ``se[i]`` sets the value on ``[t_i, t_{i+1})``. The last value
    holds on to the horizon.
    """
    if len(se) != len(tseq.gaps):
        raise RejectedInputError(f"string of length {len(se)} for {len(tseq.gaps)} intervals")
    if not a > b:
        raise RejectedInputError("need a > b")
    if set(se) - {"a", "b"}:
        raise RejectedInputError(f"strings use only 'a' and 'b', got {se!r}")
    horizon = tseq.horizon if horizon is None else horizon
    if not se:
        return Signal.constant(a, horizon)
    values = [a if c == "a" else b for c in se]
    starts, kept = [], []
    for t, v in zip(tseq.instants[:-1], values):
        if kept and kept[-1] == v:
            continue
        starts.append(t)
        kept.append(v)
    return Signal.piecewise_constant(starts, kept, horizon)


def tseq_uniform(T, eps, a, b, max_switches=None):
    """Evenly spaced instants with spacing ``3 eps / (a - b)``."""
    if not (eps > 0 and a > b and T > 0):
        raise RejectedInputError("need eps > 0, a > b, T > 0")
    tau = 3.0 * eps / (a - b)
    if tau > T:
        return TimeSequence(np.array([0.0, T]), T)
    k = int(floor_tol(T / tau))
    if max_switches is not None:
        k = min(k, int(max_switches))
    instants = np.minimum(np.arange(k + 1) * tau, T)
    return TimeSequence(instants, T)


def _decaying_instants(v1, rate, T, max_switches):
    instants = [0.0]
    v = v1
    while max_switches is None or len(instants) - 1 < max_switches:
        t = instants[-1] + v
        if t > T:
            break
        instants.append(t)
        v = v * math.exp(-rate * v)
    return np.array(instants)


def tseq_alpha(T, eps, alpha, a, b, max_switches=10_000):
    """Instants whose gaps follow ``v_{i+1} = v_i exp(-alpha v_i)``."""
    if not (alpha > 0 and eps > 0 and a > b and T > 0):
        raise RejectedInputError("need alpha > 0, eps > 0, a > b, T > 0")
    return TimeSequence(_decaying_instants(2.0 * eps / (a - b), alpha, T, max_switches), T)


def alpha_count_lower_bound(T, eps, alpha, a, b):
    """Guaranteed number of gaps of :func:`tseq_alpha` within ``T``; 0 if vacuous."""
    coef = (a - b - alpha * eps) / (2.0 * alpha * eps)
    if coef <= 0:
        return 0
    return max(0, int(math.floor(coef * math.expm1(alpha * T))))


def tseq_infd(T, eps, b_rate, x0, a, Td=None, max_switches=10_000):
    """Instants for the scalar two-mode system with modes ``a x`` and ``b x``.

    With ``Td`` set, instants are kept only inside ``[j Td, (j+1) Td]`` for
    odd ``j < floor(T / Td)``.
    """
    if x0 == 0:
        raise RejectedInputError("the construction needs a nonzero initial state")
    if not (a > b_rate > 0 and eps > 0 and T > 0):
        raise RejectedInputError("need a > b_rate > 0, eps > 0, T > 0")
    v1 = 2.0 * eps / (abs(x0) * (a - b_rate))
    instants = _decaying_instants(v1, b_rate, T, max_switches)
    if Td is not None:
        if not Td > 0:
            raise RejectedInputError("dwell time must be positive")
        j = np.floor(instants / Td)
        n_blocks = int(floor_tol(T / Td))
        keep = (j % 2 == 1) & (j < n_blocks)
        instants = np.concatenate([[0.0], instants[1:][keep[1:]]])
    return TimeSequence(instants, T)
