"""Quantized encoder/decoder that builds eps-approximating functions.

Every ``Tp`` time units the encoder samples the true state and input,
quantizes them on grids laid over the sets where they must lie, and sends
the two grid indices. Both sides then simulate the quantized state forward
under the quantized (constant) input to get the next piece of the estimate
``z``. The decoder repeats the same grid construction from the indices
alone, so its ``z`` matches the encoder's bit for bit.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .bounds import BoundInputs, g_c, g_c_linear, g_o
from .dynamics import System, Trajectory, integrate, integrate_constant
from .errors import ContainmentError, CorruptStreamError, RejectedInputError
from .quantization import Box, Grid, ceil_tol, make_grid, quantize
from .signals import Signal, VariationBudget

# Slack on containment tests, to absorb rounding in the ball bounds.
CONTAIN_TOL = 1e-12


@dataclass(frozen=True)
class EstimatorParams:
    T: float
    Tp: float
    dx: float
    du: float
    eps: float
    rho: float = 0.0
    dt: Optional[float] = None

    def __post_init__(self):
        for name in ("T", "Tp", "dx", "du", "eps"):
            if not getattr(self, name) > 0:
                raise RejectedInputError(f"{name} must be positive")
        if self.rho < 0:
            raise RejectedInputError("rho must be nonnegative")
        if self.dt is not None and not self.dt > 0:
            raise RejectedInputError("dt must be positive")

    @property
    def substeps(self):
        """Integration steps per sampling period: Tp/20 or finer, at most 1e-3 each."""
        if self.dt is not None:
            return max(1, int(ceil_tol(self.Tp / self.dt)))
        return max(20, int(math.ceil(self.Tp / 1e-3)))

    @property
    def step(self):
        return self.Tp / self.substeps

    @property
    def n_steps(self):
        return max(1, int(ceil_tol(self.T / self.Tp)))


def feasibility(p: EstimatorParams, b: BoundInputs, mode="quadratic"):
    """``(value, ok)`` for the feasibility functional at these parameters."""
    if mode == "affine":
        val = float(g_c_linear(p.dx, p.du, p.Tp, b))
        return val, val <= b.eps
    val = float(g_c(p.dx, p.du, p.Tp, b))
    return val, val <= b.eps**2


@dataclass(frozen=True)
class StepRecord:
    i: int
    x_sample: Optional[np.ndarray]
    u_sample: Optional[np.ndarray]
    qx: np.ndarray
    qu: np.ndarray
    state_index: int
    input_index: int
    state_box: Box
    input_box: Box
    state_alphabet: int
    input_alphabet: int


@dataclass
class ApproximatingFunction:
    Tp: float
    steps: List[StepRecord]
    segments: List[Trajectory]
    realized_sup_error: Optional[float] = None
    error_times: Optional[np.ndarray] = field(default=None, repr=False)
    errors: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def symbols(self):
        return [(s.state_index, s.input_index) for s in self.steps]

    @property
    def z_times(self):
        return np.concatenate([seg.times + i * self.Tp for i, seg in enumerate(self.segments)])

    @property
    def z_states(self):
        return np.concatenate([seg.states for seg in self.segments])

    @property
    def realized_bit_rate(self):
        """log2 of the per-step alphabet size over Tp, taken from steps after the first."""
        later = self.steps[1:] or self.steps
        sizes = [s.state_alphabet * s.input_alphabet for s in later]
        return math.log2(max(sizes)) / self.Tp

    def z(self, t):
        """Right-continuous value of the estimate at time ``t``."""
        i = min(int(math.floor(t / self.Tp)), len(self.segments) - 1)
        return self.segments[i].at(t - i * self.Tp)


def _grids(i, K, U0, budget, p, prev_end, prev_qu, scale):
    """State and input grids for step ``i``, shared by encoder and decoder."""
    if i == 0:
        sx, su = K, U0
    else:
        sx = Box.ball(prev_end, p.eps * scale)
        su = Box.ball(prev_qu, budget.eta + budget.mu * p.Tp + p.du)
    return make_grid(sx, p.dx * scale), make_grid(su, p.du)


def _segment(sys, qx, qu, p):
    return integrate_constant(sys, qx, qu, p.Tp, p.step)


def _check_dims(sys, K, U0):
    if K.dim != sys.n or U0.dim != sys.m:
        raise RejectedInputError(f"boxes of dims {K.dim}, {U0.dim} for a system with n={sys.n}, m={sys.m}")


def _encode(sys, x0, u, budget, K, p, decay):
    _check_dims(sys, K, budget.u0_box)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not K.contains(x0):
        raise RejectedInputError(f"initial state {x0} is outside K")
    steps, segments = [], []
    err_t, err_v = [], []
    x = x0
    prev_end = prev_qu = None
    for i in range(p.n_steps):
        scale = math.exp(-i * p.rho * p.Tp) if decay else 1.0
        gx, gu = _grids(i, K, budget.u0_box, budget, p, prev_end, prev_qu, scale)
        t0 = i * p.Tp
        ui = u(t0)
        if not gx.box.contains(x, CONTAIN_TOL):
            raise ContainmentError(f"state sample at step {i} is outside its set", i, "state")
        if not gu.box.contains(ui, CONTAIN_TOL):
            raise ContainmentError(f"input sample at step {i} is outside its set", i, "input")
        qx, ix, _ = quantize(x, gx)
        qu, iu, _ = quantize(ui, gu)
        z_seg = _segment(sys, qx, qu, p)
        true_seg = integrate(sys, x, u.window(t0, p.Tp), p.Tp, p.step)
        # z's grid is a subset of the true segment's grid, so interpolation
        # only fills in at input breakpoints, where z is smooth.
        local = true_seg.times
        keep = t0 + local <= p.T * (1 + 1e-12)
        gap = np.max(np.abs(true_seg.states - z_seg.at(local)), axis=1)
        weight = np.exp(p.rho * (t0 + local)) if decay else 1.0
        err_t.append(t0 + local[keep])
        err_v.append((gap * weight)[keep])
        steps.append(StepRecord(i, x.copy(), np.array(ui, dtype=float), qx, qu,
                                gx.flat_index(ix), gu.flat_index(iu), gx.box, gu.box, gx.size, gu.size))
        segments.append(z_seg)
        prev_end, prev_qu = z_seg.final, qu
        x = true_seg.final
    times = np.concatenate(err_t)
    errs = np.concatenate(err_v)
    return ApproximatingFunction(p.Tp, steps, segments, float(np.max(errs)), times, errs)


def encode(sys: System, x0, u: Signal, budget: VariationBudget, K: Box, p: EstimatorParams):
    """Run the encoder against the true trajectory from ``x0`` under ``u``.

    ``realized_sup_error`` is the largest infinity-norm gap between the
    estimate and the true state over the integration grid on ``[0, T]``,
    counting both one-sided limits at sampling instants. Raises
    :class:`ContainmentError` if a sample misses the set it should lie in.
    """
    return _encode(sys, x0, u, budget, K, p, decay=False)


def encode_exp(sys: System, x0, u: Signal, K: Box, p: EstimatorParams):
    """Encoder whose error bound shrinks like ``eps * exp(-rho t)``.

    The input must be constant and known to both sides, so it is sent as a
    single-symbol alphabet. The state radius and the accuracy ball both
    shrink by ``exp(-rho Tp)`` each step. ``realized_sup_error`` is the
    largest value of ``gap(t) * exp(rho t)``.
    """
    if len(u.pieces) != 1 or u.pieces[0].slope is not None:
        raise RejectedInputError("the decaying encoder needs a constant input")
    u0 = u(0.0)
    budget = VariationBudget(0.0, 0.0, Box(u0, u0))
    return _encode(sys, x0, u, budget, K, p, decay=True)


def decode(symbols, K: Box, U0: Box, budget: VariationBudget, p: EstimatorParams, sys: System,
           decay=False):
    """Rebuild the estimate from symbol pairs ``(state_index, input_index)``.

    A short stream yields the matching prefix of the estimate.
    """
    _check_dims(sys, K, U0)
    budget = VariationBudget(budget.mu, budget.eta, U0)
    steps, segments = [], []
    prev_end = prev_qu = None
    for i, (sx, su) in enumerate(symbols):
        scale = math.exp(-i * p.rho * p.Tp) if decay else 1.0
        gx, gu = _grids(i, K, U0, budget, p, prev_end, prev_qu, scale)
        try:
            ix = gx.unflat_index(int(sx))
            iu = gu.unflat_index(int(su))
        except (IndexError, ValueError) as exc:
            raise CorruptStreamError(f"step {i}: {exc}") from None
        qx, qu = gx.center_of(ix), gu.center_of(iu)
        z_seg = _segment(sys, qx, qu, p)
        steps.append(StepRecord(i, None, None, qx, qu, int(sx), int(su), gx.box, gu.box, gx.size, gu.size))
        segments.append(z_seg)
        prev_end, prev_qu = z_seg.final, qu
    return ApproximatingFunction(p.Tp, steps, segments)


def bit_rate(p: EstimatorParams, n, m, budget: VariationBudget):
    """Bits per unit time the encoder needs; the same formula as the bound."""
    b = BoundInputs(n, m, p.eps, budget.mu, budget.eta, 0.0, 0.0)
    return g_o(p.dx, p.du, p.Tp, b)


def write_stream(fp, approx: ApproximatingFunction, n, m, p: EstimatorParams, budget: VariationBudget):
    fp.write(" ".join([str(n), str(m)] + [repr(float(v)) for v in
                      (p.Tp, p.dx, p.du, p.eps, budget.mu, budget.eta)]) + "\n")
    for i, (sx, su) in enumerate(approx.symbols):
        fp.write(f"{i} {sx} {su}\n")


@dataclass(frozen=True)
class StreamHeader:
    n: int
    m: int
    Tp: float
    dx: float
    du: float
    eps: float
    mu: float
    eta: float


def read_stream(fp):
    """Parse a stream file; returns ``(header, symbols, truncated)``.

    A final line without its newline may have been cut short, so it is
    dropped and reported through ``truncated``; any other malformed line
    raises CorruptStreamError.
    """
    text = fp.read() if hasattr(fp, "read") else str(fp)
    lines = text.split("\n")
    ends_clean = text.endswith("\n")
    if not lines or not lines[0].strip():
        raise CorruptStreamError("stream has no header")
    head = lines[0].split()
    if len(head) != 8:
        raise CorruptStreamError(f"header needs 8 fields, got {len(head)}")
    try:
        header = StreamHeader(int(head[0]), int(head[1]), *(float(v) for v in head[2:]))
    except ValueError as exc:
        raise CorruptStreamError(f"bad header: {exc}") from None
    body = lines[1:]
    if body and body[-1] == "":
        body = body[:-1]
    truncated = False
    if body and not ends_clean:
        # a line without its newline may have lost digits; drop it
        body, truncated = body[:-1], True
    symbols = []
    for k, line in enumerate(body):
        parts = line.split()
        if len(parts) != 3:
            raise CorruptStreamError(f"line {k + 2}: expected 'i state input', got {line!r}")
        try:
            i, sx, su = (int(v) for v in parts)
        except ValueError:
            raise CorruptStreamError(f"line {k + 2}: non-integer field in {line!r}") from None
        if i != k or sx < 0 or su < 0:
            raise CorruptStreamError(f"line {k + 2}: out-of-order or negative entry {line!r}")
        symbols.append((sx, su))
    return header, symbols, truncated


def stream_text(approx, n, m, p, budget):
    buf = io.StringIO()
    write_stream(buf, approx, n, m, p, budget)
    return buf.getvalue()
