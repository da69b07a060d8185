"""Entropy upper-bound formulas and a grid-plus-golden-section optimizer.

``g_c`` measures how much of the error budget quantization uses up and
``g_o`` is the resulting bit rate in bits per unit time. A parameter triple
``(dx, du, Tp)`` is feasible when ``g_c <= eps**2`` (quadratic mode) or
``g_c_linear <= eps`` (affine mode, for fields of the shape ``f(x) + u``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import RejectedInputError
from .quantization import ceil_tol

MODES = ("quadratic", "affine", "rho-form")
LN2 = math.log(2.0)
# Shrink factor applied to a budget-exhausting dx so rounding cannot push the
# resulting g_c a hair above the threshold.
_SAFETY = 1.0 - 1e-9


@dataclass(frozen=True)
class BoundInputs:
    n: int
    m: int
    eps: float
    mu: float
    eta: float
    Mx: float
    Mu: float
    Lx: float = 0.0

    def __post_init__(self):
        if not self.eps > 0:
            raise RejectedInputError("eps must be positive")
        if self.mu < 0 or self.eta < 0:
            raise RejectedInputError("mu and eta must be nonnegative")
        if not (math.isfinite(self.Mx) and math.isfinite(self.Mu)):
            raise RejectedInputError("gains must be finite")


@dataclass(frozen=True)
class BoundResult:
    dx: float
    du: float
    Tp: float
    gc: float
    go: float
    mode: str
    feasible: bool


def threshold(b: BoundInputs, mode):
    return b.eps if mode == "affine" else b.eps**2


def g_c_x(dx, Tp, b: BoundInputs):
    return dx**2 * np.exp(2 * b.Mx * Tp)


def g_c_u(du, Tp, b: BoundInputs):
    w = du + b.eta
    poly = b.mu**2 * Tp**3 / 3.0 + w * b.mu * Tp**2 + w**2 * Tp
    return b.Mu**2 * np.exp(2 * b.Mx * Tp) * poly


def g_c(dx, du, Tp, b: BoundInputs):
    return g_c_x(dx, Tp, b) + g_c_u(du, Tp, b)


def g_c_linear_x(dx, Tp, b: BoundInputs):
    return dx * np.exp(b.Lx * Tp)


def g_c_linear_u(du, Tp, b: BoundInputs):
    return (Tp * du + Tp * (b.mu * Tp / 2.0 + b.eta)) * np.exp(b.Lx * Tp)


def g_c_linear(dx, du, Tp, b: BoundInputs):
    return g_c_linear_x(dx, Tp, b) + g_c_linear_u(du, Tp, b)


def state_cells(dx, eps):
    """Per-axis count of state cells in an eps-ball, at least 1."""
    return np.maximum(1.0, ceil_tol(np.asarray(eps, float) / np.asarray(dx, float)))


def input_cells(du, Tp, b: BoundInputs):
    """Per-axis count of input cells, at least 1."""
    return np.maximum(1.0, ceil_tol((b.eta + b.mu * np.asarray(Tp, float)) / np.asarray(du, float) + 1.0))


def g_o(dx, du, Tp, b: BoundInputs):
    bits = b.n * np.log2(state_cells(dx, b.eps)) + b.m * np.log2(input_cells(du, Tp, b))
    out = bits / np.asarray(Tp, float)
    return out if np.ndim(out) else float(out)


def _gc_mode(dx, du, Tp, b, mode):
    return g_c_linear(dx, du, Tp, b) if mode == "affine" else g_c(dx, du, Tp, b)


def evaluate(b: BoundInputs, mode, dx, du, Tp):
    """Bound and feasibility at a pinned parameter triple."""
    if mode not in ("quadratic", "affine"):
        raise RejectedInputError(f"evaluate handles quadratic and affine modes, not {mode!r}")
    gc = float(_gc_mode(dx, du, Tp, b, mode))
    return BoundResult(float(dx), float(du), float(Tp), gc, g_o(dx, du, Tp, b), mode,
                       gc <= threshold(b, mode))


def budget_dx(du, Tp, b: BoundInputs, mode):
    """Largest dx that keeps ``(dx, du, Tp)`` feasible; nonpositive if none."""
    if mode == "affine":
        rest = b.eps - g_c_linear_u(du, Tp, b)
        return np.where(rest > 0, rest * np.exp(-b.Lx * Tp) * _SAFETY, 0.0)
    rest = b.eps**2 - g_c_u(du, Tp, b)
    return np.where(rest > 0, np.sqrt(np.maximum(rest, 0.0)) * np.exp(-b.Mx * Tp) * _SAFETY, 0.0)


def rho_form(rho, du, Tp, b: BoundInputs):
    """Bound with ``dx = eps exp(-(Mx + rho) Tp)``.

    Feasible when the input part of ``g_c`` fits in ``eps^2 (1 - exp(-rho Tp))``;
    the bound is then ``(Mx + rho) n / ln 2 + log2(P) / Tp``.
    """
    if not rho > 0:
        raise RejectedInputError("rho must be positive")
    dx = b.eps * math.exp(-(b.Mx + rho) * Tp)
    gcu = float(g_c_u(du, Tp, b))
    gc = float(g_c_x(dx, Tp, b)) + gcu
    feasible = gcu <= b.eps**2 * (1.0 - math.exp(-rho * Tp))
    if not feasible:
        return BoundResult(dx, float(du), float(Tp), gc, math.inf, "rho-form", False)
    log_p = b.m * math.log2(float(input_cells(du, Tp, b)))
    go = (b.Mx + rho) * b.n / LN2 + log_p / Tp
    return BoundResult(dx, float(du), float(Tp), gc, go, "rho-form", True)


@dataclass(frozen=True)
class SearchGrid:
    tp_min: float = 1e-6
    tp_max: float = 10.0
    n_tp: int = 64
    du_min: float | None = None
    du_max: float | None = None
    n_du: int = 32
    refine_passes: int = 2

    def tp_values(self):
        return np.geomspace(self.tp_min, self.tp_max, self.n_tp)

    def du_values(self, b: BoundInputs):
        lo = self.du_min if self.du_min is not None else b.eps * 1e-3
        hi = self.du_max if self.du_max is not None else max(b.eta + b.mu, b.eps) * 10.0
        return np.geomspace(lo, hi, self.n_du)


def sweep(b: BoundInputs, mode="quadratic", search: SearchGrid = SearchGrid()):
    """Every grid point as a BoundResult, Tp-major order."""
    if mode not in ("quadratic", "affine"):
        raise RejectedInputError(f"sweep handles quadratic and affine modes, not {mode!r}")
    tp = search.tp_values()
    du = search.du_values(b)
    if tp.size == 0 or du.size == 0:
        raise RejectedInputError("search grids must be nonempty")
    TP, DU = np.meshgrid(tp, du, indexing="ij")
    DX = budget_dx(DU, TP, b, mode)
    ok = DX > 0
    safe_dx = np.where(ok, DX, 1.0)
    GC = _gc_mode(safe_dx, DU, TP, b, mode)
    GO = np.where(ok, g_o(safe_dx, DU, TP, b), np.inf)
    thr = threshold(b, mode)
    rows = []
    for i in range(tp.size):
        for j in range(du.size):
            feas = bool(ok[i, j] and GC[i, j] <= thr)
            rows.append(BoundResult(float(DX[i, j]) if ok[i, j] else 0.0, float(du[j]), float(tp[i]),
                                    float(GC[i, j]) if ok[i, j] else math.nan,
                                    float(GO[i, j]) if feas else math.inf, mode, feas))
    return rows


def _best_du_at(Tp, dus, b, mode):
    dx = budget_dx(dus, Tp, b, mode)
    ok = dx > 0
    if not ok.any():
        return None
    go = np.where(ok, g_o(np.where(ok, dx, 1.0), dus, Tp, b), np.inf)
    j = int(np.argmin(go))
    return float(go[j]), float(dus[j]), float(dx[j])


def golden_section(fun, lo, hi, iters=40):
    """Minimize a unimodal-ish ``fun`` on ``[lo, hi]``; returns (x, f(x))."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, c = lo, hi
    x1 = c - inv_phi * (c - a)
    x2 = a + inv_phi * (c - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(iters):
        if f1 <= f2:
            c, x2, f2 = x2, x1, f1
            x1 = c - inv_phi * (c - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv_phi * (c - a)
            f2 = fun(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def optimize(b: BoundInputs, mode="quadratic", search: SearchGrid = SearchGrid()):
    """Smallest bound over the search grid, refined in Tp by golden section.

    For every ``(Tp, du)`` the state radius ``dx`` takes whatever feasibility
    budget the input part leaves. The refinement keeps the best point seen,
    so it never returns anything worse than the grid winner.
    """
    rows = sweep(b, mode, search)
    feasible = [r for r in rows if r.feasible]
    if not feasible:
        return BoundResult(math.nan, math.nan, math.nan, math.nan, math.inf, mode, False)
    best = min(feasible, key=lambda r: r.go)
    tp = search.tp_values()
    dus = search.du_values(b)
    k = int(np.searchsorted(tp, best.Tp))
    lo_log = math.log(tp[max(k - 1, 0)])
    hi_log = math.log(tp[min(k + 1, tp.size - 1)])
    best_go, best_pt = best.go, (best.Tp, best.du, best.dx)
    for _ in range(search.refine_passes):
        du_fixed = best_pt[1]

        def cost(log_tp):
            t = math.exp(log_tp)
            dx = float(budget_dx(du_fixed, t, b, mode))
            return g_o(dx, du_fixed, t, b) if dx > 0 else math.inf

        log_t, val = golden_section(cost, lo_log, hi_log)
        if val < best_go:
            t = math.exp(log_t)
            best_go, best_pt = val, (t, du_fixed, float(budget_dx(du_fixed, t, b, mode)))
        # re-pick du on the grid at the refined Tp, then narrow the bracket
        alt = _best_du_at(best_pt[0], dus, b, mode)
        if alt is not None and alt[0] < best_go:
            best_go, best_pt = alt[0], (best_pt[0], alt[1], alt[2])
        width = (hi_log - lo_log) / 4.0
        centre = math.log(best_pt[0])
        lo_log, hi_log = centre - width, centre + width
    t, du, dx = best_pt
    gc = float(_gc_mode(dx, du, t, b, mode))
    return BoundResult(dx, du, t, gc, g_o(dx, du, t, b), mode, gc <= threshold(b, mode))


def with_eps(b: BoundInputs, eps):
    return replace(b, eps=eps)
