"""Separated trajectory families and exact small-scale entropy counts.

A family is ``theta``-separated when every pair of trajectories is more than
``theta * exp(-alpha t)`` apart (infinity norm) at some grid time. The
combinatorial checks compare, on one finite family:

* ``s_sep(theta)``: the largest pairwise-separated subfamily (maximum clique),
* ``s_star(eps)``: the fewest members whose ``eps``-neighbourhoods cover the
  family (minimum dominating set).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import System, integrate_many, time_grid
from .errors import MemberCapError, RejectedInputError
from .signals import TimeSequence, make_piecewise_constant, tseq_alpha, tseq_uniform
from .switched import SwitchedSystem

EXACT_CAP = 20


@dataclass(frozen=True)
class SeparationSpec:
    T: float
    eps: float
    alpha: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if not (self.T > 0 and self.eps > 0) or self.alpha < 0 or self.tau < 0:
            raise RejectedInputError("need T, eps > 0 and alpha, tau >= 0")


@dataclass(frozen=True)
class FamilyReport:
    count: int
    separated: bool
    min_max_gap: float
    growth_log2_per_T: float
    min_margin: float


@dataclass(frozen=True)
class Family:
    strings: list
    times: np.ndarray
    states: np.ndarray  # (members, len(times), n)


def all_strings(length, alphabet="ab"):
    return ["".join(s) for s in itertools.product(alphabet, repeat=length)]


def pair_stats(times, states, theta, alpha=0.0):
    """Matrices of ``max_t(gap - theta e^{-alpha t})`` and ``max_t(gap / (theta e^{-alpha t}))``."""
    envelope = theta * np.exp(-alpha * np.asarray(times))
    M = states.shape[0]
    margin = np.full((M, M), -np.inf)
    ratio = np.zeros((M, M))
    for i in range(M):
        gap = np.max(np.abs(states[i + 1:] - states[i][None]), axis=2)
        margin[i, i + 1:] = np.max(gap - envelope, axis=1)
        ratio[i, i + 1:] = np.max(gap / envelope, axis=1)
    iu = np.triu_indices(M, 1)
    margin[(iu[1], iu[0])] = margin[iu]
    ratio[(iu[1], iu[0])] = ratio[iu]
    return margin, ratio


def report_for(family: Family, theta, alpha, T):
    count = len(family.strings)
    if count < 2:
        return FamilyReport(count, True, math.inf, math.log2(max(count, 1)) / T, math.inf)
    margin, ratio = pair_stats(family.times, family.states, theta, alpha)
    iu = np.triu_indices(count, 1)
    min_margin = float(np.min(margin[iu]))
    return FamilyReport(count, min_margin > 0, float(np.min(ratio[iu])), math.log2(count) / T, min_margin)


def _check_cap(l, max_members):
    required = 2**l
    if required > max_members:
        raise MemberCapError(f"{l} gaps need {required} members, cap is {max_members}", required)


def family_dt(tseq: TimeSequence, T):
    gaps = tseq.gaps
    return (float(np.min(gaps)) if gaps.size else T) / 20.0


def build_family(sys: System, x0, tseq: TimeSequence, a, b, spec: SeparationSpec, max_members=1024,
                 strings=None):
    """All ``2^l`` piecewise-constant inputs over ``tseq``, simulated and checked.

    Pairs are tested against ``2 eps exp(-alpha t)`` on the integration grid
    with step ``min gap / 20``. Returns ``(report, family)``.
    """
    l = len(tseq.gaps)
    if strings is None:
        _check_cap(l, max_members)
        strings = all_strings(l)
    elif len(strings) > max_members:
        raise MemberCapError(f"{len(strings)} strings exceed cap {max_members}", len(strings))
    signals = [make_piecewise_constant(tseq, s, a, b, spec.T) for s in strings]
    x0s = np.tile(np.atleast_1d(np.asarray(x0, dtype=float)), (len(strings), 1))
    times, states = integrate_many(sys, x0s, signals, spec.T, family_dt(tseq, spec.T))
    family = Family(list(strings), times, states)
    return report_for(family, 2 * spec.eps, spec.alpha, spec.T), family


def switched_family(sw: SwitchedSystem, x0, tseq: TimeSequence, spec: SeparationSpec, max_members=1024,
                    strings=None):
    """Members follow every two-mode string over ``tseq`` ('a' is mode 1, 'b' mode 2)."""
    if sw.N != 2:
        raise RejectedInputError("switched_family expects a two-mode system")
    if np.all(np.asarray(x0, dtype=float) == 0):
        raise RejectedInputError("the construction needs a nonzero initial state")
    l = len(tseq.gaps)
    if strings is None:
        _check_cap(l, max_members)
        strings = all_strings(l)
    times = time_grid(spec.T, family_dt(tseq, spec.T), tseq.instants[1:])
    M = len(strings)
    choice = np.array([[c == "b" for c in s] for s in strings], dtype=bool).reshape(M, l)
    x = np.tile(np.atleast_1d(np.asarray(x0, dtype=float)), (M, 1))
    states = np.empty((M, times.size, sw.n))
    states[:, 0] = x

    def f(y, use_b):
        return np.where(use_b[:, None], sw.field(y, 1), sw.field(y, 0))

    starts = tseq.instants[:-1]
    for k in range(times.size - 1):
        h = times[k + 1] - times[k]
        idx = max(int(np.searchsorted(starts, times[k], side="right")) - 1, 0)
        use_b = choice[:, min(idx, l - 1)] if l else np.zeros(M, dtype=bool)
        k1 = f(x, use_b)
        k2 = f(x + 0.5 * h * k1, use_b)
        k3 = f(x + 0.5 * h * k2, use_b)
        k4 = f(x + h * k3, use_b)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        states[:, k + 1] = x
    family = Family(list(strings), times, states)
    return report_for(family, 2 * spec.eps, spec.alpha, spec.T), family


def growth_sweep(eps_list, T_list, a=1.0, b=0.0, alpha=0.0, sys=None, x0=0.0, verify_cap=2**10):
    """Family sizes ``2^l`` and ``log2(count) / T`` over a grid of ``(eps, T)``.

    Families with at most ``verify_cap`` members are also simulated and
    brute-force checked; larger ones are counted only (``separated`` None).
    """
    from .dynamics import integrator

    sys = integrator() if sys is None else sys
    rows = []
    for eps in eps_list:
        for T in T_list:
            if alpha == 0:
                tau = 3.0 * eps / (a - b)
                tseq = tseq_uniform(T, eps, a, b) if tau <= T else TimeSequence(np.array([0.0]), T)
            else:
                tseq = tseq_alpha(T, eps, alpha, a, b)
            l = len(tseq.gaps)
            count = 2**l
            separated = None
            if count <= verify_cap and l > 0:
                rep, _ = build_family(sys, x0, tseq, a, b, SeparationSpec(T, eps, alpha), verify_cap)
                separated = rep.separated
            rows.append({"eps": eps, "T": T, "alpha": alpha, "gaps": l, "count": count,
                         "log2_per_T": math.log2(count) / T, "separated": separated})
    return rows


# ---------------------------------------------------------------------------
# exact combinatorics


def max_clique(adj):
    """Size of a maximum clique; ``adj`` is a boolean matrix. Branch and bound on bitmasks."""
    M = len(adj)
    nbr = [sum(1 << j for j in range(M) if adj[i][j] and i != j) for i in range(M)]
    best = 0

    def expand(size, cand):
        nonlocal best
        if cand == 0:
            best = max(best, size)
            return
        while cand:
            if size + bin(cand).count("1") <= best:
                return
            v = cand.bit_length() - 1
            expand(size + 1, cand & nbr[v])
            cand &= ~(1 << v)

    expand(0, (1 << M) - 1)
    return best


def min_dominating_set(cover):
    """Fewest rows of ``cover`` whose union covers every column; exhaustive by size."""
    M = len(cover)
    if M == 0:
        return 0
    masks = [sum(1 << j for j in range(M) if cover[i][j]) for i in range(M)]
    full = (1 << M) - 1
    for k in range(1, M + 1):
        for combo in itertools.combinations(range(M), k):
            acc = 0
            for i in combo:
                acc |= masks[i]
            if acc == full:
                return k
    return M


@dataclass(frozen=True)
class SandwichResult:
    s_sep_2eps: int
    s_star_eps: int
    s_sep_eps: int

    @property
    def holds(self):
        return self.s_sep_2eps <= self.s_star_eps <= self.s_sep_eps


def sandwich_check(family: Family, eps, alpha=0.0):
    """Exact ``s_sep(2 eps)``, ``s_star(eps)`` and ``s_sep(eps)`` on a small family."""
    M = len(family.strings)
    if M > EXACT_CAP:
        raise MemberCapError(f"exact counts are limited to {EXACT_CAP} members, got {M}", M)
    sep_eps, _ = pair_stats(family.times, family.states, eps, alpha)
    sep_2eps, _ = pair_stats(family.times, family.states, 2 * eps, alpha)
    adj_eps = sep_eps > 0
    adj_2eps = sep_2eps > 0
    cover = ~adj_eps
    np.fill_diagonal(cover, True)
    return SandwichResult(max_clique(adj_2eps), min_dominating_set(cover), max_clique(adj_eps))
