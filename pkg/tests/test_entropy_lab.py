import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from estentropy.dynamics import integrator, scalar_linear
from estentropy.entropy_lab import (
    Family,
    SeparationSpec,
    all_strings,
    build_family,
    growth_sweep,
    max_clique,
    min_dominating_set,
    pair_stats,
    sandwich_check,
    switched_family,
)
from estentropy.errors import MemberCapError, RejectedInputError
from estentropy.signals import TimeSequence, alpha_count_lower_bound, tseq_alpha, tseq_infd, tseq_uniform
from estentropy.switched import scalar_modes

from helpers import sandwich_family


def test_spec_validation():
    with pytest.raises(RejectedInputError):
        SeparationSpec(0.0, 0.1)
    with pytest.raises(RejectedInputError):
        SeparationSpec(1.0, 0.1, alpha=-1.0)


def test_all_strings():
    assert all_strings(2) == ["aa", "ab", "ba", "bb"]
    assert all_strings(0) == [""]


def test_small_uniform_family_is_separated_with_exact_gap():
    tseq = tseq_uniform(0.9, 0.1, 1.0, 0.0)
    rep, fam = build_family(integrator(), 0.0, tseq, 1.0, 0.0, SeparationSpec(0.9, 0.1))
    assert rep.count == 8 and rep.separated
    # the first differing interval opens a gap of (a - b) tau = 0.3 against 2 eps = 0.2
    assert rep.min_max_gap == pytest.approx(1.5, abs=1e-9)
    assert rep.growth_log2_per_T == pytest.approx(3 / 0.9)
    assert fam.states.shape[0] == 8


def test_family_on_a_stable_system_can_fail_separation():
    tseq = tseq_uniform(0.9, 0.1, 1.0, 0.0)
    rep, _ = build_family(scalar_linear(-20.0, 1.0), 0.0, tseq, 1.0, 0.0, SeparationSpec(0.9, 0.1))
    assert not rep.separated and rep.min_margin < 0


def test_alpha_family_counts_and_separation():
    T, eps, alpha = 1.0, 0.1, 1.0
    tseq = tseq_alpha(T, eps, alpha, 1.0, 0.0)
    assert len(tseq.gaps) >= alpha_count_lower_bound(T, eps, alpha, 1.0, 0.0) == 7
    rep, _ = build_family(integrator(), 0.0, tseq, 1.0, 0.0, SeparationSpec(T, eps, alpha))
    assert rep.separated and rep.count == 2 ** len(tseq.gaps)


def test_member_cap():
    tseq = tseq_uniform(3.3, 0.1, 1.0, 0.0)
    with pytest.raises(MemberCapError) as info:
        build_family(integrator(), 0.0, tseq, 1.0, 0.0, SeparationSpec(3.3, 0.1), max_members=1024)
    assert info.value.required == 2048
    with pytest.raises(MemberCapError):
        build_family(integrator(), 0.0, tseq_uniform(0.6, 0.1, 1, 0), 1.0, 0.0, SeparationSpec(0.6, 0.1),
                     max_members=2, strings=["aa", "ab", "ba"])


def test_switched_family_for_ax_bx():
    T, eps = 1.0, 0.1
    tseq = tseq_infd(T, eps, 0.5, 1.0, 1.0)
    # gaps v1 = 2 eps / (|x0| (a - b)) = 0.4, then v2 = v1 exp(-b v1)
    np.testing.assert_allclose(tseq.instants[:3], [0.0, 0.4, 0.4 + 0.4 * math.exp(-0.2)], rtol=1e-12)
    rep, fam = switched_family(scalar_modes(1.0, 0.5), [1.0], tseq, SeparationSpec(T, eps, 0.5))
    assert rep.count == 2 ** len(tseq.gaps) and rep.separated
    # all-'a' member follows e^t
    i = fam.strings.index("a" * len(tseq.gaps))
    assert fam.states[i, -1, 0] == pytest.approx(math.e, rel=1e-8)
    with pytest.raises(RejectedInputError):
        switched_family(scalar_modes(1.0, 0.5), [0.0], tseq, SeparationSpec(T, eps))


def test_growth_sweep_counts_only_past_cap():
    rows = growth_sweep([0.1], [0.6, 3.3], verify_cap=16)
    assert [r["count"] for r in rows] == [4, 2048]
    assert rows[0]["separated"] is True and rows[1]["separated"] is None
    assert rows[1]["log2_per_T"] == pytest.approx(11 / 3.3)
    short = growth_sweep([0.5], [1.0])
    assert short[0]["count"] == 1


def test_pair_stats_symmetric():
    times = np.linspace(0, 1, 5)
    states = np.random.default_rng(0).normal(size=(4, 5, 2))
    margin, ratio = pair_stats(times, states, 0.3, 0.5)
    iu = np.triu_indices(4, 1)
    np.testing.assert_array_equal(margin[iu], margin.T[iu])
    np.testing.assert_array_equal(ratio[iu], ratio.T[iu])


def _random_graph(seed, M, p):
    rng = np.random.default_rng(seed)
    adj = rng.random((M, M)) < p
    adj = np.triu(adj, 1)
    return adj | adj.T


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 14), st.floats(0.1, 0.9))
def test_max_clique_agrees_with_networkx(seed, M, p):
    adj = _random_graph(seed, M, p)
    g = nx.from_numpy_array(adj.astype(int))
    expected = max(len(c) for c in nx.find_cliques(g))
    assert max_clique(adj) == expected


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 9), st.floats(0.1, 0.8))
def test_dominating_set_agrees_with_brute_force(seed, M, p):
    adj = _random_graph(seed, M, p)
    cover = adj | np.eye(M, dtype=bool)
    g = nx.from_numpy_array(adj.astype(int))
    best = min(k for k in range(1, M + 1)
               for combo in itertools.combinations(range(M), k) if nx.is_dominating_set(g, combo))
    assert min_dominating_set(cover) == best


def test_sandwich_on_twelve_members():
    fam = sandwich_family()
    assert len(fam.strings) == 12
    r = sandwich_check(fam, 0.15)
    assert (r.s_sep_2eps, r.s_star_eps, r.s_sep_eps) == (6, 12, 12) and r.holds
    r = sandwich_check(fam, 0.3)
    assert (r.s_sep_2eps, r.s_star_eps, r.s_sep_eps) == (2, 6, 6) and r.holds


def test_sandwich_rejects_large_families():
    fam = Family(all_strings(5), np.zeros(1), np.zeros((32, 1, 1)))
    with pytest.raises(MemberCapError):
        sandwich_check(fam, 0.1)
