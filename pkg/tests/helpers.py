"""Shared fixtures for soundness checks: systems, boxes and random pairs."""

import math

import numpy as np

from estentropy.discrepancy import box_gains, check_pair
from estentropy.dynamics import dubin, harrier, integrator, pendulum, scalar_linear
from estentropy.quantization import Box
from estentropy.signals import VariationBudget, random_piecewise_constant


def _grow(box, r):
    return Box(box.lo - r, box.hi + r)


def soundness_cases():
    """name -> (system, K, budget, horizon, gain state box, per-axis lattice)."""
    pi = math.pi
    return {
        "integrator": (integrator(), Box([-1.0], [1.0]), VariationBudget(0.5, 0.5, Box([0.0], [1.0])),
                       1.0, Box([-1.0], [1.0]), 5),
        "dubin": (dubin(), Box([-1.0] * 3, [1.0] * 3),
                  VariationBudget(pi / 4, pi / 4, Box([-pi / 4], [pi / 4])), 0.5, Box([-pi] * 3, [pi] * 3), 5),
        # the state Jacobian depends on the state only through x3
        "harrier": (harrier(), Box([-1.0] * 6, [1.0] * 6),
                    VariationBudget(1.0, 5.0, Box([0.0, 0.0], [10.0, 10.0])), 1.0,
                    Box([0, 0, -pi, 0, 0, 0], [0, 0, pi, 0, 0, 0]), 9),
        # the state Jacobian depends on the state only through cos(x1)
        "pendulum": (pendulum(), Box([-1.0, -1.0], [1.0, 1.0]),
                     VariationBudget(0.1, 1.0, Box([-0.5], [0.5])), 2.0, Box([-pi, 0.0], [pi, 0.0]), 9),
        # the shipped scalar modes x' = a x and x' = b x, here driven through a unit input gain
        "scalar_a": (scalar_linear(1.0, 1.0), Box([-1.0], [1.0]),
                     VariationBudget(0.0, 1.0, Box([0.0], [1.0])), 1.0, Box([-1.0], [1.0]), 5),
        "scalar_b": (scalar_linear(0.5, 1.0), Box([-1.0], [1.0]),
                     VariationBudget(0.0, 1.0, Box([0.0], [1.0])), 1.0, Box([-1.0], [1.0]), 5),
        "contracting": (scalar_linear(-0.7, 0.3), Box([-1.0], [1.0]),
                        VariationBudget(0.0, 1.0, Box([0.0], [1.0])), 1.0, Box([-1.0], [1.0]), 5),
    }


def case_gains(name):
    sys, K, budget, T, gain_box, per_dim = soundness_cases()[name]
    # every input value a random signal can take lies within eta of U0
    return box_gains(sys, gain_box, _grow(budget.u0_box, budget.eta), per_dim)


def run_pairs(name, pairs, seed, dt=2e-3):
    """Return (quadratic violations, linear violations or None, worst ratios)."""
    sys, K, budget, T, _, _ = soundness_cases()[name]
    gains = case_gains(name)
    rng = np.random.default_rng(seed)
    lx = sys.lip_x if sys.affine_input else None
    q_viol = l_viol = 0
    worst_q = worst_l = 0.0
    for _ in range(pairs):
        x0, x1 = K.sample(rng, 2)
        u0 = random_piecewise_constant(rng, budget, T, 4)
        u1 = random_piecewise_constant(rng, budget, T, 4)
        res = check_pair(sys, x0, x1, u0, u1, T, gains, dt, Lx=lx)
        q_viol += res.quadratic_violations
        l_viol += res.linear_violations
        worst_q = max(worst_q, res.worst_quadratic_ratio)
        worst_l = max(worst_l, res.worst_linear_ratio)
    return q_viol, (l_viol if lx is not None else None), worst_q, worst_l


def estimator_case(name):
    """(system, K, budget, horizon, bound inputs) for the Monte-Carlo encoder runs."""
    from estentropy.bounds import BoundInputs

    pi4 = math.pi / 4
    if name == "integrator":
        budget = VariationBudget(0.0, 1.0, Box([0.0], [1.0]))
        return integrator(), Box([-1.0], [1.0]), budget, 0.5, BoundInputs(1, 1, 0.1, 0.0, 1.0, 0.5, 1.0)
    budget = VariationBudget(pi4, pi4, Box([-pi4], [pi4]))
    return (dubin(), Box([-1.0] * 3, [1.0] * 3), budget, 0.2,
            BoundInputs(3, 1, 0.1, pi4, pi4, 5.5, 1.0))


def encoder_monte_carlo(name, runs, seed=0):
    """Run encode/decode on seeded random inputs with optimizer-chosen parameters.

    Returns ``(params, worst error, all decodes identical, worst bit-rate relative gap)``.
    """
    from estentropy.bounds import g_o, optimize
    from estentropy.estimator import EstimatorParams, decode, encode

    sys, K, budget, T, b = estimator_case(name)
    best = optimize(b)
    p = EstimatorParams(T, best.Tp, best.dx, best.du, b.eps)
    target = g_o(p.dx, p.du, p.Tp, b)
    rng = np.random.default_rng(seed)
    worst, identical, rate_gap = 0.0, True, 0.0
    for _ in range(runs):
        x0 = K.sample(rng, 1)[0]
        u = random_piecewise_constant(rng, budget, T, int(rng.integers(1, 6)))
        enc = encode(sys, x0, u, budget, K, p)
        dec = decode(enc.symbols, K, budget.u0_box, budget, p, sys)
        identical &= np.array_equal(dec.z_states, enc.z_states) and np.array_equal(dec.z_times, enc.z_times)
        worst = max(worst, enc.realized_sup_error)
        rate_gap = max(rate_gap, abs(enc.realized_bit_rate - target) / target)
    return p, worst, identical, rate_gap


def embedding_gap(sw, n_signals=20, horizon=None, seed=0, dt=None):
    """Largest sup-norm gap between switched simulation and its one-hot embedding."""
    from estentropy.dynamics import integrate
    from estentropy.signals import Signal
    from estentropy.switched import embed_as_open, random_plan, simulate_switched

    horizon = 4.0 * sw.Td if horizon is None else horizon
    dt = sw.Td / 50.0 if dt is None else dt
    system, _, _ = embed_as_open(sw)
    rng = np.random.default_rng(seed)
    eye = np.eye(sw.N)
    worst = 0.0
    for _ in range(n_signals):
        x0 = rng.uniform(-1.0, 1.0, sw.n)
        plan = random_plan(sw, horizon, rng)
        direct = simulate_switched(sw, x0, plan, horizon, dt)
        sig = Signal.piecewise_constant(plan.starts, [eye[p] for p in plan.modes], horizon)
        emb = integrate(system, x0, sig, horizon, dt)
        assert np.array_equal(direct.times, emb.times)
        worst = max(worst, float(np.max(np.abs(direct.states - emb.states))))
    return worst


def fixed_point_te(eps=0.1, alpha=1.0, Td=1.0, iters=200):
    """Solve ``t = eps (1 - exp(-alpha (Td - t)))`` by plain iteration (d(t) = t)."""
    t = 0.0
    for _ in range(iters):
        t = eps * (1.0 - math.exp(-alpha * (Td - t)))
    return t


def sandwich_family(members=12):
    """First ``members`` strings of the four-gap integrator family (a=1, b=0, T=1.2)."""
    from estentropy.entropy_lab import SeparationSpec, all_strings, build_family
    from estentropy.signals import tseq_uniform

    tseq = tseq_uniform(1.2, 0.1, 1.0, 0.0)
    _, fam = build_family(integrator(), 0.0, tseq, 1.0, 0.0, SeparationSpec(1.2, 0.1),
                          strings=all_strings(4)[:members])
    return fam
