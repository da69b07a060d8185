"""Command-line front end.

Exit codes: 0 on success, 2 when the parameters are infeasible, 64 when the
configuration cannot be used (nothing is written in that case).
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import bounds as bnd
from .config import ConfigError, default_config, load_config
from .discrepancy import box_gains, lipschitz_gains
from .dynamics import get_system
from .entropy_lab import Family, SeparationSpec, build_family, sandwich_check
from .errors import CorruptStreamError, RejectedInputError
from .estimator import (EstimatorParams, bit_rate, decode, encode, feasibility, read_stream,
                        write_stream)
from .quantization import Box
from .signals import (Signal, VariationBudget, random_piecewise_constant, tseq_alpha, tseq_uniform)
from .switched import constant_modes, reach_samples, scalar_modes, switched_bound, divergence_profile

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 2, 64


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.9g" % v
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fp:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


class Setup:
    """Objects derived from a configuration, built before any output is written."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.sys = get_system(cfg["system"]["name"], **cfg.system_params)
        bu = cfg["budget"]
        try:
            self.U0 = Box(bu["u0_lo"], bu["u0_hi"])
            self.K = Box(bu["k_lo"], bu["k_hi"])
        except RejectedInputError as exc:
            raise ConfigError(str(exc)) from None
        if self.U0.dim != self.sys.m or self.K.dim != self.sys.n:
            raise ConfigError(f"boxes have dims K={self.K.dim}, U0={self.U0.dim}; "
                              f"system needs n={self.sys.n}, m={self.sys.m}")
        self.budget = VariationBudget(bu["mu"], bu["eta"], self.U0)
        b = cfg["bound"]
        if b["gains"] == "explicit":
            gx, gu = b["mx"], b["mu_gain"]
        elif b["gains"] == "lipschitz":
            g = lipschitz_gains(self.sys.lip_x, self.sys.lip_u, self.sys.n, self.sys.m)
            gx, gu = g.gx, g.gu
        else:
            g = box_gains(self.sys, self.K, self.U0, b["gain_samples"])
            gx, gu = g.gx, g.gu
        lx = b["lx"] if b["lx"] is not None else self.sys.lip_x
        self.inputs = bnd.BoundInputs(self.sys.n, self.sys.m, b["eps"], bu["mu"], bu["eta"], gx, gu, lx)
        s = cfg["search"]
        self.search = bnd.SearchGrid(s["tp_min"], s["tp_max"], s["n_tp"], s["du_min"], s["du_max"],
                                     s["n_du"], s["refine_passes"])

    def pinned(self):
        b = self.cfg["bound"]
        return b["tp"] is not None and b["du"] is not None

    def choose(self):
        """The bound at pinned parameters if given, otherwise the optimized one."""
        b, inp = self.cfg["bound"], self.inputs
        mode = b["mode"]
        if mode == "rho-form":
            if not self.pinned() or b["rho"] is None:
                raise ConfigError("rho-form needs tp, du and rho")
            return bnd.rho_form(b["rho"], b["du"], b["tp"], inp)
        if self.pinned():
            tp, du = b["tp"], b["du"]
            if b["dx"] is not None:
                dx = b["dx"]
            elif b["dx_scale"] is not None:
                gain = inp.Lx if mode == "affine" else inp.Mx
                dx = b["dx_scale"] * inp.eps * math.exp(-gain * tp)
            else:
                dx = float(bnd.budget_dx(du, tp, inp, mode))
                if not dx > 0:
                    return bnd.BoundResult(0.0, du, tp, math.nan, math.inf, mode, False)
            return bnd.evaluate(inp, mode, dx, du, tp)
        return bnd.optimize(inp, mode, self.search)


RESULT_HEADER = ["mode", "Tp", "dx", "du", "gc", "go", "feasible"]


def result_row(r):
    return [r.mode, r.Tp, r.dx, r.du, r.gc, r.go, r.feasible]


def _prepare_out(out):
    os.makedirs(out, exist_ok=True)
    return out


def _echo_config(cfg, out, seed):
    with open(os.path.join(out, "config.resolved.ini"), "w", encoding="utf-8") as fp:
        fp.write(f"# seed = {seed}\n")
        fp.write(cfg.to_text())


def cmd_bound(cfg, out, seed):
    setup = Setup(cfg)
    result = setup.choose()
    _prepare_out(out)
    _echo_config(cfg, out, seed)
    write_csv(os.path.join(out, "bound.csv"), RESULT_HEADER, [result_row(result)])
    inp = setup.inputs
    print(f"system={setup.sys.name} mode={result.mode} gx={inp.Mx:.9g} gu={inp.Mu:.9g}")
    print(f"Tp={result.Tp:.9g} dx={result.dx:.9g} du={result.du:.9g} gc={result.gc:.9g} "
          f"go={result.go:.9g} bits/time feasible={fmt(result.feasible)}")
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def cmd_sweep(cfg, out, seed):
    setup = Setup(cfg)
    mode = cfg["bound"]["mode"]
    if mode == "rho-form":
        raise ConfigError("sweep supports quadratic and affine modes")
    rows = bnd.sweep(setup.inputs, mode, setup.search)
    _prepare_out(out)
    _echo_config(cfg, out, seed)
    write_csv(os.path.join(out, "sweep.csv"), RESULT_HEADER, [result_row(r) for r in rows])
    n_ok = sum(r.feasible for r in rows)
    print(f"{len(rows)} grid points, {n_ok} feasible")
    return EXIT_OK if n_ok else EXIT_INFEASIBLE


def _estimator_params(setup, result):
    T = setup.cfg["estimate"]["t"]
    return EstimatorParams(T, result.Tp, result.dx, result.du, setup.inputs.eps)


def _write_z(path, approx):
    times, states = approx.z_times, approx.z_states
    header = ["segment", "t"] + [f"z{i + 1}" for i in range(states.shape[1])]
    seg_len = len(approx.segments[0].times) if approx.segments else 0
    rows = [[k // seg_len, t] + list(s) for k, (t, s) in enumerate(zip(times, states))]
    write_csv(path, header, rows)


def cmd_estimate(cfg, out, seed, stream=None):
    setup = Setup(cfg)
    est = cfg["estimate"]
    if cfg["bound"]["mode"] == "rho-form":
        raise ConfigError("estimate supports quadratic and affine modes")
    if stream is not None:
        return _decode_only(setup, out, seed, stream)
    result = setup.choose()
    if not (result.feasible and result.dx > 0):
        print(f"infeasible parameters: gc={result.gc:.9g}", file=sys.stderr)
        return EXIT_INFEASIBLE
    p = _estimator_params(setup, result)
    rng = np.random.default_rng(seed)
    if est["x0"]:
        x0 = np.array(est["x0"], dtype=float)
        if x0.size != setup.sys.n:
            raise ConfigError(f"[estimate] x0 needs {setup.sys.n} values")
    else:
        x0 = setup.K.sample(rng, 1)[0]
    if est["signal_file"]:
        try:
            with open(est["signal_file"], encoding="utf-8") as fp:
                u = Signal.from_text(fp.read())
        except OSError as exc:
            raise ConfigError(f"cannot read signal file: {exc}") from None
    else:
        u = random_piecewise_constant(rng, setup.budget, p.T, est["pieces"])
    approx = encode(setup.sys, x0, u, setup.budget, setup.K, p)
    decoded = decode(approx.symbols, setup.K, setup.U0, setup.budget, p, setup.sys)
    identical = bool(np.array_equal(decoded.z_states, approx.z_states))
    _prepare_out(out)
    _echo_config(cfg, out, seed)
    with open(os.path.join(out, "stream.txt"), "w", encoding="utf-8") as fp:
        write_stream(fp, approx, setup.sys.n, setup.sys.m, p, setup.budget)
    _write_z(os.path.join(out, "z.csv"), decoded)
    rate = bit_rate(p, setup.sys.n, setup.sys.m, setup.budget)
    write_csv(os.path.join(out, "estimate.csv"),
              ["steps", "Tp", "dx", "du", "eps", "dt", "sup_error", "bit_rate", "go", "decode_identical"],
              [[len(approx.steps), p.Tp, p.dx, p.du, p.eps, p.step, approx.realized_sup_error,
                approx.realized_bit_rate, rate, identical]])
    print(f"steps={len(approx.steps)} sup_error={approx.realized_sup_error:.9g} eps={p.eps:.9g} "
          f"bit_rate={approx.realized_bit_rate:.9g} decode_identical={fmt(identical)}")
    return EXIT_OK


def _decode_only(setup, out, seed, stream):
    try:
        with open(stream, encoding="utf-8") as fp:
            header, symbols, truncated = read_stream(fp)
    except OSError as exc:
        raise ConfigError(f"cannot read stream: {exc}") from None
    if (header.n, header.m) != (setup.sys.n, setup.sys.m):
        raise CorruptStreamError("stream dimensions do not match the configured system")
    budget = VariationBudget(header.mu, header.eta, setup.U0)
    T = max(len(symbols), 1) * header.Tp
    p = EstimatorParams(T, header.Tp, header.dx, header.du, header.eps)
    decoded = decode(symbols, setup.K, setup.U0, budget, p, setup.sys)
    _prepare_out(out)
    _echo_config(setup.cfg, out, seed)
    _write_z(os.path.join(out, "z.csv"), decoded)
    if truncated:
        print(f"warning: stream was truncated; decoded the first {len(symbols)} complete steps",
              file=sys.stderr)
    print(f"decoded {len(symbols)} steps")
    return EXIT_OK


def cmd_separated(cfg, out, seed):
    sec = cfg["separated"]
    a, b, eps, T = sec["a"], sec["b"], sec["eps"], sec["t"]
    try:
        if sec["construction"] == "uniform":
            tseq = tseq_uniform(T, eps, a, b, sec["max_switches"])
        else:
            tseq = tseq_alpha(T, eps, sec["alpha"], a, b, sec["max_switches"])
    except RejectedInputError as exc:
        raise ConfigError(str(exc)) from None
    sys_ = get_system(cfg["system"]["name"], **cfg.system_params)
    spec = SeparationSpec(T, eps, sec["alpha"] if sec["construction"] == "alpha" else 0.0)
    report, family = build_family(sys_, np.array(sec["x0"]), tseq, a, b, spec, sec["max_members"])
    _prepare_out(out)
    _echo_config(cfg, out, seed)
    write_csv(os.path.join(out, "family.csv"),
              ["count", "gaps", "separated", "min_max_gap", "growth_log2_per_T", "min_margin"],
              [[report.count, len(tseq.gaps), report.separated, report.min_max_gap,
                report.growth_log2_per_T, report.min_margin]])
    print(f"members={report.count} separated={fmt(report.separated)} "
          f"min_max_gap={report.min_max_gap:.9g} log2(count)/T={report.growth_log2_per_T:.9g}")
    k = sec["sandwich_members"]
    if k > 0:
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(report.count, size=min(k, report.count), replace=False))
        sub = Family([family.strings[i] for i in pick], family.times, family.states[pick])
        sw = sandwich_check(sub, eps, spec.alpha)
        write_csv(os.path.join(out, "sandwich.csv"), ["members", "s_sep_2eps", "s_star_eps", "s_sep_eps", "holds"],
                  [[len(pick), sw.s_sep_2eps, sw.s_star_eps, sw.s_sep_eps, sw.holds]])
        print(f"sandwich: {sw.s_sep_2eps} <= {sw.s_star_eps} <= {sw.s_sep_eps} holds={fmt(sw.holds)}")
    return EXIT_OK


def cmd_switched(cfg, out, seed):
    sec = cfg["switched"]
    make = constant_modes if sec["modes"] == "constant" else scalar_modes
    sw = make(sec["a"], sec["b"], sec["td"])
    try:
        K = Box(sec["k_lo"], sec["k_hi"])
    except RejectedInputError as exc:
        raise ConfigError(str(exc)) from None
    reach = reach_samples(sw, K, sec["horizon"], sec["n_signals"], seed)
    res = switched_bound(sw, sec["eps"], sec["alpha"], sec["tau"], reach)
    t_max = min(sec["tau"], sec["td"])
    times, prof = divergence_profile(sw, reach, t_max, t_max / 4000.0)
    table_t = np.linspace(0.0, t_max, sec["table_points"])
    _prepare_out(out)
    _echo_config(cfg, out, seed)
    write_csv(os.path.join(out, "divergence.csv"), ["t", "d"],
              [[t, float(np.interp(t, times, prof))] for t in table_t])
    write_csv(os.path.join(out, "switched_bound.csv"), ["Te", "d_Te", "threshold", "bound", "diagnosis"],
              [[res.Te, res.d_Te, res.threshold, res.bound, res.diagnosis]])
    print(f"Te={res.Te:.9g} d(Te)={res.d_Te:.9g} bound={res.bound:.9g} ({res.diagnosis})")
    return EXIT_OK


COMMANDS = {
    "bound": cmd_bound,
    "sweep": cmd_sweep,
    "estimate": cmd_estimate,
    "separated": cmd_separated,
    "switched": cmd_switched,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="estentropy",
                                     description="Estimation-entropy bounds, quantized estimation and separated families.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="configuration file; defaults apply when omitted")
    parser.add_argument("--out", default="out", help="output directory (default: out)")
    parser.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    parser.add_argument("--stream", help="estimate: decode this symbol stream instead of encoding")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        if args.command == "estimate":
            return cmd_estimate(cfg, args.out, args.seed, args.stream)
        if args.stream is not None:
            raise ConfigError("--stream applies to the estimate command only")
        return COMMANDS[args.command](cfg, args.out, args.seed)
    except (ConfigError, CorruptStreamError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RejectedInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
