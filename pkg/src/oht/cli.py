"""Command-line front end: exponent queries, simulations, benchmarks and figure sweeps.

Every command writes CSV to standard output (or ``--out``).  Options can also
come from a flat JSON file passed with ``--config``; its keys are the long
flag names without the leading dashes, and explicit flags win over it.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Iterable, Optional, Sequence

import numpy as np

from .core_stats import Distribution, Scoring
from .errors import CapacityError, InvalidInputError
from .exponents import SimplexGrid, theorem_bound
from .fixed_tests import Hypothesis
from .seq_tests import DEFAULT_K_MAX, SeqTestConfig
from .sim_harness import (
    FIXED_TESTS,
    SEQUENTIAL_TESTS,
    OutlierTest,
    TrialSetup,
    estimate,
    matched_fixed_n,
    measure_runtime,
)

EXPONENT_COLUMNS = ["sweep_param", "kind", "value", "resolution", "components"]
FIXED_COLUMNS = ["n", "trials", "p_mis", "se_mis", "p_fr", "se_fr", "p_fa", "se_fa"]
SEQ_COLUMNS = FIXED_COLUMNS + ["mean_tau", "se_tau", "capped_fraction"]
BENCH_COLUMNS = ["test", "M", "t_or_T", "median_ns", "p90_ns", "trials_timed", "status"]
FIGURE_SIM_COLUMNS = ["series"] + SEQ_COLUMNS + ["p_bayes", "se_bayes", "median_ns"]

KIND_ALIASES = {
    "thm1": "Thm1_mis", "thm2": "Thm2_mis", "thm3": "Thm3_mis", "thm4": "Thm4_mis",
    "thm3-fr": "Thm3_fr", "thm3-fa": "Thm3_fa", "thm4-fr": "Thm4_fr", "thm4-fa": "Thm4_fa",
    "thm3-penalty": "Thm3_penalty",
}
EXIT_USAGE = 2
EXIT_CAPACITY = 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# formatting and parsing helpers


def fmt_prob(x: float) -> str:
    return "nan" if x is None or math.isnan(x) else f"{x:.6g}"


def fmt_exp(x: float) -> str:
    if x is None or math.isnan(x):
        return "nan"
    return "inf" if math.isinf(x) else f"{x:.5g}"


def parse_sweep(value, kind=float) -> list:
    """``"a"``, ``"a,b,c"``, ``"start:stop:step"`` (inclusive) or a JSON list."""
    if value is None:
        return []
    if isinstance(value, (int, float)):
        vals = [kind(value)]
    elif isinstance(value, (list, tuple)):
        vals = [kind(v) for v in value]
    else:
        text = str(value).strip()
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise UsageError(f"range {text!r} must be start:stop:step")
            start, stop, step = (float(p) for p in parts)
            if step <= 0:
                raise UsageError("range step must be positive")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            vals = [kind(round(start + i * step, 12)) for i in range(count)]
        else:
            vals = [kind(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise UsageError("empty sweep list")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise UsageError(f"sweep values must be strictly increasing: {vals}")
    return vals


def _distribution(bern: Optional[float], vec: Optional[str], name: str) -> Distribution:
    if vec is not None:
        probs = vec if isinstance(vec, list) else [float(v) for v in str(vec).split(",")]
        return Distribution(np.asarray(probs, dtype=float))
    if bern is None:
        raise UsageError(f"give --{name} or --{name}-vec")
    return Distribution.bernoulli(float(bern))


def _grid(args) -> SimplexGrid:
    return SimplexGrid(2, args.grid_res, args.refine)


class _Writer:
    def __init__(self, stream, columns: Sequence[str]):
        self._w = csv.writer(stream, lineterminator="\n")
        self._w.writerow(columns)

    def row(self, values: Iterable) -> None:
        self._w.writerow(list(values))


# ---------------------------------------------------------------------------
# exponent


def _resolve_kind(kind: str) -> str:
    return KIND_ALIASES.get(kind.lower(), kind)


def _exponent_row(kind, pn, pa, f, lam, lam1, lam2, lam2_offset, grid):
    """Evaluate one bound; the Thm3 kinds use ``lam`` (falling back to ``lam2``)."""
    if lam2_offset is not None:
        lam2 = float(f(pa.probs, pn.probs)) + lam2_offset
        if lam is None:
            lam = lam2
    if kind.startswith("Thm3"):
        return theorem_bound(kind, pn, pa, f, lam if lam is not None else lam2, None, grid)
    return theorem_bound(kind, pn, pa, f, lam1, lam2, grid)


def _write_bound(w: _Writer, sweep_value, b) -> None:
    comps = [f"{k}={fmt_exp(v)}" for k, v in b.components.items()]
    if b.infeasible:
        comps.append("feasible=false")
    w.row([fmt_exp(sweep_value), b.kind, fmt_exp(b.value), fmt_exp(b.resolution), ";".join(comps)])


def cmd_exponent(args, out) -> int:
    f = Scoring.parse(args.scoring)
    grid = _grid(args)
    kinds = [_resolve_kind(k) for k in str(args.kind).split(",")]
    pa_sweep = parse_sweep(args.pa_sweep)
    lam_sweep = parse_sweep(args.lambda_sweep)
    if pa_sweep and lam_sweep:
        raise UsageError("sweep either --pa-sweep or --lambda-sweep, not both")
    pn = _distribution(args.pn, args.pn_vec, "pn")
    w = _Writer(out, EXPONENT_COLUMNS)
    if pa_sweep:
        for a in pa_sweep:
            pa = Distribution.bernoulli(a)
            for kind in kinds:
                b = _exponent_row(kind, pn, pa, f, args.lam, args.lambda1, args.lambda2, args.lambda2_offset, grid)
                _write_bound(w, a, b)
        return 0
    pa = _distribution(args.pa, args.pa_vec, "pa")
    if lam_sweep:
        for lam in lam_sweep:
            for kind in kinds:
                # the swept value feeds whichever single threshold the kind uses
                if kind.startswith("Thm3"):
                    b = _exponent_row(kind, pn, pa, f, lam, None, None, None, grid)
                elif kind in ("Thm4_fa",):
                    b = _exponent_row(kind, pn, pa, f, None, None, lam, None, grid)
                else:
                    b = _exponent_row(kind, pn, pa, f, None, lam, args.lambda2, None, grid)
                _write_bound(w, lam, b)
        return 0
    sweep_value = args.pa if args.pa_vec is None else math.nan
    for kind in kinds:
        b = _exponent_row(kind, pn, pa, f, args.lam, args.lambda1, args.lambda2, args.lambda2_offset, grid)
        _write_bound(w, sweep_value, b)
    return 0


# ---------------------------------------------------------------------------
# simulate


def _truth(args, m: int) -> Hypothesis:
    k = args.outliers if args.outliers is not None else args.t
    if k is None:
        raise UsageError("give --outliers (0 for the no-outlier truth) or --t")
    return Hypothesis.no_outlier() if k == 0 else Hypothesis.outlier_set(range(k))


def _make_test(args) -> OutlierTest:
    if args.test is None:
        raise UsageError(f"give --test, one of {FIXED_TESTS + SEQUENTIAL_TESTS}")
    lam = args.lam
    if args.test == "zhou" and lam is None:
        lam = args.lambda1
    return OutlierTest(args.test, t=args.t, T=args.T, lam=lam, scoring=args.scoring, cap=args.cap)


def _seq_cfg(args, n_min: int) -> SeqTestConfig:
    lam1 = args.lambda1 if args.lambda1 is not None else args.lam
    lam2 = args.lambda2 if args.lambda2 is not None else lam1
    if lam1 is None:
        raise UsageError("sequential tests need --lambda1 and --lambda2")
    return SeqTestConfig(lam1, lam2, n_min, args.kmax)


def _prob_fields(r) -> list[str]:
    return [fmt_prob(v) for v in (r.p_mis, r.se_mis, r.p_fr, r.se_fr, r.p_fa, r.se_fa)]


def _seq_fields(r) -> list[str]:
    return [fmt_prob(r.mean_tau), fmt_prob(r.se_tau), fmt_prob(r.capped_fraction)]


def _warn_capped(r, label) -> None:
    if r.reliability_warning:
        print(f"warning: {label}: {r.capped_fraction:.3%} of trials hit the sample cap", file=sys.stderr)


def cmd_simulate(args, out) -> int:
    test = _make_test(args)
    pn = _distribution(args.pn, args.pn_vec, "pn")
    pa = _distribution(args.pa, args.pa_vec, "pa")
    if args.M is None:
        raise UsageError("give --M")
    truth = _truth(args, args.M)
    if test.sequential:
        nmins = parse_sweep(args.nmin if args.nmin is not None else 2, int)
        w = _Writer(out, SEQ_COLUMNS)
        for n_min in nmins:
            setup = TrialSetup(args.M, truth, pn, pa, seq_cfg=_seq_cfg(args, n_min), trials=args.trials, base_seed=args.seed)
            r = estimate(test, setup, args.threads)
            _warn_capped(r, f"nmin={n_min}")
            w.row([n_min, r.trials_run, *_prob_fields(r), *_seq_fields(r)])
        return 0
    if args.n is None:
        raise UsageError("fixed-length tests need --n")
    w = _Writer(out, FIXED_COLUMNS)
    for n in parse_sweep(args.n, int):
        setup = TrialSetup(args.M, truth, pn, pa, fixed_n=n, trials=args.trials, base_seed=args.seed)
        r = estimate(test, setup, args.threads)
        w.row([n, r.trials_run, *_prob_fields(r)])
    return 0


# ---------------------------------------------------------------------------
# bench


def cmd_bench(args, out) -> int:
    tests = [t.strip() for t in str(args.tests).split(",") if t.strip()]
    ms = parse_sweep(args.M, int)
    counts = parse_sweep(args.t if args.t is not None else args.T, int)
    pn = _distribution(args.pn, args.pn_vec, "pn")
    pa = _distribution(args.pa, args.pa_vec, "pa")
    w = _Writer(out, BENCH_COLUMNS)
    capacity_hit = invalid = False
    for name in tests:
        for m in ms:
            for k in counts:
                test = OutlierTest(name, t=k, T=k, lam=args.lam or args.lambda1 or 1e-3, scoring=args.scoring, cap=args.cap)
                truth = Hypothesis.outlier_set(range(k))
                try:
                    if test.sequential:
                        setup = TrialSetup(m, truth, pn, pa, seq_cfg=_seq_cfg(args, int(args.nmin or 2)), trials=args.trials, base_seed=args.seed)
                    else:
                        setup = TrialSetup(m, truth, pn, pa, fixed_n=int(args.n or 100), trials=args.trials, base_seed=args.seed)
                    rt = measure_runtime(test, setup, warmup=args.warmup)
                    w.row([name, m, k, rt.median_ns_per_trial, rt.p90_ns_per_trial, rt.trials_timed, "ok"])
                except CapacityError as exc:
                    capacity_hit = True
                    print(f"capacity: {name} M={m} {k}: {exc}", file=sys.stderr)
                    w.row([name, m, k, "nan", "nan", 0, "capacity"])
                except InvalidInputError as exc:
                    # invalid sweep points produce no row
                    invalid = True
                    print(f"error: {name} M={m} {k}: {exc}", file=sys.stderr)
    if invalid:
        return EXIT_USAGE
    if capacity_hit and not args.allow_capacity:
        return EXIT_CAPACITY
    return 0


# ---------------------------------------------------------------------------
# figures

FIGURES = (
    "comp_li", "comp_zhou", "low_compare", "low_compare_unknown",
    "kl_vs_gjs", "kl_vs_gjs_seq", "known_exponent", "unknown_exponent",
)


def _fig_sim_row(w, series, n, r, median_ns=None) -> None:
    seq = [fmt_prob(r.mean_tau), fmt_prob(r.se_tau), fmt_prob(r.capped_fraction) if not math.isnan(r.mean_tau) else "nan"]
    w.row([
        series, n, r.trials_run, *_prob_fields(r), *seq,
        fmt_prob(r.p_bayes), fmt_prob(r.se_bayes),
        "nan" if median_ns is None else median_ns,
    ])


def _fig_exponents(args, out, pn, a_values, rows) -> int:
    """``rows(pa)`` yields (kind, scoring, lambda, lambda1, lambda2) tuples per a."""
    grid = _grid(args)
    w = _Writer(out, ["series"] + EXPONENT_COLUMNS)
    for a in a_values:
        pa = Distribution.bernoulli(a)
        for series, kind, f, lam1, lam2 in rows(pa):
            b = theorem_bound(kind, pn, pa, f, lam1, lam2, grid)
            comps = [f"{k}={fmt_exp(v)}" for k, v in b.components.items()]
            if b.infeasible:
                comps.append("feasible=false")
            w.row([series, fmt_exp(a), kind, fmt_exp(b.value), fmt_exp(b.resolution), ";".join(comps)])
    return 0


def _a_grid(lo: float, hi: float, step: float, skip: float) -> list[float]:
    vals = np.round(np.arange(lo, hi + step / 2, step), 10)
    return [float(v) for v in vals if abs(v - skip) > 1e-9]


def cmd_figure(args, out) -> int:
    name = args.name
    trials = args.trials
    seed = args.seed
    if name == "comp_li":
        pn, pa = Distribution.bernoulli(0.23), Distribution.bernoulli(0.3)
        truth = Hypothesis.outlier_set(range(3))
        w = _Writer(out, FIGURE_SIM_COLUMNS)
        for series in ("fix-known", "li"):
            test = OutlierTest(series, t=3)
            for n in parse_sweep(args.n or "100,200,400,800", int):
                setup = TrialSetup(10, truth, pn, pa, fixed_n=n, trials=trials, base_seed=seed)
                r = estimate(test, setup, args.threads)
                timing = TrialSetup(10, truth, pn, pa, fixed_n=n, trials=min(trials, args.timing_trials), base_seed=seed)
                _fig_sim_row(w, series, n, r, measure_runtime(test, timing, args.warmup).median_ns_per_trial)
        return 0
    if name == "comp_zhou":
        pn, pa = Distribution.bernoulli(0.23), Distribution.bernoulli(0.3)
        truth = Hypothesis.outlier_set(range(3))
        w = _Writer(out, FIGURE_SIM_COLUMNS)
        for series, test in (("fix-unknown", OutlierTest("fix-unknown", lam=0.001)), ("zhou", OutlierTest("zhou", T=4, lam=0.001))):
            for n in parse_sweep(args.n or "100,200,400,800", int):
                setup = TrialSetup(10, truth, pn, pa, fixed_n=n, trials=trials, base_seed=seed)
                r = estimate(test, setup, args.threads)
                timing = TrialSetup(10, truth, pn, pa, fixed_n=n, trials=min(trials, args.timing_trials), base_seed=seed)
                _fig_sim_row(w, series, n, r, measure_runtime(test, timing, args.warmup).median_ns_per_trial)
        return 0
    if name in ("low_compare", "low_compare_unknown"):
        known = name == "low_compare"
        pn, pa = Distribution.bernoulli(0.32), Distribution.bernoulli(0.25)
        truth = Hypothesis.outlier_set(range(10))
        if known:
            cfg_l = (0.001, 0.003)
            seq_test, fix_test = OutlierTest("seq-known", t=10), OutlierTest("fix-known", t=10)
        else:
            cfg_l = (0.001, 0.0025)
            seq_test, fix_test = OutlierTest("seq-unknown"), OutlierTest("fix-unknown", lam=0.0025)
        w = _Writer(out, FIGURE_SIM_COLUMNS)
        for n_min in parse_sweep(args.nmin or ("500,1000,1500,2000" if known else "50,100,200,400"), int):
            seq_setup = TrialSetup(100, truth, pn, pa, seq_cfg=SeqTestConfig(*cfg_l, n_min, args.kmax), trials=trials, base_seed=seed)
            rs = estimate(seq_test, seq_setup, args.threads)
            _warn_capped(rs, f"nmin={n_min}")
            n = matched_fixed_n(rs)
            rf = estimate(fix_test, TrialSetup(100, truth, pn, pa, fixed_n=n, trials=trials, base_seed=seed), args.threads)
            _fig_sim_row(w, "sequential", n_min, rs)
            _fig_sim_row(w, "fixed", n, rf)
        return 0
    if name == "kl_vs_gjs":
        pn = Distribution.bernoulli(0.2)
        rows = lambda pa: [(s, "Thm1_mis", Scoring(s), None, None) for s in ("kl", "gjs")]
        return _fig_exponents(args, out, pn, _a_grid(0.01, 0.55, 0.01, 0.2), rows)
    if name == "kl_vs_gjs_seq":
        pn = Distribution.bernoulli(0.2)

        def rows(pa):
            for s in ("kl", "gjs"):
                f = Scoring(s)
                lam2 = float(f(pa.probs, pn.probs)) - 0.0001
                # near P_N the limiting lambda2 falls below the default lambda1
                yield s, "Thm2_mis", f, min(0.001, lam2), lam2
        return _fig_exponents(args, out, pn, _a_grid(0.01, 0.99, 0.01, 0.2), rows)
    if name == "known_exponent":
        pn = Distribution.bernoulli(0.5)
        f = Scoring.GJS

        def rows(pa):
            lam2 = float(f(pa.probs, pn.probs)) - 0.0001
            yield "fixed", "Thm1_mis", f, None, None
            yield "sequential", "Thm2_mis", f, min(0.0005, lam2), lam2
        return _fig_exponents(args, out, pn, _a_grid(0.05, 0.95, 0.05, 0.5), rows)
    if name == "unknown_exponent":
        pn = Distribution.bernoulli(0.5)
        f = Scoring.GJS

        def rows(pa):
            lam2 = float(f(pa.probs, pn.probs)) - 0.0001
            yield "fixed", "Thm3_mis", f, None, None
            yield "fixed", "Thm3_fr", f, lam2, None
            lam1 = min(0.0005, lam2)
            yield "sequential", "Thm4_mis", f, lam1, lam2
            yield "sequential", "Thm4_fr", f, lam1, lam2
        return _fig_exponents(args, out, pn, _a_grid(0.05, 0.95, 0.05, 0.5), rows)
    raise UsageError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON file of option defaults")
    p.add_argument("--out", help="write CSV here instead of standard output")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--scoring", choices=["kl", "gjs"], default="gjs")
    p.add_argument("--pn", type=float)
    p.add_argument("--pa", type=float)
    p.add_argument("--pn-vec")
    p.add_argument("--pa-vec")
    p.add_argument("--M")
    p.add_argument("--t", help="known outlier count (bench: sweepable)")
    p.add_argument("--T", help="outlier-count bound (bench: sweepable)")
    p.add_argument("--outliers", type=int, help="true outlier count |B| (0 = no outliers)")
    p.add_argument("--n", help="sample size: single, comma list or start:stop:step")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--lambda2-offset", type=float, help="set lambda2 to f(P_A, P_N) plus this offset")
    p.add_argument("--nmin", help="minimum sample size; sweepable like --n")
    p.add_argument("--kmax", type=int, default=DEFAULT_K_MAX)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--grid-res", type=int, default=400)
    p.add_argument("--refine", type=int, default=3)
    p.add_argument("--cap", type=int, default=10**7, help="subset enumeration cap")
    p.add_argument("--allow-capacity", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oht", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parser.commands = sub.choices

    p = sub.add_parser("exponent", help="evaluate achievable error exponents")
    _common(p)
    p.add_argument("--kind", default="thm1", help="comma list, e.g. thm1,thm2,Thm3_fr")
    p.add_argument("--pa-sweep", help="sweep Bernoulli P_A parameter")
    p.add_argument("--lambda-sweep", help="sweep the kind's threshold")
    p.set_defaults(func=cmd_exponent)

    p = sub.add_parser("simulate", help="Monte Carlo error and stopping-time estimates")
    _common(p)
    p.add_argument("--test", choices=FIXED_TESTS + SEQUENTIAL_TESTS)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="per-trial decision runtime")
    _common(p)
    p.add_argument("--tests", default="fix-known,li")
    p.add_argument("--warmup", type=int, default=100)
    p.set_defaults(func=cmd_bench, trials=200, pn=0.23, pa=0.3)

    p = sub.add_parser("figure", help="desk-scale reproduction sweep for one figure")
    p.add_argument("name", choices=FIGURES)
    _common(p)
    p.add_argument("--warmup", type=int, default=100)
    p.add_argument("--timing-trials", type=int, default=1000)
    p.set_defaults(func=cmd_figure)
    return parser


def _load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise UsageError("config file must hold a flat JSON object")
    return {str(k).lstrip("-").replace("-", "_"): v for k, v in data.items()}


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = _load_config(args.config)
        cfg = {("lam" if k == "lambda" else k): v for k, v in cfg.items()}
        sub = parser.commands[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
        if args.command != "bench":
            for key in ("M", "t", "T"):
                if getattr(args, key) is not None:
                    setattr(args, key, int(getattr(args, key)))
        if args.threads < 1:
            raise UsageError("--threads must be positive")
        out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
        try:
            return args.func(args, out)
        finally:
            if args.out:
                out.close()
    except (UsageError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    sys.exit(main())
