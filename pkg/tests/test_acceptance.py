"""End-to-end acceptance checks, one test per criterion.

Each test records every sub-check through the ``criterion`` fixture, so the
terminal summary shows one PASS/FAIL line per criterion with the measured
numbers underneath.  Tolerances are the published ones; nothing is relaxed.
"""
import csv
import io
import itertools
import math
import time
from contextlib import redirect_stdout

import numpy as np
import pytest

from oht.cli import main
from oht.core_stats import Distribution, Scoring, SequenceSet
from oht.exponents import (
    SimplexGrid,
    eta,
    omega,
    omega_sweep,
    renyi_half,
    sequentiality_gap_known,
    sequentiality_gap_unknown,
    theorem_bound,
    upsilon,
    upsilon_sweep,
)
from oht.fixed_tests import FixedIndex, Hypothesis, max_outliers, phi_fix_known, phi_li
from oht.sim_harness import OutlierTest, TrialSetup, estimate

BERN = Distribution.bernoulli
GRID = SimplexGrid(2, 400, 3)
TOL = 0.002


def cli_csv(*argv) -> list[dict]:
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(list(argv))
    assert code == 0, f"command {' '.join(argv)} exited {code}"
    return list(csv.DictReader(io.StringIO(buf.getvalue())))


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def combined_se(*ses: float) -> float:
    return math.sqrt(sum(s * s for s in ses))


@pytest.mark.criterion("exponent golden values (GJS, Bern(0.4)/Bern(0.9))")
def test_exponent_golden_values(criterion):
    pn, pa = BERN(0.4), BERN(0.9)
    _, t_triple = timed(eta, pa, pn, "gjs", GRID)
    criterion.check(t_triple < 60, f"triple-variable exponent runtime {t_triple:.2f}s < 60s")
    _, t_pair = timed(omega, pn, pa, 0.06, "gjs", GRID)
    criterion.check(t_pair < 5, f"pair exponent runtime {t_pair:.2f}s < 5s")

    targets = [
        ("Thm1_mis", {}, 0.107),
        ("Thm3_penalty", {"lambda1": 0.08}, 0.0823),
        ("Thm2_mis", {"lambda1": 0.06, "lambda2": 0.08}, 0.0827),
        ("Thm4_mis", {"lambda1": 0.06, "lambda2": 0.08}, 0.0807),
    ]
    for kind, lams, want in targets:
        b = theorem_bound(kind, pn, pa, "gjs", grid=GRID, **lams)
        criterion.check(abs(b.value - want) <= TOL, f"{kind} = {b.value:.5f}, target {want} +/- {TOL}")
    criterion.conclude()


@pytest.mark.criterion("Omega at zero threshold equals the Renyi-1/2 closed form")
def test_omega_zero_closed_form(criterion):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        a, b = rng.uniform(0.02, 0.98, 2)
        got = omega(BERN(a), BERN(b), 0.0, "gjs", GRID).value
        worst = max(worst, abs(got - renyi_half(BERN(a), BERN(b))))
    elapsed = time.perf_counter() - t0
    criterion.check(worst <= 1e-4, f"max |Omega - closed form| = {worst:.2e} over 20 pairs")
    criterion.check(elapsed < 30, f"runtime {elapsed:.1f}s < 30s")
    criterion.conclude()


@pytest.mark.criterion("sequential-benefit and unknown-count penalty inequalities")
def test_inequality_suites(criterion):
    pn = BERN(0.5)
    slack = 0.004
    t0 = time.perf_counter()
    for a in (0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9):
        pa = BERN(a)
        fixed, seq = sequentiality_gap_known(pn, pa, "gjs", GRID)
        criterion.check(fixed <= seq + slack, f"a={a}: known count, fixed {fixed:.5f} <= sequential {seq:.5f}")
        fixed_u, seq_u = sequentiality_gap_unknown(pn, pa, "gjs", GRID)
        criterion.check(fixed_u <= seq_u + slack, f"a={a}: unknown count, fixed {fixed_u:.5f} <= sequential {seq_u:.5f}")
        known = theorem_bound("Thm1_mis", pn, pa, "gjs", grid=GRID).value
        unknown = theorem_bound("Thm3_penalty", pn, pa, "gjs", lambda1=0.08, grid=GRID).value
        criterion.check(unknown <= known + slack, f"a={a}: unknown-count {unknown:.5f} <= known-count {known:.5f}")
    elapsed = time.perf_counter() - t0
    criterion.check(elapsed < 600, f"runtime {elapsed:.0f}s < 600s")
    criterion.conclude()


@pytest.mark.criterion("Upsilon under GJS is at least its threshold")
def test_upsilon_gjs_lower_bound(criterion):
    p = BERN(0.2)
    lams = np.linspace(0, 2 * math.log(2), 22)[1:-1]
    for lam in lams:
        r = upsilon(p, float(lam), "gjs", GRID)
        criterion.check(r.value >= lam - TOL, f"lambda={lam:.4f}: Upsilon = {r.value:.5f}")
    criterion.conclude()


@pytest.mark.criterion("threshold monotonicity of Omega and Upsilon")
def test_threshold_monotonicity(criterion):
    pn, pa = BERN(0.4), BERN(0.9)
    om = [v.value for v in omega_sweep(pn, pa, np.linspace(0.0, 0.3, 10), "gjs", GRID)]
    up = [v.value for v in upsilon_sweep(pn, np.linspace(0.01, 1.3, 10), "gjs", GRID)]
    criterion.check(all(a >= b for a, b in zip(om, om[1:])), "Omega non-increasing: " + " ".join(f"{v:.5f}" for v in om))
    criterion.check(all(a <= b for a, b in zip(up, up[1:])), "Upsilon non-decreasing: " + " ".join(f"{v:.5f}" for v in up))
    criterion.conclude()


@pytest.mark.criterion("top-t selection equals exhaustive search; exhaustive baseline finds the zero subset")
def test_selection_equivalence(criterion):
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    mismatches = 0
    for trial in range(1000):
        m = int(rng.integers(3, 9))
        t = int(rng.integers(1, min(3, max_outliers(m)) + 1))
        f = Scoring.GJS if trial % 2 else Scoring.KL
        types = rng.dirichlet(np.ones(3), size=m)
        l = int(rng.integers(m))
        rep = phi_fix_known(types, t, f, FixedIndex(l))
        order = np.argsort(-f(types, types[l]), kind="stable")
        s = f(types, types[order[math.ceil(m / 2) - 1]])
        best = max(itertools.combinations(range(m), t), key=lambda b: s[list(b)].sum())
        if set(rep.decision.outliers) != set(best) and not np.isclose(
            s[list(rep.decision.outliers)].sum(), s[list(best)].sum(), rtol=0, atol=1e-12
        ):
            mismatches += 1
    criterion.check(mismatches == 0, f"{mismatches} mismatches in 1000 random type inputs")

    wrong = 0
    for trial in range(50):
        m = int(rng.integers(4, 11))
        t = int(rng.integers(1, max_outliers(m) + 1))
        outliers = sorted(rng.choice(m, t, replace=False).tolist())
        rows = [[1, 1, 1, 0] if i in outliers else [0, 0, 0, 1] for i in range(m)]
        if phi_li(SequenceSet.from_lists(rows, 2), t).outliers != tuple(outliers):
            wrong += 1
    criterion.check(wrong == 0, f"exhaustive baseline missed the zero subset {wrong}/50 times")
    elapsed = time.perf_counter() - t0
    criterion.check(elapsed < 60, f"runtime {elapsed:.1f}s < 60s")
    criterion.conclude()


@pytest.mark.criterion("desk-scale figure orderings")
def test_figure_orderings(criterion):
    t0 = time.perf_counter()
    rows = cli_csv("figure", "comp_li", "--trials", "10000")
    fast = {int(r["n"]): r for r in rows if r["series"] == "fix-known"}
    slow = {int(r["n"]): r for r in rows if r["series"] == "li"}
    for n in sorted(fast):
        a, b = fast[n], slow[n]
        gap = abs(float(a["p_mis"]) - float(b["p_mis"]))
        se = combined_se(float(a["se_mis"]), float(b["se_mis"]))
        criterion.check(gap <= 3 * se, f"known count n={n}: p_mis {a['p_mis']} vs exhaustive {b['p_mis']} (gap {gap:.4f}, 3 SE {3 * se:.4f})")
        ratio = int(a["median_ns"]) / int(b["median_ns"])
        criterion.check(ratio <= 0.25, f"known count n={n}: runtime ratio {ratio:.3f} <= 0.25")

    for name, metric, se_col in (("low_compare", "p_mis", "se_mis"), ("low_compare_unknown", "p_bayes", "se_bayes")):
        rows = cli_csv("figure", name, "--trials", "1000")
        seq = [r for r in rows if r["series"] == "sequential"]
        fix = [r for r in rows if r["series"] == "fixed"]
        for s, f in zip(seq, fix):
            ps, pf = float(s[metric]), float(f[metric])
            se = combined_se(float(s[se_col]), float(f[se_col]))
            criterion.check(
                ps <= pf + 2 * se,
                f"{name} budget {f['n']}: sequential {metric} {ps:.4f} <= fixed {pf:.4f} + 2 SE ({2 * se:.4f})",
            )
            criterion.check(float(s["capped_fraction"]) < 0.01, f"{name} budget {f['n']}: capped fraction {s['capped_fraction']} < 0.01")
    elapsed = time.perf_counter() - t0
    criterion.check(elapsed < 1800, f"runtime {elapsed:.0f}s < 1800s")
    criterion.conclude()


@pytest.mark.criterion("low-complexity known-count test is consistent")
def test_consistency_smoke(criterion):
    test = OutlierTest("fix-known", t=3)
    truth = Hypothesis.outlier_set(range(3))
    res = []
    for n in (100, 200, 400, 800):
        r = estimate(test, TrialSetup(10, truth, BERN(0.32), BERN(0.25), fixed_n=n, trials=10_000))
        res.append((n, r.p_mis, r.se_mis))
    for (n0, p0, s0), (n1, p1, s1) in zip(res, res[1:]):
        criterion.check(p1 <= p0 + 2 * combined_se(s0, s1), f"p_mis n={n0}: {p0:.4f} -> n={n1}: {p1:.4f}")
    criterion.check(res[-1][1] < res[0][1], "overall decrease from n=100 to n=800")
    criterion.conclude()


@pytest.mark.criterion("byte-identical CSV across thread counts")
def test_determinism_across_threads(criterion, tmp_path):
    commands = {
        "simulate-fixed": ["simulate", "--test", "fix-unknown", "--M", "10", "--outliers", "3", "--lambda", "0.001",
                           "--pn", "0.23", "--pa", "0.3", "--n", "100,200", "--trials", "300", "--seed", "5"],
        "simulate-sequential": ["simulate", "--test", "seq-known", "--M", "20", "--t", "2", "--pn", "0.32", "--pa", "0.25",
                                "--lambda1", "0.001", "--lambda2", "0.003", "--nmin", "100,200", "--trials", "100", "--seed", "9"],
        "exponent": ["exponent", "--kind", "thm1,thm4", "--pn", "0.4", "--pa", "0.9", "--lambda1", "0.06", "--lambda2", "0.08"],
    }
    for label, argv in commands.items():
        outputs = []
        for threads in (1, 2, 4):
            path = tmp_path / f"{label}-{threads}.csv"
            assert main([*argv, "--threads", str(threads), "--out", str(path)]) == 0
            outputs.append(path.read_bytes())
        criterion.check(len(set(outputs)) == 1, f"{label}: identical for threads 1, 2, 4")
    criterion.conclude()


@pytest.mark.criterion("GJS scoring beats KL somewhere on the fixed-length exponent")
def test_gjs_over_kl(criterion):
    rows = cli_csv("figure", "kl_vs_gjs")
    by_a: dict[str, dict[str, float]] = {}
    for r in rows:
        by_a.setdefault(r["sweep_param"], {})[r["series"]] = float(r["value"])
    gaps = {a: v["gjs"] - v["kl"] for a, v in by_a.items()}
    best = max(gaps, key=gaps.get)
    criterion.check(len(by_a) == 54, f"{len(by_a)} grid points in 0.01..0.55")
    criterion.check(gaps[best] > 0.004, f"largest GJS - KL gap {gaps[best]:.5f} at a={best}")
    criterion.conclude()
