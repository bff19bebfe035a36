"""Large-deviations exponent functions and the bounds built from them.

Every exponent is a minimum of a sum of KL divergences ``D(Q_k || P_k)`` over
a product of simplices, subject to one constraint on the scoring function:

* ``eta(P1, P2)``:      min over (Q1,Q2,Q3), f(Q1,Q2) <= f(Q3,Q2), refs (P1,P2,P2)
* ``gamma_exp(P1, P2)``: min over (Q1,Q2,Q3), f(Q1,Q3) <= f(Q1,Q2), refs (P1,P1,P2)
* ``omega(P1, P2, lam)``: min over (Q1,Q2),  f(Q1,Q2) <= lam,       refs (P1,P2)
* ``upsilon(P, lam)``:   min over (Q1,Q2),  f(Q1,Q2) >= lam,       refs (P,P)

The minimisation is an exhaustive scan of the ``1/r`` lattice followed by
rounds of local refinement around the incumbent, each shrinking the lattice
spacing by 4x.  Triple exponents fix the shared variable and solve the
remaining two-variable problem exactly on the lattice with a sort and a
running minimum, so a scan costs ``O(L^2 log L)`` for ``L`` lattice points.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core_stats import Distribution, Scoring, kl_array
from .errors import CapacityError, InvalidInputError

REFINE_FACTOR = 4
# lattice points allowed in a coarse scan; larger alphabets get a coarser lattice
PAIR_LATTICE_BUDGET = 3000
TRIPLE_LATTICE_BUDGET = 3000
MAX_ALPHABET_PAIR = 6
MAX_ALPHABET_TRIPLE = 4


@dataclass(frozen=True)
class SimplexGrid:
    alphabet_size: int = 2
    resolution: int = 400
    refine_rounds: int = 3
    window: int = 8  # refinement half-width in fine steps (two coarse cells)

    def __post_init__(self) -> None:
        if self.alphabet_size < 2 or self.resolution < 1 or self.refine_rounds < 0:
            raise InvalidInputError(f"invalid grid {self}")


@dataclass
class ExponentValue:
    value: float
    minimizers: tuple[np.ndarray, ...]
    resolution_used: float
    feasible: bool
    lipschitz: float = math.nan

    def __float__(self) -> float:
        return float(self.value)


@dataclass
class TheoremBound:
    kind: str
    value: float
    components: dict[str, float] = field(default_factory=dict)
    combine: str = "min"
    resolution: float = math.nan  # coarsest final lattice spacing among the components
    infeasible: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# lattices


def lattice_size(alphabet_size: int, r: int) -> int:
    return math.comb(r + alphabet_size - 1, alphabet_size - 1)


def lattice(alphabet_size: int, r: int) -> np.ndarray:
    """All integer vectors of length ``alphabet_size`` summing to ``r``, lexicographic."""
    if alphabet_size == 1:
        return np.array([[r]], dtype=np.int64)
    parts = []
    for first in range(r + 1):
        rest = lattice(alphabet_size - 1, r - first)
        parts.append(np.column_stack([np.full(rest.shape[0], first, dtype=np.int64), rest]))
    return np.concatenate(parts)


def _coarse_resolution(alphabet_size: int, r: int, budget: int) -> int:
    while r > 1 and lattice_size(alphabet_size, r) > budget:
        r -= 1
    return r


def _offsets(alphabet_size: int, w: int) -> np.ndarray:
    rng = range(-w, w + 1)
    rows = []
    for head in itertools.product(rng, repeat=alphabet_size - 1):
        last = -sum(head)
        if abs(last) <= w:
            rows.append((*head, last))
    return np.asarray(rows, dtype=np.int64)


def _neighbourhood(center: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    pts = center[None, :] + offsets
    pts = pts[(pts >= 0).all(axis=1)]
    return pts[np.lexsort(pts.T[::-1])]


# ---------------------------------------------------------------------------
# scans on explicit candidate sets


def _pair_scan(cx, cy, wx, wy, feasible: Callable, chunk: int = 512):
    """Best ``wx[i] + wy[j]`` over ``feasible(cx[i], cy[j])``; first in row-major order on ties."""
    best, arg = np.inf, None
    for s in range(0, cx.shape[0], chunk):
        ok = feasible(cx[s : s + chunk, None, :], cy[None, :, :])
        v = np.where(ok, wx[s : s + chunk, None] + wy[None, :], np.inf)
        k = int(np.argmin(v))
        if v.flat[k] < best:
            best = float(v.flat[k])
            arg = (s + k // v.shape[1], k % v.shape[1])
    return best, arg


def _split_scan(co, cx, cy, wo, wx, wy, lhs: Callable, rhs: Callable, slack: float):
    """Best ``wo[o] + wx[i] + wy[j]`` subject to ``lhs(o, x_i) <= rhs(o, y_j) + slack``.

    For each outer point the admissible ``x`` for a given ``y`` form a prefix
    of the ``x`` sorted by ``lhs``, so a running minimum answers every ``y``
    at once.
    """
    best, arg = np.inf, None
    for o in range(co.shape[0]):
        if not np.isfinite(wo[o]) or wo[o] >= best:
            continue
        a = lhs(co[o], cx)
        b = rhs(co[o], cy)
        order = np.argsort(a, kind="stable")
        a_sorted = a[order]
        w_sorted = wx[order]
        run = np.minimum.accumulate(w_sorted)
        pos = np.searchsorted(a_sorted, b + slack, side="right") - 1
        ok = pos >= 0
        if not ok.any():
            continue
        tot = np.where(ok, run[np.maximum(pos, 0)] + wy, np.inf)
        j = int(np.argmin(tot))
        if wo[o] + tot[j] < best:
            best = float(wo[o] + tot[j])
            # recover the x achieving the running minimum within the admissible prefix
            prefix = w_sorted[: pos[j] + 1]
            arg = (o, int(order[int(np.argmin(prefix))]), j)
    return best, arg


# ---------------------------------------------------------------------------
# generic problem driver


@dataclass
class _Problem:
    refs: tuple[np.ndarray, ...]
    # scan(cands, slack) -> (value, index tuple); cands[k] are probability vectors
    scan: Callable
    budget: int


def _weights(cand: np.ndarray, ref: np.ndarray) -> np.ndarray:
    return kl_array(cand, ref[None, :])


def _lipschitz(points: tuple[np.ndarray, ...], refs: tuple[np.ndarray, ...]) -> float:
    total = 0.0
    for q, p in zip(points, refs):
        supp = q > 0
        with np.errstate(divide="ignore"):
            lr = np.log(q[supp]) - np.log(p[supp])
        if not np.all(np.isfinite(lr)):
            return math.inf
        total += float(lr.max() - lr.min())
    return total


def _solve(problem: _Problem, grid: SimplexGrid) -> ExponentValue:
    x = problem.refs[0].size
    nvar = len(problem.refs)
    r = _coarse_resolution(x, grid.resolution, problem.budget)
    base = lattice(x, r)
    cand_int = [base] * nvar

    def run(cands_int, res):
        cands = [c / res for c in cands_int]
        val, arg = problem.scan(cands, 0.0)
        seed = arg
        if arg is None:
            _, seed = problem.scan(cands, 1.0 / res)
        return val, arg, seed

    val, arg, seed = run(cand_int, r)
    best_val = val
    best_pts = tuple(cand_int[k][arg[k]] / r for k in range(nvar)) if arg is not None else None
    res = r
    offs = _offsets(x, grid.window)
    for _ in range(grid.refine_rounds):
        if seed is None:
            break
        centers = [cand_int[k][seed[k]] * REFINE_FACTOR for k in range(nvar)]
        res *= REFINE_FACTOR
        cand_int = [_neighbourhood(c, offs) for c in centers]
        val, arg, seed = run(cand_int, res)
        if arg is not None and val <= best_val:
            best_val = val
            best_pts = tuple(cand_int[k][arg[k]] / res for k in range(nvar))
    if best_pts is None:
        return ExponentValue(math.inf, (), 1.0 / res, False)
    value = max(best_val, 0.0)
    return ExponentValue(value, best_pts, 1.0 / res, True, _lipschitz(best_pts, problem.refs))


def _exact_zero(*refs: np.ndarray) -> ExponentValue:
    """All variables at their references: objective 0 and, here, feasible."""
    return ExponentValue(0.0, tuple(r.copy() for r in refs), 0.0, True, 0.0)


# ---------------------------------------------------------------------------
# exponent functions


def _probs(d) -> np.ndarray:
    return d.probs if isinstance(d, Distribution) else Distribution(d).probs


def _grid_for(p: np.ndarray, grid: Optional[SimplexGrid]) -> SimplexGrid:
    if grid is None:
        return SimplexGrid(alphabet_size=p.size)
    if grid.alphabet_size != p.size:
        return SimplexGrid(p.size, grid.resolution, grid.refine_rounds, grid.window)
    return grid


def _check_alphabet(p1: np.ndarray, p2: np.ndarray, limit: int, what: str) -> None:
    if p1.shape != p2.shape:
        raise InvalidInputError("distributions live on different alphabets")
    if p1.size > limit:
        raise CapacityError(f"{what} exponents support alphabets up to {limit} symbols, got {p1.size}")


def eta(P1, P2, f: Scoring | str = Scoring.GJS, grid: Optional[SimplexGrid] = None) -> ExponentValue:
    """min D(Q1||P1)+D(Q2||P2)+D(Q3||P2) subject to f(Q1,Q2) <= f(Q3,Q2)."""
    f = Scoring.parse(f)
    p1, p2 = _probs(P1), _probs(P2)
    _check_alphabet(p1, p2, MAX_ALPHABET_TRIPLE, "triple-variable")

    def scan(c, slack):
        q1, q2, q3 = c
        val, arg = _split_scan(
            q2, q1, q3, _weights(q2, p2), _weights(q1, p1), _weights(q3, p2),
            lambda o, xs: f(xs, o[None, :]), lambda o, ys: f(ys, o[None, :]), slack,
        )
        return val, None if arg is None else (arg[1], arg[0], arg[2])

    if np.array_equal(p1, p2):
        return _exact_zero(p1, p2, p2)
    return _solve(_Problem((p1, p2, p2), scan, TRIPLE_LATTICE_BUDGET), _grid_for(p1, grid))


def gamma_exp(P1, P2, f: Scoring | str = Scoring.GJS, grid: Optional[SimplexGrid] = None) -> ExponentValue:
    """min D(Q1||P1)+D(Q2||P1)+D(Q3||P2) subject to f(Q1,Q3) <= f(Q1,Q2)."""
    f = Scoring.parse(f)
    p1, p2 = _probs(P1), _probs(P2)
    _check_alphabet(p1, p2, MAX_ALPHABET_TRIPLE, "triple-variable")

    def scan(c, slack):
        q1, q2, q3 = c
        val, arg = _split_scan(
            q1, q3, q2, _weights(q1, p1), _weights(q3, p2), _weights(q2, p1),
            lambda o, xs: f(o[None, :], xs), lambda o, ys: f(o[None, :], ys), slack,
        )
        return val, None if arg is None else (arg[0], arg[2], arg[1])

    if np.array_equal(p1, p2):
        return _exact_zero(p1, p1, p2)
    return _solve(_Problem((p1, p1, p2), scan, TRIPLE_LATTICE_BUDGET), _grid_for(p1, grid))


def omega(P1, P2, lam: float, f: Scoring | str = Scoring.GJS, grid: Optional[SimplexGrid] = None) -> ExponentValue:
    """min D(Q1||P1)+D(Q2||P2) subject to f(Q1,Q2) <= lam."""
    f = Scoring.parse(f)
    p1, p2 = _probs(P1), _probs(P2)
    _check_alphabet(p1, p2, MAX_ALPHABET_PAIR, "pair")
    if lam < 0:
        raise InvalidInputError("lambda must be non-negative")

    def scan(c, slack):
        q1, q2 = c
        return _pair_scan(q1, q2, _weights(q1, p1), _weights(q2, p2), lambda a, b: f(a, b) <= lam + slack)

    if np.array_equal(p1, p2):
        return _exact_zero(p1, p2)
    return _solve(_Problem((p1, p2), scan, PAIR_LATTICE_BUDGET), _grid_for(p1, grid))


def upsilon(P, lam: float, f: Scoring | str = Scoring.GJS, grid: Optional[SimplexGrid] = None) -> ExponentValue:
    """min D(Q1||P)+D(Q2||P) subject to f(Q1,Q2) >= lam; infeasible beyond the attainable maximum."""
    f = Scoring.parse(f)
    p = _probs(P)
    _check_alphabet(p, p, MAX_ALPHABET_PAIR, "pair")
    if lam < 0:
        raise InvalidInputError("lambda must be non-negative")

    def scan(c, slack):
        q1, q2 = c
        return _pair_scan(q1, q2, _weights(q1, p), _weights(q2, p), lambda a, b: f(a, b) >= lam - slack)

    if lam == 0:
        return _exact_zero(p, p)
    return _solve(_Problem((p, p), scan, PAIR_LATTICE_BUDGET), _grid_for(p, grid))


def renyi_half(P1, P2) -> float:
    """-2 log sum sqrt(P1 P2): the value of min_Q D(Q||P1) + D(Q||P2)."""
    p1, p2 = _probs(P1), _probs(P2)
    if p1.shape != p2.shape:
        raise InvalidInputError("distributions live on different alphabets")
    bc = float(np.sqrt(p1 * p2).sum())
    return math.inf if bc == 0.0 else max(-2.0 * math.log(bc), 0.0)


# ---------------------------------------------------------------------------
# sweeps with cross-checked minimisers


def _sweep(values: list[ExponentValue], lams, check: Callable, weights: Callable):
    """Let every lambda reuse any other lambda's minimiser that is feasible for it.

    Each candidate's feasibility is re-checked under the target lambda, so the
    sweep stays a set of honest feasible values while becoming monotone
    whenever the feasible sets are nested.
    """
    out = []
    for i, lam in enumerate(lams):
        cur = values[i]
        for v in values:
            if not v.feasible or not check(v.minimizers, lam):
                continue
            val = weights(v.minimizers)
            if val < cur.value or not cur.feasible:
                cur = ExponentValue(val, v.minimizers, cur.resolution_used, True, v.lipschitz)
        out.append(cur)
    return out


def omega_sweep(P1, P2, lams, f: Scoring | str = Scoring.GJS, grid: Optional[SimplexGrid] = None):
    f = Scoring.parse(f)
    p1, p2 = _probs(P1), _probs(P2)
    vals = [omega(p1, p2, lam, f, grid) for lam in lams]
    return _sweep(
        vals, lams,
        lambda q, lam: float(f(q[0], q[1])) <= lam,
        lambda q: float(kl_array(q[0], p1) + kl_array(q[1], p2))
    )


def upsilon_sweep(P, lams, f: Scoring | str = Scoring.GJS, grid: Optional[SimplexGrid] = None):
    f = Scoring.parse(f)
    p = _probs(P)
    vals = [upsilon(p, lam, f, grid) for lam in lams]
    return _sweep(
        vals, lams,
        lambda q, lam: float(f(q[0], q[1])) >= lam,
        lambda q: float(kl_array(q[0], p) + kl_array(q[1], p))
    )


# ---------------------------------------------------------------------------
# theorem bounds

THEOREM_KINDS = (
    "Thm1_mis", "Thm2_mis", "Thm3_mis", "Thm3_fr", "Thm3_fa",
    "Thm4_mis", "Thm4_fr", "Thm4_fa", "Thm3_penalty",
)


def _components(kind: str, pn, pa, f, lam1, lam2, grid) -> tuple[str, list[tuple[str, Callable]]]:
    e = lambda a, b: lambda: eta(a, b, f, grid)
    g = lambda a, b: lambda: gamma_exp(a, b, f, grid)
    o = lambda a, b, lam: lambda: omega(a, b, lam, f, grid)
    u = lambda a, lam: lambda: upsilon(a, lam, f, grid)
    table = {
        "Thm1_mis": ("min", [("eta_AN", e(pa, pn)), ("eta_NA", e(pn, pa))]),
        "Thm2_mis": ("min", [("Omega_NA_l1", o(pn, pa, lam1)), ("Upsilon_N_l2", u(pn, lam2))]),
        "Thm3_mis": ("min", [("eta_NA", e(pn, pa)), ("eta_AN", e(pa, pn)),
                             ("gamma_AN", g(pa, pn)), ("gamma_NA", g(pn, pa))]),
        "Thm3_fr": ("max", [("Omega_AN_l", o(pa, pn, lam1)), ("Omega_NA_l", o(pn, pa, lam1))]),
        "Thm3_fa": ("min", [("Upsilon_N_l", u(pn, lam1))]),
        "Thm3_penalty": ("min", [("eta_AN", e(pa, pn)), ("eta_NA", e(pn, pa)),
                                 ("gamma_AN", g(pa, pn)), ("gamma_NA", g(pn, pa)),
                                 ("Omega_AN_l", o(pa, pn, lam1)), ("Omega_NA_l", o(pn, pa, lam1))]),
        "Thm4_mis": ("min", [("Omega_NA_l1", o(pn, pa, lam1)), ("Omega_AN_l1", o(pa, pn, lam1)),
                             ("Upsilon_N_l2", u(pn, lam2)), ("Upsilon_A_l2", u(pa, lam2))]),
        "Thm4_fr": ("max", [("Omega_AN_l1", o(pa, pn, lam1)), ("Omega_NA_l1", o(pn, pa, lam1))]),
        "Thm4_fa": ("min", [("Upsilon_N_l2", u(pn, lam2))]),
    }
    if kind not in table:
        raise InvalidInputError(f"unknown bound kind {kind!r}; choose from {THEOREM_KINDS}")
    return table[kind]


_NEEDS = {
    "Thm2_mis": (True, True), "Thm3_fr": (True, False), "Thm3_fa": (True, False),
    "Thm3_penalty": (True, False), "Thm4_mis": (True, True), "Thm4_fr": (True, False),
    "Thm4_fa": (False, True),
}


def theorem_bound(
    kind: str,
    P_N,
    P_A,
    f: Scoring | str = Scoring.GJS,
    lambda1: Optional[float] = None,
    lambda2: Optional[float] = None,
    grid: Optional[SimplexGrid] = None,
) -> TheoremBound:
    """Compose exponent functions into one of the achievability bounds.

    The Thm3 kinds take their single threshold through ``lambda1``.
    """
    f = Scoring.parse(f)
    pn, pa = _probs(P_N), _probs(P_A)
    need1, need2 = _NEEDS.get(kind, (False, False))
    if (need1 and lambda1 is None) or (need2 and lambda2 is None):
        raise InvalidInputError(f"{kind} needs lambda1{' and lambda2' if need2 else ''}")
    if lambda1 is not None and lambda2 is not None and lambda1 > lambda2:
        raise InvalidInputError("need lambda1 <= lambda2")
    combine, comps = _components(kind, pn, pa, f, lambda1, lambda2, grid)
    results = {name: fn() for name, fn in comps}
    values = {name: float(v.value) for name, v in results.items()}
    agg = min if combine == "min" else max
    return TheoremBound(
        kind,
        agg(values.values()),
        values,
        combine,
        resolution=max(v.resolution_used for v in results.values()),
        infeasible=tuple(name for name, v in results.items() if not v.feasible),
    )


def sequentiality_gap_known(P_N, P_A, f: Scoring | str = Scoring.GJS, grid: Optional[SimplexGrid] = None):
    """(fixed-length bound, best sequential bound) with lambda1 -> 0, lambda2 -> f(P_A, P_N)."""
    f = Scoring.parse(f)
    pn, pa = _probs(P_N), _probs(P_A)
    fixed = min(eta(pa, pn, f, grid).value, eta(pn, pa, f, grid).value)
    lam = float(f(pa, pn))
    seq = min(omega(pa, pn, 0.0, f, grid).value, upsilon(pn, lam, f, grid).value)
    return fixed, seq


def sequentiality_gap_unknown(P_N, P_A, f: Scoring | str = Scoring.GJS, grid: Optional[SimplexGrid] = None):
    """(fixed-length misclassification bound, sequential bound at the limiting thresholds)."""
    f = Scoring.parse(f)
    pn, pa = _probs(P_N), _probs(P_A)
    fixed = min(
        eta(pa, pn, f, grid).value, eta(pn, pa, f, grid).value,
        gamma_exp(pa, pn, f, grid).value, gamma_exp(pn, pa, f, grid).value,
    )
    lam = float(f(pa, pn))
    seq = min(
        omega(pa, pn, 0.0, f, grid).value, upsilon(pn, lam, f, grid).value,
        omega(pn, pa, 0.0, f, grid).value, upsilon(pa, lam, f, grid).value,
    )
    return fixed, seq
