"""Seeded Monte Carlo estimation of error probabilities, stopping times and runtimes.

Every random draw is keyed by ``(base_seed, trial_index, sequence_index)``
through :class:`numpy.random.SeedSequence`, so a trial's data never depends on
which worker ran it or on how many trials ran before it.
"""
from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core_stats import DEFAULT_ENUM_CAP, Distribution, Scoring, SequenceSet
from .errors import InvalidInputError
from .fixed_tests import (
    Hypothesis,
    Seeded,
    max_outliers,
    phi_fix_known,
    phi_fix_unknown,
    phi_li,
    phi_zhou,
)
from .seq_tests import (
    ArrayStream,
    SeqTestConfig,
    phi_diao_known,
    phi_diao_unknown,
    phi_seq_known,
    phi_seq_unknown,
)

CAPPED_WARN_FRACTION = 0.01
WARMUP_TRIALS = 100
# spawn key reserved for a trial's test-internal randomness (sequence keys are 0..M-1)
_REFERENCE_KEY = 2**32


@dataclass(frozen=True)
class TrialSetup:
    M: int
    truth: Hypothesis
    P_N: Distribution
    P_A: Distribution
    fixed_n: Optional[int] = None
    seq_cfg: Optional[SeqTestConfig] = None
    trials: int = 1000
    base_seed: int = 0

    def __post_init__(self) -> None:
        if (self.fixed_n is None) == (self.seq_cfg is None):
            raise InvalidInputError("set exactly one of fixed_n and seq_cfg")
        if self.fixed_n is not None and self.fixed_n < 1:
            raise InvalidInputError("fixed_n must be positive")
        if self.trials < 1:
            raise InvalidInputError("trials must be positive")
        if self.M < 3:
            raise InvalidInputError("need at least three sequences")
        if self.P_N.alphabet_size != self.P_A.alphabet_size:
            raise InvalidInputError("P_N and P_A live on different alphabets")
        if self.base_seed < 0:
            raise InvalidInputError("base_seed must be non-negative")
        out = self.truth.outliers
        if out is not None and (len(out) > max_outliers(self.M) or out[-1] >= self.M):
            raise InvalidInputError(f"outlier set {out} invalid for M={self.M}")

    @property
    def sequential(self) -> bool:
        return self.seq_cfg is not None

    @property
    def alphabet_size(self) -> int:
        return self.P_N.alphabet_size


@dataclass
class EstimateResult:
    trials_run: int
    n_mis: int
    n_fr: int
    n_fa: int
    null_truth: bool
    mean_tau: float = math.nan
    se_tau: float = math.nan
    capped_fraction: float = 0.0
    reliability_warning: bool = False

    def _rate(self, count: int, populated: bool) -> tuple[float, float]:
        if not populated:
            return math.nan, math.nan
        p = count / self.trials_run
        return p, math.sqrt(p * (1 - p) / self.trials_run)

    @property
    def p_mis(self) -> float:
        return self._rate(self.n_mis, not self.null_truth)[0]

    @property
    def se_mis(self) -> float:
        return self._rate(self.n_mis, not self.null_truth)[1]

    @property
    def p_fr(self) -> float:
        return self._rate(self.n_fr, not self.null_truth)[0]

    @property
    def se_fr(self) -> float:
        return self._rate(self.n_fr, not self.null_truth)[1]

    @property
    def p_fa(self) -> float:
        return self._rate(self.n_fa, self.null_truth)[0]

    @property
    def se_fa(self) -> float:
        return self._rate(self.n_fa, self.null_truth)[1]

    @property
    def p_bayes(self) -> float:
        """Equal-weight Bayesian error p_mis + p_fr."""
        return self._rate(self.n_mis + self.n_fr, not self.null_truth)[0]

    @property
    def se_bayes(self) -> float:
        return self._rate(self.n_mis + self.n_fr, not self.null_truth)[1]


@dataclass(frozen=True)
class RuntimeStat:
    median_ns_per_trial: int
    p90_ns_per_trial: int
    trials_timed: int


# ---------------------------------------------------------------------------
# data generation


def _sequence_rng(base_seed: int, trial_index: int, seq_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([base_seed, trial_index, seq_index]))


def reference_seed(base_seed: int, trial_index: int) -> int:
    """Seed for a test's own randomness in a given trial."""
    ss = np.random.SeedSequence([base_seed, trial_index, _REFERENCE_KEY])
    return int(ss.generate_state(2, np.uint64)[0])


class IIDStream:
    """Lock-step i.i.d. symbol streams for one trial.

    Sequence ``i`` draws from ``P_A`` when ``i`` is an outlier and from ``P_N``
    otherwise, by inverse-CDF lookup of its own uniform stream.  The first
    ``n`` symbols therefore coincide with the fixed-length sample of size ``n``.
    """

    def __init__(self, setup: TrialSetup, trial_index: int):
        self.M = setup.M
        self.alphabet_size = setup.alphabet_size
        outliers = set(setup.truth.outliers or ())
        cdf_n = np.cumsum(setup.P_N.probs)
        cdf_a = np.cumsum(setup.P_A.probs)
        self._cdfs = [cdf_a if i in outliers else cdf_n for i in range(self.M)]
        self._rngs = [_sequence_rng(setup.base_seed, trial_index, i) for i in range(self.M)]

    def next_block(self, k: int) -> np.ndarray:
        out = np.empty((k, self.M), dtype=np.int64)
        top = self.alphabet_size - 1
        for i, (rng, cdf) in enumerate(zip(self._rngs, self._cdfs)):
            # clip guards against a cumulative sum landing a hair below 1
            out[:, i] = np.minimum(np.searchsorted(cdf, rng.random(k), side="right"), top)
        return out


class RecordingStream:
    """Pass-through stream that keeps every column it hands out."""

    def __init__(self, inner):
        self.inner = inner
        self.M = inner.M
        self.alphabet_size = inner.alphabet_size
        self.blocks: list[np.ndarray] = []

    def next_block(self, k: int) -> np.ndarray:
        b = self.inner.next_block(k)
        self.blocks.append(b)
        return b

    def replay(self) -> ArrayStream:
        data = np.concatenate(self.blocks, axis=0).T if self.blocks else np.zeros((self.M, 0), np.int64)
        return ArrayStream(data, self.alphabet_size)


def gen_sequences(setup: TrialSetup, trial_index: int):
    """The trial's data: a :class:`SequenceSet` in fixed mode, a stream otherwise."""
    stream = IIDStream(setup, trial_index)
    if setup.sequential:
        return stream
    return SequenceSet(stream.next_block(setup.fixed_n).T.copy(), setup.alphabet_size)


# ---------------------------------------------------------------------------
# tests as picklable values

FIXED_TESTS = ("fix-known", "fix-unknown", "li", "zhou")
SEQUENTIAL_TESTS = ("seq-known", "seq-unknown", "diao", "diao-u")
KNOWN_COUNT_TESTS = ("fix-known", "li", "seq-known", "diao")


@dataclass(frozen=True)
class OutlierTest:
    """A test name plus its parameters, runnable on one trial's data.

    ``t`` is the known outlier count, ``T`` the upper bound for the unknown-count
    exhaustive tests and ``lam`` the threshold of the fixed-length unknown-count
    tests.  Sequential thresholds come from the setup's :class:`SeqTestConfig`.
    """

    name: str
    t: Optional[int] = None
    T: Optional[int] = None
    lam: Optional[float] = None
    scoring: Scoring = Scoring.GJS
    cap: int = DEFAULT_ENUM_CAP

    def __post_init__(self) -> None:
        if self.name not in FIXED_TESTS + SEQUENTIAL_TESTS:
            raise InvalidInputError(f"unknown test {self.name!r}")
        object.__setattr__(self, "scoring", Scoring.parse(self.scoring))
        need = {
            "fix-known": "t", "li": "t", "seq-known": "t", "diao": "t",
            "zhou": "T", "diao-u": "T",
        }.get(self.name)
        if need and getattr(self, need) is None:
            raise InvalidInputError(f"test {self.name} needs {need}")
        if self.name in ("fix-unknown", "zhou") and self.lam is None:
            raise InvalidInputError(f"test {self.name} needs lam")

    @property
    def sequential(self) -> bool:
        return self.name in SEQUENTIAL_TESTS

    @property
    def known_count(self) -> bool:
        return self.name in KNOWN_COUNT_TESTS

    def run(self, data, seed: int, cfg: Optional[SeqTestConfig] = None):
        """Return ``(decision, stopping_time or None, capped)``."""
        f = self.scoring
        if not self.sequential:
            if self.name == "fix-known":
                return phi_fix_known(data, self.t, f, Seeded(seed)).decision, None, False
            if self.name == "fix-unknown":
                return phi_fix_unknown(data, self.lam, f, Seeded(seed)).decision, None, False
            if self.name == "li":
                return phi_li(data, self.t, self.cap), None, False
            return phi_zhou(data, self.T, self.lam, self.cap), None, False
        if self.name == "seq-known":
            rep = phi_seq_known(data, self.t, cfg, f, seed)
        elif self.name == "seq-unknown":
            rep = phi_seq_unknown(data, cfg, f, seed)
        elif self.name == "diao":
            rep = phi_diao_known(data, self.t, cfg.n_min, cfg.k_max, self.cap)
        else:
            rep = phi_diao_unknown(data, self.T, cfg.lambda1, cfg.lambda2, cfg.n_min, cfg.k_max, self.cap)
        return rep.decision, rep.stopping_time, rep.capped


def threshold_diagnostic(test: OutlierTest, setup: TrialSetup) -> Optional[str]:
    """Describe a violated validity condition ``lambda2 < min f(P_A,P_N), f(P_N,P_A)``, if any."""
    if setup.seq_cfg is None or test.name not in ("seq-known", "seq-unknown"):
        return None
    pn, pa = setup.P_N.probs, setup.P_A.probs
    limit = min(float(test.scoring(pa, pn)), float(test.scoring(pn, pa)))
    if setup.seq_cfg.lambda2 < limit:
        return None
    return f"lambda2={setup.seq_cfg.lambda2:g} is not below min f(P_A,P_N), f(P_N,P_A) = {limit:.6g}"


def _check_mode(test: OutlierTest, setup: TrialSetup) -> None:
    if test.sequential != setup.sequential:
        mode = "sequential" if setup.sequential else "fixed-length"
        raise InvalidInputError(f"test {test.name} does not run in {mode} mode")


# ---------------------------------------------------------------------------
# estimation

_MIS, _FR, _FA, _OK = 0, 1, 2, 3


def classify(decision: Hypothesis, truth: Hypothesis, known_count: bool) -> int:
    if truth.is_null:
        return _OK if decision.is_null else _FA
    if decision == truth:
        return _OK
    if decision.is_null and not known_count:
        return _FR
    return _MIS


def _run_range(test: OutlierTest, setup: TrialSetup, start: int, stop: int):
    codes = np.empty(stop - start, dtype=np.int8)
    taus = np.zeros(stop - start, dtype=np.int64)
    capped = np.zeros(stop - start, dtype=bool)
    for j, i in enumerate(range(start, stop)):
        data = gen_sequences(setup, i)
        decision, tau, cap = test.run(data, reference_seed(setup.base_seed, i), setup.seq_cfg)
        codes[j] = classify(decision, setup.truth, test.known_count)
        taus[j] = tau or 0
        capped[j] = cap
    return codes, taus, capped


def _split(trials: int, parts: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, trials, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def estimate(test: OutlierTest, setup: TrialSetup, threads: int = 1) -> EstimateResult:
    """Run ``setup.trials`` independent trials and aggregate outcome counts.

    With ``threads > 1`` trial ranges go to worker processes; results are
    stitched back in trial order, so the estimate does not depend on
    ``threads``.
    """
    _check_mode(test, setup)
    note = threshold_diagnostic(test, setup)
    if note:
        warnings.warn(note, stacklevel=2)
    if threads < 1:
        raise InvalidInputError("threads must be positive")
    ranges = _split(setup.trials, min(threads * 4, setup.trials) if threads > 1 else 1)
    if threads == 1:
        parts = [_run_range(test, setup, a, b) for a, b in ranges]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_run_range, test, setup, a, b) for a, b in ranges]
            parts = [fut.result() for fut in futures]
    codes = np.concatenate([p[0] for p in parts])
    taus = np.concatenate([p[1] for p in parts])
    capped = np.concatenate([p[2] for p in parts])
    n = codes.size
    res = EstimateResult(
        trials_run=n,
        n_mis=int((codes == _MIS).sum()),
        n_fr=int((codes == _FR).sum()),
        n_fa=int((codes == _FA).sum()),
        null_truth=setup.truth.is_null,
    )
    if setup.sequential:
        res.mean_tau = float(taus.mean())
        res.se_tau = float(taus.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        res.capped_fraction = float(capped.mean())
        res.reliability_warning = res.capped_fraction > CAPPED_WARN_FRACTION
    return res


def matched_fixed_n(seq_result: EstimateResult) -> int:
    """Fixed sample size matching a sequential run's average budget."""
    return max(1, int(round(seq_result.mean_tau)))


# ---------------------------------------------------------------------------
# runtime


def measure_runtime(test: OutlierTest, setup: TrialSetup, warmup: int = WARMUP_TRIALS) -> RuntimeStat:
    """Per-trial wall-clock cost of the decision alone, single-threaded.

    Data are generated before the clock starts; sequential tests are first run
    on a recording stream and then timed on a replay of exactly the columns
    they consumed.  The first ``warmup`` trials are discarded.
    """
    _check_mode(test, setup)
    samples = []
    for i in range(warmup + setup.trials):
        seed = reference_seed(setup.base_seed, i)
        data = gen_sequences(setup, i)
        if setup.sequential:
            rec = RecordingStream(data)
            test.run(rec, seed, setup.seq_cfg)
            data = rec.replay()
        t0 = time.perf_counter_ns()
        test.run(data, seed, setup.seq_cfg)
        elapsed = time.perf_counter_ns() - t0
        if i >= warmup:
            samples.append(elapsed)
    arr = np.asarray(samples)
    return RuntimeStat(int(np.median(arr)), int(np.percentile(arr, 90)), arr.size)
