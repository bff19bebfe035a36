"""Finite-alphabet probability primitives.

Distributions, empirical types, the two pairwise scoring functions (KL and
GJS divergence) and the clustering scores used by the exhaustive-search
baselines.  Natural logarithms throughout; ``+inf`` is a legitimate score.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.special import rel_entr

from .errors import CapacityError, InvalidInputError

PROB_ATOL = 1e-12
DEFAULT_ENUM_CAP = 10**7


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector over the dense alphabet ``0..alphabet_size-1``."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.array(self.probs, dtype=np.float64).reshape(-1)
        if p.size < 2:
            raise InvalidInputError("alphabet must contain at least two symbols")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidInputError(f"probabilities must be finite and non-negative: {p}")
        if abs(p.sum() - 1.0) > PROB_ATOL:
            raise InvalidInputError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def bernoulli(cls, p: float) -> "Distribution":
        """Bern(p): probability ``p`` on symbol 1."""
        if not 0.0 <= p <= 1.0:
            raise InvalidInputError(f"Bernoulli parameter {p} outside [0, 1]")
        return cls(np.array([1.0 - p, p]))

    @property
    def alphabet_size(self) -> int:
        return int(self.probs.size)

    def isclose(self, other: "Distribution", atol: float = PROB_ATOL) -> bool:
        return self.alphabet_size == other.alphabet_size and bool(
            np.all(np.abs(self.probs - other.probs) <= atol)
        )

    def __repr__(self) -> str:
        return f"Distribution({np.array2string(self.probs, precision=6)})"


@dataclass(frozen=True, eq=False)
class EmpiricalType:
    """Symbol counts of one observed sequence."""

    counts: np.ndarray
    length: int

    def __post_init__(self) -> None:
        c = np.array(self.counts, dtype=np.int64).reshape(-1)
        if np.any(c < 0):
            raise InvalidInputError("counts must be non-negative")
        if self.length <= 0 or int(c.sum()) != self.length:
            raise InvalidInputError(f"counts sum to {int(c.sum())}, expected length {self.length}")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def freq(self) -> np.ndarray:
        return self.counts / self.length

    def distribution(self) -> Distribution:
        return Distribution(self.freq)


class Scoring(str, enum.Enum):
    """Pairwise scoring function f(P, Q)."""

    KL = "kl"
    GJS = "gjs"

    def __call__(self, p, q) -> np.ndarray:
        """Vectorised f over the last axis; broadcasts like numpy."""
        # plain string compare: enum member lookup is slow on hot paths
        if self._value_ == "kl":
            return kl_array(p, q)
        return gjs_array(p, q)

    @classmethod
    def parse(cls, value: "Scoring | str") -> "Scoring":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidInputError(f"unknown scoring function {value!r}") from None


# ---------------------------------------------------------------------------
# divergences


def kl_array(p, q) -> np.ndarray:
    """D(p||q) along the last axis, with 0 log(0/q) = 0 and +inf on support violations."""
    return rel_entr(p, q).sum(axis=-1)


def gjs_array(p, q) -> np.ndarray:
    """GJS(p, q) = D(p||m) + D(q||m) with m = (p+q)/2, along the last axis."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    # mixture formed once so that swapping the arguments is bit-identical
    m = (p + q) / 2.0
    return (rel_entr(p, m) + rel_entr(q, m)).sum(axis=-1)


def _as_probs(d) -> np.ndarray:
    if isinstance(d, Distribution):
        return d.probs
    if isinstance(d, EmpiricalType):
        return d.freq
    return Distribution(d).probs


def _check_pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    a, b = _as_probs(p), _as_probs(q)
    if a.shape != b.shape:
        raise InvalidInputError(f"alphabet mismatch: {a.size} vs {b.size}")
    return a, b


def kl_div(p, q) -> float:
    """KL divergence D(P||Q) in nats."""
    a, b = _check_pair(p, q)
    return float(kl_array(a, b))


def gjs_div(p, q) -> float:
    """Generalised Jensen-Shannon divergence GJS(P, Q, 1) in nats."""
    a, b = _check_pair(p, q)
    return float(gjs_array(a, b))


def score(f: Scoring | str, p, q) -> float:
    a, b = _check_pair(p, q)
    return float(Scoring.parse(f)(a, b))


# ---------------------------------------------------------------------------
# sequences and types


@dataclass(frozen=True, eq=False)
class SequenceSet:
    """M observed sequences of common length, stored as an ``(M, n)`` int array."""

    data: np.ndarray
    alphabet_size: int

    def __post_init__(self) -> None:
        x = np.asarray(self.data)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise InvalidInputError("sequence set must be a non-empty M x n array")
        if not np.issubdtype(x.dtype, np.integer):
            raise InvalidInputError("symbols must be integers")
        if self.alphabet_size < 2:
            raise InvalidInputError("alphabet_size must be at least 2")
        if x.min() < 0 or x.max() >= self.alphabet_size:
            raise InvalidInputError(f"symbols must lie in [0, {self.alphabet_size})")
        object.__setattr__(self, "data", x)

    @classmethod
    def from_lists(cls, seqs: Sequence[Sequence[int]], alphabet_size: int) -> "SequenceSet":
        lengths = {len(s) for s in seqs}
        if len(lengths) != 1:
            raise InvalidInputError(f"sequences have differing lengths {sorted(lengths)}")
        return cls(np.asarray(seqs, dtype=np.int64), alphabet_size)

    @property
    def M(self) -> int:
        return int(self.data.shape[0])

    @property
    def common_length(self) -> int:
        return int(self.data.shape[1])

    def counts(self) -> np.ndarray:
        return count_matrix(self.data, self.alphabet_size)

    def freqs(self) -> np.ndarray:
        return self.counts() / self.common_length

    def types(self) -> list[EmpiricalType]:
        n = self.common_length
        return [EmpiricalType(c, n) for c in self.counts()]


def count_matrix(data: np.ndarray, alphabet_size: int) -> np.ndarray:
    """Per-row symbol counts of an ``(M, n)`` symbol array, shape ``(M, alphabet_size)``."""
    data = np.asarray(data, dtype=np.int64)
    if alphabet_size == 2:
        out = np.empty((data.shape[0], 2), dtype=np.int64)
        data.sum(axis=1, out=out[:, 1])
        np.subtract(data.shape[1], out[:, 1], out=out[:, 0])
        return out
    m = data.shape[0]
    offsets = (np.arange(m, dtype=np.int64) * alphabet_size)[:, None]
    flat = np.bincount((data + offsets).ravel(), minlength=m * alphabet_size)
    return flat.reshape(m, alphabet_size)


def empirical_type(seq: Sequence[int], alphabet_size: int) -> EmpiricalType:
    x = np.asarray(seq)
    if x.ndim != 1 or x.size == 0:
        raise InvalidInputError("sequence must be a non-empty list of symbols")
    if not np.issubdtype(x.dtype, np.integer) or x.min() < 0 or x.max() >= alphabet_size:
        raise InvalidInputError(f"symbols must be integers in [0, {alphabet_size})")
    return EmpiricalType(np.bincount(x, minlength=alphabet_size), int(x.size))


def as_counts(types) -> tuple[np.ndarray, int]:
    """Normalise a list of EmpiricalType / a SequenceSet into (counts, common length)."""
    if isinstance(types, SequenceSet):
        return types.counts(), types.common_length
    types = list(types)
    if not types or not all(isinstance(t, EmpiricalType) for t in types):
        raise InvalidInputError("expected a non-empty list of EmpiricalType")
    lengths = {t.length for t in types}
    if len(lengths) != 1:
        raise InvalidInputError("all types must come from sequences of a common length")
    return np.stack([t.counts for t in types]), lengths.pop()


# ---------------------------------------------------------------------------
# clustering scores over index subsets


def _group_divergence(counts: np.ndarray, n: int, members: np.ndarray) -> np.ndarray:
    """Sum over ``j`` in each group of D(T_j || group mean), exact zero on identical members.

    ``members`` is a boolean mask of shape ``(K, M)``; ``counts`` is ``(M, X)``.
    Works on integer counts so that the ratio T_j / mean is exactly 1 when all
    members share one type.
    """
    members = np.asarray(members, dtype=bool)
    size = members.sum(axis=1)  # (K,)
    pooled = members.astype(np.int64) @ counts  # (K, X)
    c = counts[None, :, :].astype(np.float64)  # (1, M, X)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = c * size[:, None, None] / pooled[:, None, :]
        terms = np.where(c > 0, c * np.log(ratio), 0.0)
    per_seq = terms.sum(axis=2) / n  # (K, M)
    return np.where(members, per_seq, 0.0).sum(axis=1)


def _subset_mask(subsets: np.ndarray, m: int) -> np.ndarray:
    mask = np.zeros((subsets.shape[0], m), dtype=bool)
    rows = np.repeat(np.arange(subsets.shape[0]), subsets.shape[1])
    mask[rows, subsets.ravel()] = True
    return mask


def _validate_subset(b: Iterable[int], m: int) -> np.ndarray:
    idx = np.array(sorted(set(int(i) for i in b)), dtype=np.int64)
    if idx.size == 0 or idx.size >= m:
        raise InvalidInputError("outlier set must be non-empty and proper")
    if idx[0] < 0 or idx[-1] >= m:
        raise InvalidInputError(f"indices must lie in [0, {m})")
    return idx


def li_scores(counts: np.ndarray, n: int, subsets: np.ndarray) -> np.ndarray:
    """G_Li for each row of ``subsets`` (shape ``(K, t)``)."""
    mask = _subset_mask(subsets, counts.shape[0])
    return _group_divergence(counts, n, ~mask)


def sb_scores(counts: np.ndarray, n: int, subsets: np.ndarray) -> np.ndarray:
    """S_B for each row of ``subsets``: within-set plus within-complement divergence."""
    mask = _subset_mask(subsets, counts.shape[0])
    return _group_divergence(counts, n, mask) + _group_divergence(counts, n, ~mask)


def g_li_score(types, b: Iterable[int]) -> float:
    """Li et al. clustering score: divergence of the non-outlier types from their mean."""
    counts, n = as_counts(types)
    idx = _validate_subset(b, counts.shape[0])
    return float(li_scores(counts, n, idx[None, :])[0])


def s_b_score(types, b: Iterable[int]) -> float:
    """Two-group clustering score S_B used by the Zhou and Diao baselines."""
    counts, n = as_counts(types)
    idx = _validate_subset(b, counts.shape[0])
    return float(sb_scores(counts, n, idx[None, :])[0])


# ---------------------------------------------------------------------------
# subset enumeration


def n_subsets(m: int, sizes: Iterable[int]) -> int:
    from math import comb

    return sum(comb(m, s) for s in sizes)


def iter_subset_chunks(
    m: int, sizes: Iterable[int], chunk: int = 4096, cap: int = DEFAULT_ENUM_CAP
) -> Iterator[np.ndarray]:
    """Yield ``(K, t)`` arrays of subsets: by size, then lexicographic within a size."""
    sizes = list(sizes)
    total = n_subsets(m, sizes)
    if total > cap:
        raise CapacityError(f"{total} candidate subsets exceeds the enumeration cap {cap}")
    for s in sizes:
        it = itertools.combinations(range(m), s)
        while True:
            block = list(itertools.islice(it, chunk))
            if not block:
                break
            yield np.asarray(block, dtype=np.int64).reshape(len(block), s)
