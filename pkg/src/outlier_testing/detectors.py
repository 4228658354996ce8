"""Test statistics and decision rules for outlier coordinate identification.

Every statistic is a deterministic function of the per-coordinate
empirical distributions (gamma_1, ..., gamma_M).  Hypotheses name either
a single outlier coordinate, a subset of outlier coordinates, or the
null (no outlier).  Coordinates are numbered 1..M in hypothesis labels.

Tie-breaking is deterministic: the earliest hypothesis in family order
wins, where families are ordered by outlier-set size and then
lexicographically.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Optional, Union

import numpy as np

from .errors import ValidationError
from .simplex import Pmf, TypeVector, kl, mixture

# ---------------------------------------------------------------------------
# Hypothesis identifiers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Coordinate:
    """Hypothesis: coordinate `index` (1-based) is the single outlier."""

    index: int

    def __post_init__(self):
        if self.index < 1:
            raise ValidationError("coordinate index is 1-based and must be >= 1")

    def __str__(self):
        return f"coordinate {self.index}"


@dataclass(frozen=True)
class Subset:
    """Hypothesis: the coordinates in `members` (1-based) are the outliers."""

    members: tuple[int, ...]

    def __post_init__(self):
        m = tuple(sorted(self.members))
        if not m or len(set(m)) != len(m) or m[0] < 1:
            raise ValidationError("subset must be a nonempty set of 1-based coordinates")
        object.__setattr__(self, "members", m)

    def __str__(self):
        return "subset {" + ",".join(map(str, self.members)) + "}"


class _NullHypothesis:
    """Hypothesis: no outlier is present."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NULL"

    def __str__(self):
        return "null"


NULL = _NullHypothesis()

HypothesisId = Union[Coordinate, Subset, _NullHypothesis]


def outlier_set(h: HypothesisId) -> frozenset[int]:
    """The set of outlier coordinates named by a hypothesis."""
    if h is NULL:
        return frozenset()
    if isinstance(h, Coordinate):
        return frozenset((h.index,))
    return frozenset(h.members)


@dataclass(frozen=True)
class HypothesisFamily:
    """An ordered collection of candidate hypotheses.

    For each outlier count k the family must contain either every
    size-k subset of {1..M} or none of them, and every non-null member
    must satisfy |S| < M/2.  Ordering is size-ascending, then
    lexicographic, with the null hypothesis (if present) first.
    """

    hypotheses: tuple[HypothesisId, ...]
    m: int

    def __post_init__(self):
        if not self.hypotheses:
            raise ValidationError("hypothesis family is empty")
        seen_sizes: dict[int, set[frozenset[int]]] = {}
        for h in self.hypotheses:
            s = outlier_set(h)
            if s and max(s) > self.m:
                raise ValidationError(f"{h} names a coordinate beyond M={self.m}")
            if s and len(s) >= self.m / 2:
                raise ValidationError(f"{h} has |S| >= M/2 (M={self.m})")
            seen_sizes.setdefault(len(s), set()).add(s)
        for size, subsets in seen_sizes.items():
            if size == 0:
                continue
            expected = math.comb(self.m, size)
            if len(subsets) != expected:
                raise ValidationError(
                    f"family holds {len(subsets)} of {expected} size-{size} subsets; "
                    "each size must be all-or-none"
                )
        ordered = tuple(sorted(self.hypotheses, key=_family_key))
        object.__setattr__(self, "hypotheses", ordered)

    @property
    def include_null(self) -> bool:
        return any(h is NULL for h in self.hypotheses)

    def index_of(self, h: HypothesisId) -> int:
        key = outlier_set(h)
        for i, cand in enumerate(self.hypotheses):
            if outlier_set(cand) == key and (cand is NULL) == (h is NULL):
                return i
        raise ValidationError(f"{h} is not in the family")

    @classmethod
    def single_outlier(cls, m: int, include_null: bool = False) -> "HypothesisFamily":
        hyps: list[HypothesisId] = [Coordinate(i) for i in range(1, m + 1)]
        if include_null:
            hyps.append(NULL)
        return cls(tuple(hyps), m)

    @classmethod
    def fixed_size(cls, m: int, t: int) -> "HypothesisFamily":
        if not 1 < t < m / 2:
            raise ValidationError(f"need 1 < T < M/2, got T={t}, M={m}")
        return cls(tuple(Subset(s) for s in combinations(range(1, m + 1), t)), m)

    @classmethod
    def sized(cls, m: int, sizes, include_null: bool = False) -> "HypothesisFamily":
        hyps: list[HypothesisId] = []
        if include_null:
            hyps.append(NULL)
        for k in sorted(set(sizes)):
            hyps.extend(Subset(s) for s in combinations(range(1, m + 1), k))
        return cls(tuple(hyps), m)


def _family_key(h: HypothesisId):
    s = outlier_set(h)
    return (len(s), tuple(sorted(s)))


# ---------------------------------------------------------------------------
# Observations
# ---------------------------------------------------------------------------


class ObservationMatrix:
    """M coordinates by n samples of integer symbols in {0..K-1}."""

    def __init__(self, data, k: int):
        a = np.asarray(data, dtype=np.int64)
        if a.ndim != 2:
            raise ValidationError("observation data must be a 2-D array")
        m, n = a.shape
        if m < 3:
            raise ValidationError(f"need M >= 3 coordinates, got {m}")
        if n < 1:
            raise ValidationError("need at least one sample per coordinate")
        if k < 2:
            raise ValidationError("alphabet size K must be >= 2")
        if np.any(a < 0) or np.any(a >= k):
            raise ValidationError(f"symbols must lie in 0..{k - 1}")
        a = a.copy()
        a.setflags(write=False)
        self.data = a
        self.k = k
        self._types = tuple(
            TypeVector(np.bincount(a[i], minlength=k)) for i in range(m)
        )
        self._pmfs = tuple(t.to_pmf() for t in self._types)

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def row_types(self) -> tuple[TypeVector, ...]:
        return self._types

    @property
    def row_pmfs(self) -> tuple[Pmf, ...]:
        return self._pmfs

    # -- serialization ------------------------------------------------------

    def to_csv(self, path) -> None:
        np.savetxt(path, self.data, fmt="%d", delimiter=",")

    @classmethod
    def from_csv(cls, path, k: Optional[int] = None) -> "ObservationMatrix":
        try:
            a = np.loadtxt(path, dtype=np.int64, delimiter=",", ndmin=2)
        except (ValueError, OSError) as exc:
            raise ValidationError(f"cannot read observation CSV: {exc}") from exc
        if k is None:
            k = int(a.max()) + 1 if a.size else 0
            k = max(k, 2)
        return cls(a, k)

    _BIN_MAGIC = b"OBSM"

    def to_binary(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self._BIN_MAGIC)
            fh.write(struct.pack("<III", self.m, self.n, self.k))
            fh.write(self.data.astype(np.uint8).tobytes())

    @classmethod
    def from_binary(cls, path) -> "ObservationMatrix":
        with open(path, "rb") as fh:
            blob = fh.read()
        if len(blob) < 16 or blob[:4] != cls._BIN_MAGIC:
            raise ValidationError("not an observation binary file")
        m, n, k = struct.unpack("<III", blob[4:16])
        body = np.frombuffer(blob[16:], dtype=np.uint8)
        if body.size != m * n:
            raise ValidationError("observation binary payload has wrong length")
        return cls(body.reshape(m, n).astype(np.int64), k)


# ---------------------------------------------------------------------------
# Score tables and decisions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScoreTable:
    """Per-hypothesis test statistics, in family order (smaller is better)."""

    entries: tuple[tuple[HypothesisId, float], ...]

    def __post_init__(self):
        if not self.entries:
            raise ValidationError("empty score table")
        for _, v in self.entries:
            if not math.isfinite(v):
                raise ValidationError("scores must be finite")

    @property
    def scores(self) -> np.ndarray:
        return np.array([v for _, v in self.entries])

    @property
    def hypotheses(self) -> tuple[HypothesisId, ...]:
        return tuple(h for h, _ in self.entries)

    def spread(self) -> float:
        s = self.scores
        return float(s.max() - s.min())


def decide(table: ScoreTable) -> HypothesisId:
    """The hypothesis with the smallest score; ties go to the earliest entry."""
    scores = table.scores
    return table.entries[int(np.argmin(scores))][0]


def default_lambda(m: int, n: int, k: int) -> float:
    """Vanishing threshold 2(M-1) K ln(n+1)/n for the null-aware rules."""
    if m < 3 or n < 1 or k < 2:
        raise ValidationError("need M >= 3, n >= 1, K >= 2")
    return 2.0 * (m - 1) * k * math.log(n + 1) / n


def decide_null_aware(table: ScoreTable, lam: float) -> HypothesisId:
    """Pick the argmin hypothesis when the score spread exceeds lam, else NULL."""
    if lam < 0:
        raise ValidationError("lambda must be >= 0")
    if table.spread() > lam:
        return decide(table)
    return NULL


# ---------------------------------------------------------------------------
# Score statistics
# ---------------------------------------------------------------------------


def _check_law(obs: ObservationMatrix, law: Pmf, name: str) -> None:
    if law.size != obs.k:
        raise ValidationError(f"{name} has alphabet size {law.size}, observations have K={obs.k}")
    if not law.full_support():
        raise ValidationError(f"{name} must have full support")


def score_single_ml(obs: ObservationMatrix, mu: Pmf, pi: Pmf) -> ScoreTable:
    """Scores D(gamma_i||mu) + sum_{j!=i} D(gamma_j||pi) when both laws are known."""
    _check_law(obs, mu, "mu")
    _check_law(obs, pi, "pi")
    gammas = obs.row_pmfs
    d_mu = [kl(g, mu) for g in gammas]
    d_pi = [kl(g, pi) for g in gammas]
    total = sum(d_pi)
    return ScoreTable(tuple(
        (Coordinate(i + 1), d_mu[i] + total - d_pi[i]) for i in range(obs.m)
    ))


def score_single_typ(obs: ObservationMatrix, pi: Pmf) -> ScoreTable:
    """Scores sum_{j!=i} D(gamma_j||pi) when only the typical law is known."""
    _check_law(obs, pi, "pi")
    d_pi = [kl(g, pi) for g in obs.row_pmfs]
    total = sum(d_pi)
    return ScoreTable(tuple(
        (Coordinate(i + 1), total - d_pi[i]) for i in range(obs.m)
    ))


def score_single_univ(obs: ObservationMatrix) -> ScoreTable:
    """Fully universal scores: each leave-one-out row against the leave-one-out mean.

    The mixture dominates every summand, so the statistics are always finite.
    """
    gammas = obs.row_pmfs
    m = obs.m
    entries = []
    for i in range(m):
        others = [gammas[j] for j in range(m) if j != i]
        mix = mixture(others, np.full(m - 1, 1.0 / (m - 1)))
        entries.append((Coordinate(i + 1), sum(kl(g, mix) for g in others)))
    return ScoreTable(tuple(entries))


def score_single_mu_only(obs: ObservationMatrix, mu: Pmf) -> ScoreTable:
    """Scores D(gamma_i||mu) when only the outlier law is known."""
    _check_law(obs, mu, "mu")
    return ScoreTable(tuple(
        (Coordinate(i + 1), kl(g, mu)) for i, g in enumerate(obs.row_pmfs)
    ))


def score_multi_typ(obs: ObservationMatrix, pi: Pmf, t: int) -> ScoreTable:
    """Known-pi scores sum_{j not in S} D(gamma_j||pi) over all size-t subsets."""
    _check_law(obs, pi, "pi")
    if not 1 < t < obs.m / 2:
        raise ValidationError(f"need 1 < T < M/2, got T={t}, M={obs.m}")
    d_pi = [kl(g, pi) for g in obs.row_pmfs]
    total = sum(d_pi)
    entries = []
    for s in combinations(range(1, obs.m + 1), t):
        entries.append((Subset(s), total - sum(d_pi[i - 1] for i in s)))
    return ScoreTable(tuple(entries))


def score_multi_univ(obs: ObservationMatrix, t: int) -> ScoreTable:
    """Fully universal multi-outlier scores over all size-t subsets."""
    if not 1 < t < obs.m / 2:
        raise ValidationError(f"need 1 < T < M/2, got T={t}, M={obs.m}")
    gammas = obs.row_pmfs
    entries = []
    for s in combinations(range(1, obs.m + 1), t):
        out = set(s)
        rest = [gammas[j - 1] for j in range(1, obs.m + 1) if j not in out]
        mix = mixture(rest, np.full(len(rest), 1.0 / len(rest)))
        entries.append((Subset(s), sum(kl(g, mix) for g in rest)))
    return ScoreTable(tuple(entries))


def score_identical_univ(obs: ObservationMatrix, family: HypothesisFamily) -> ScoreTable:
    """Identical-outlier scores: within-subset plus outside-subset dispersion.

    The family may mix outlier-set sizes but must exclude the null
    hypothesis (the statistic for an empty set is undefined).
    """
    if family.m != obs.m:
        raise ValidationError("family and observations disagree on M")
    if family.include_null:
        raise ValidationError("identical-outlier scores are defined for non-null hypotheses only")
    gammas = obs.row_pmfs
    entries = []
    for h in family.hypotheses:
        s = sorted(outlier_set(h))
        inside = [gammas[i - 1] for i in s]
        outside = [gammas[j - 1] for j in range(1, obs.m + 1) if j not in set(s)]
        val = 0.0
        if len(inside) > 1:
            mix_in = mixture(inside, np.full(len(inside), 1.0 / len(inside)))
            val += sum(kl(g, mix_in) for g in inside)
        mix_out = mixture(outside, np.full(len(outside), 1.0 / len(outside)))
        val += sum(kl(g, mix_out) for g in outside)
        entries.append((h, val))
    return ScoreTable(tuple(entries))


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


class DetectorKind(str, Enum):
    ML_SINGLE = "ml-single"
    TYP_SINGLE = "typ-single"
    UNIV_SINGLE = "univ-single"
    MU_ONLY = "mu-only"
    NULL_SINGLE = "null-single"
    TYP_MULTI = "typ-multi"
    UNIV_MULTI = "univ-multi"
    IDENTICAL_UNIV = "identical-univ"
    NULL_IDENTICAL = "null-identical"


def score_table(
    kind: DetectorKind,
    obs: ObservationMatrix,
    *,
    mu: Optional[Pmf] = None,
    pi: Optional[Pmf] = None,
    t: Optional[int] = None,
    family: Optional[HypothesisFamily] = None,
) -> ScoreTable:
    """Compute the score table for any detector kind."""
    kind = DetectorKind(kind)
    if kind is DetectorKind.ML_SINGLE:
        _require(mu is not None and pi is not None, "ml-single needs mu and pi")
        return score_single_ml(obs, mu, pi)
    if kind is DetectorKind.TYP_SINGLE:
        _require(pi is not None, "typ-single needs pi")
        return score_single_typ(obs, pi)
    if kind in (DetectorKind.UNIV_SINGLE, DetectorKind.NULL_SINGLE):
        return score_single_univ(obs)
    if kind is DetectorKind.MU_ONLY:
        _require(mu is not None, "mu-only needs mu")
        return score_single_mu_only(obs, mu)
    if kind is DetectorKind.TYP_MULTI:
        _require(pi is not None and t is not None, "typ-multi needs pi and T")
        return score_multi_typ(obs, pi, t)
    if kind is DetectorKind.UNIV_MULTI:
        _require(t is not None, "univ-multi needs T")
        return score_multi_univ(obs, t)
    if kind in (DetectorKind.IDENTICAL_UNIV, DetectorKind.NULL_IDENTICAL):
        _require(family is not None, "identical-outlier detectors need a hypothesis family")
        return score_identical_univ(obs, family)
    raise ValidationError(f"unknown detector kind {kind!r}")


def run_detector(
    kind: DetectorKind,
    obs: ObservationMatrix,
    *,
    mu: Optional[Pmf] = None,
    pi: Optional[Pmf] = None,
    t: Optional[int] = None,
    family: Optional[HypothesisFamily] = None,
    lam: Optional[float] = None,
) -> HypothesisId:
    """Score and decide in one step; null-aware kinds use the lambda threshold."""
    kind = DetectorKind(kind)
    table = score_table(kind, obs, mu=mu, pi=pi, t=t, family=family)
    if kind in (DetectorKind.NULL_SINGLE, DetectorKind.NULL_IDENTICAL):
        if lam is None:
            lam = default_lambda(obs.m, obs.n, obs.k)
        return decide_null_aware(table, lam)
    return decide(table)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)
