"""Exact error probabilities by enumerating per-coordinate type classes.

Because every detector is a function of the per-coordinate empirical
distributions alone, the exact finite-sample error probability is a sum
over M-tuples of types, weighted by exact type-class probabilities.
This replaces asymptotic claims with ground-truth finite-n numbers.

Enumeration is chunked and fully vectorized; probabilities accumulate in
log space.  A separate full-sequence brute force (all K^(Mn) raw
sequences, run through the actual detector implementations) serves as an
independent cross-check at tiny sizes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import gammaln, logsumexp, rel_entr, xlogy

from .detectors import (
    NULL,
    Coordinate,
    DetectorKind,
    HypothesisFamily,
    HypothesisId,
    ObservationMatrix,
    default_lambda,
    outlier_set,
    run_detector,
)
from .errors import EnumerationCapError, ValidationError
from .simplex import Pmf, TypeVector, entropy, kl

DEFAULT_TUPLE_CAP = 10**8

LawSpec = Union[Pmf, Sequence[Pmf], None]


# ---------------------------------------------------------------------------
# Type classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TypeClassTable:
    """All compositions of n into K parts, with log multinomial multiplicities."""

    n: int
    k: int
    counts: np.ndarray  # (T, K) integers
    log_multiplicity: np.ndarray  # (T,)

    @property
    def size(self) -> int:
        return self.counts.shape[0]

    def pmfs(self) -> np.ndarray:
        return self.counts / self.n


def enumerate_types(n: int, k: int, cap: int = DEFAULT_TUPLE_CAP) -> TypeClassTable:
    """Enumerate the C(n+K-1, K-1) empirical types of length-n sequences."""
    if n < 1 or k < 2:
        raise ValidationError("need n >= 1 and K >= 2")
    total = math.comb(n + k - 1, k - 1)
    if total > cap:
        raise EnumerationCapError(f"{total} types exceeds cap {cap}")
    rows = np.empty((total, k), dtype=np.int64)
    idx = 0

    def fill(prefix: list[int], remaining: int, slots: int):
        nonlocal idx
        if slots == 1:
            rows[idx, : len(prefix)] = prefix
            rows[idx, -1] = remaining
            idx += 1
            return
        for c in range(remaining, -1, -1):
            fill(prefix + [c], remaining - c, slots - 1)

    fill([], n, k)
    log_mult = gammaln(n + 1) - gammaln(rows + 1).sum(axis=1)
    return TypeClassTable(n, k, rows, log_mult)


def type_log_prob(t: TypeVector, p: Pmf) -> float:
    """Exact log probability that an i.i.d. p-sequence lands in t's type class."""
    if t.counts.size != p.size:
        raise ValidationError("type and pmf alphabets differ")
    with np.errstate(divide="ignore"):
        terms = np.where(t.counts > 0, t.counts * np.log(p.probs), 0.0)
    if np.any(np.isneginf(terms)):
        raise ValidationError("type puts mass outside the support of p")
    log_mult = float(gammaln(t.n + 1) - gammaln(t.counts + 1).sum())
    return log_mult + float(terms.sum())


def type_log_prob_via_divergence(t: TypeVector, p: Pmf) -> float:
    """The same quantity via the exponent identity -n (D(gamma||p) + H(gamma))."""
    gamma = t.to_pmf()
    log_mult = float(gammaln(t.n + 1) - gammaln(t.counts + 1).sum())
    return log_mult - t.n * (kl(gamma, p) + entropy(gamma))


# ---------------------------------------------------------------------------
# Laws per coordinate
# ---------------------------------------------------------------------------


def coordinate_laws(truth: HypothesisId, m: int, mus: LawSpec, pi: Pmf) -> list[Pmf]:
    """The generating law of each coordinate under a truth hypothesis.

    ``mus`` is a single pmf (identically distributed outliers), a
    sequence of M per-coordinate outlier laws, or None when the truth is
    the null hypothesis.
    """
    outliers = outlier_set(truth)
    if outliers and max(outliers) > m:
        raise ValidationError("truth names a coordinate beyond M")
    laws = []
    for i in range(1, m + 1):
        if i in outliers:
            if mus is None:
                raise ValidationError("outlier truth requires outlier laws")
            laws.append(mus if isinstance(mus, Pmf) else mus[i - 1])
        else:
            laws.append(pi)
    return laws


# ---------------------------------------------------------------------------
# Vectorized score tables over tuples of types
# ---------------------------------------------------------------------------


def _entropies(p: np.ndarray) -> np.ndarray:
    return -xlogy(p, p).sum(axis=-1)


def _kl_rows(p: np.ndarray, ref: np.ndarray) -> np.ndarray:
    vals = rel_entr(p, ref[None, :]).sum(axis=1)
    if np.any(np.isinf(vals)):
        raise ValidationError("type outside the support of a reference law")
    return vals


def _batch_scores(
    kind: DetectorKind,
    tidx: np.ndarray,
    table: TypeClassTable,
    m: int,
    family: HypothesisFamily,
    mu: Optional[Pmf],
    pi: Optional[Pmf],
    t: Optional[int],
) -> np.ndarray:
    """Scores (batch, H) for each non-null family hypothesis, in family order.

    Uses the entropy identity sum_j D(gamma_j||mix) =
    |J| H(mix) - sum_j H(gamma_j), a deliberately different route from
    the per-observation detector implementations.
    """
    tp = table.pmfs()
    ent = _entropies(tp)
    batch = tidx.shape[0]
    hyps = [h for h in family.hypotheses if h is not NULL]

    if kind is DetectorKind.ML_SINGLE:
        d_mu = _kl_rows(tp, mu.probs)
        d_pi = _kl_rows(tp, pi.probs)
        per = d_pi[tidx]
        total = per.sum(axis=1)
        return d_mu[tidx] - per + total[:, None]

    if kind is DetectorKind.TYP_SINGLE:
        d_pi = _kl_rows(tp, pi.probs)
        per = d_pi[tidx]
        return per.sum(axis=1)[:, None] - per

    if kind is DetectorKind.MU_ONLY:
        return _kl_rows(tp, mu.probs)[tidx]

    if kind in (DetectorKind.UNIV_SINGLE, DetectorKind.NULL_SINGLE):
        rows = tp[tidx]  # (batch, M, K)
        ent_rows = ent[tidx]
        total_pmf = rows.sum(axis=1)
        total_ent = ent_rows.sum(axis=1)
        out = np.empty((batch, m))
        for i in range(m):
            mix = (total_pmf - rows[:, i, :]) / (m - 1)
            out[:, i] = (m - 1) * _entropies(mix) - (total_ent - ent_rows[:, i])
        return out

    if kind is DetectorKind.TYP_MULTI:
        d_pi = _kl_rows(tp, pi.probs)
        per = d_pi[tidx]
        total = per.sum(axis=1)
        out = np.empty((batch, len(hyps)))
        for col, h in enumerate(hyps):
            inside = [i - 1 for i in sorted(outlier_set(h))]
            out[:, col] = total - per[:, inside].sum(axis=1)
        return out

    if kind is DetectorKind.UNIV_MULTI:
        rows = tp[tidx]
        ent_rows = ent[tidx]
        total_pmf = rows.sum(axis=1)
        total_ent = ent_rows.sum(axis=1)
        out = np.empty((batch, len(hyps)))
        for col, h in enumerate(hyps):
            inside = [i - 1 for i in sorted(outlier_set(h))]
            n_out = m - len(inside)
            mix = (total_pmf - rows[:, inside, :].sum(axis=1)) / n_out
            out[:, col] = n_out * _entropies(mix) - (total_ent - ent_rows[:, inside].sum(axis=1))
        return out

    if kind in (DetectorKind.IDENTICAL_UNIV, DetectorKind.NULL_IDENTICAL):
        rows = tp[tidx]
        ent_rows = ent[tidx]
        total_pmf = rows.sum(axis=1)
        total_ent = ent_rows.sum(axis=1)
        out = np.empty((batch, len(hyps)))
        for col, h in enumerate(hyps):
            inside = [i - 1 for i in sorted(outlier_set(h))]
            n_in = len(inside)
            n_out = m - n_in
            in_pmf = rows[:, inside, :].sum(axis=1)
            in_ent = ent_rows[:, inside].sum(axis=1)
            score = n_in * _entropies(in_pmf / n_in) - in_ent
            score += n_out * _entropies((total_pmf - in_pmf) / n_out) - (total_ent - in_ent)
            out[:, col] = score
        return out

    raise ValidationError(f"unsupported detector kind {kind!r}")


# ---------------------------------------------------------------------------
# Exact error probabilities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorProbability:
    prob: float
    log_prob: float


def exact_error(
    kind: DetectorKind,
    family: HypothesisFamily,
    truth: HypothesisId,
    n: int,
    k: int,
    mus: LawSpec,
    pi: Pmf,
    *,
    mu: Optional[Pmf] = None,
    t: Optional[int] = None,
    lam: Optional[float] = None,
    cap: int = DEFAULT_TUPLE_CAP,
    chunk: int = 1 << 18,
) -> ErrorProbability:
    """Exact probability that the detector misses the truth hypothesis.

    ``mus``/``pi`` are the generating laws; ``mu`` is the detector-side
    outlier law for detectors that use one (defaults to ``mus`` when it
    is a single pmf).
    """
    kind = DetectorKind(kind)
    m = family.m
    truth_index = family.index_of(truth)  # also validates membership
    laws = coordinate_laws(truth, m, mus, pi)
    if mu is None and isinstance(mus, Pmf):
        mu = mus
    table = enumerate_types(n, k, cap=cap)
    n_types = table.size
    total_tuples = n_types**m
    if total_tuples > cap:
        raise EnumerationCapError(f"{total_tuples} type tuples exceeds cap {cap}")

    # per-coordinate log probability of each type under its generating law
    with np.errstate(divide="ignore", invalid="ignore"):
        log_laws = np.stack(
            [
                table.log_multiplicity
                + np.where(table.counts > 0, table.counts * np.log(law.probs)[None, :], 0.0).sum(
                    axis=1
                )
                for law in laws
            ]
        )
    if not np.all(np.isfinite(log_laws)):
        raise ValidationError("a generating law lacks support for some type")

    null_aware = kind in (DetectorKind.NULL_SINGLE, DetectorKind.NULL_IDENTICAL)
    if null_aware:
        if lam is None:
            lam = default_lambda(m, n, k)
        null_index = family.index_of(NULL)
        nonnull = np.array([i for i, h in enumerate(family.hypotheses) if h is not NULL])
    else:
        nonnull = np.arange(len(family.hypotheses))

    radix = n_types ** np.arange(m - 1, -1, -1, dtype=np.int64)
    pieces = []
    for start in range(0, total_tuples, chunk):
        flat = np.arange(start, min(start + chunk, total_tuples), dtype=np.int64)
        tidx = (flat[:, None] // radix[None, :]) % n_types
        scores = _batch_scores(kind, tidx, table, m, family, mu, pi, t)
        best = np.argmin(scores, axis=1)
        if null_aware:
            spread = scores.max(axis=1) - scores.min(axis=1)
            decision = np.where(spread > lam, nonnull[best], null_index)
        else:
            decision = nonnull[best]
        wrong = decision != truth_index
        if not np.any(wrong):
            continue
        logp = log_laws[np.arange(m)[None, :], tidx].sum(axis=1)
        pieces.append(logsumexp(logp[wrong]))
    if not pieces:
        return ErrorProbability(0.0, -math.inf)
    log_err = float(logsumexp(pieces))
    return ErrorProbability(min(math.exp(log_err), 1.0), log_err)


def max_error(
    kind: DetectorKind,
    family: HypothesisFamily,
    n: int,
    k: int,
    mus: LawSpec,
    pi: Pmf,
    **kwargs,
) -> tuple[ErrorProbability, dict[HypothesisId, ErrorProbability]]:
    """Worst-case error over all truth hypotheses in the family."""
    per: dict[HypothesisId, ErrorProbability] = {}
    for truth in family.hypotheses:
        per[truth] = exact_error(kind, family, truth, n, k, mus, pi, **kwargs)
    worst = max(per.values(), key=lambda e: e.log_prob)
    return worst, per


# ---------------------------------------------------------------------------
# Exponent regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentFit:
    """Fit of -ln(err) = slope*n + log_coeff*ln(n) + intercept."""

    slope: float
    log_coeff: float
    intercept: float
    residual: float


def exponent_fit(ns: Sequence[int], errs: Sequence[float]) -> ExponentFit:
    """Least-squares exponent estimate; the ln(n) term absorbs type-counting prefactors."""
    ns = np.asarray(ns, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if ns.size < 4 or ns.size != errs.size:
        raise ValidationError("need at least 4 (n, err) points")
    if np.any(errs <= 0) or np.any(errs >= 1):
        raise ValidationError("errors must lie strictly in (0, 1) for an exponent fit")
    y = -np.log(errs)
    design = np.column_stack([ns, np.log(ns), np.ones_like(ns)])
    coef, res, _, _ = np.linalg.lstsq(design, y, rcond=None)
    residual = float(np.sqrt(res[0])) if res.size else 0.0
    return ExponentFit(float(coef[0]), float(coef[1]), float(coef[2]), residual)


# ---------------------------------------------------------------------------
# Independent full-sequence brute force (tiny sizes only)
# ---------------------------------------------------------------------------


def brute_force_error(
    kind: DetectorKind,
    family: HypothesisFamily,
    truth: HypothesisId,
    n: int,
    k: int,
    mus: LawSpec,
    pi: Pmf,
    *,
    mu: Optional[Pmf] = None,
    t: Optional[int] = None,
    lam: Optional[float] = None,
    max_sequences: int = 2_000_000,
) -> float:
    """Sum over every raw observation matrix, run through the real detectors."""
    kind = DetectorKind(kind)
    m = family.m
    family.index_of(truth)
    laws = coordinate_laws(truth, m, mus, pi)
    if mu is None and isinstance(mus, Pmf):
        mu = mus
    if null := kind in (DetectorKind.NULL_SINGLE, DetectorKind.NULL_IDENTICAL):
        if lam is None:
            lam = default_lambda(m, n, k)
    total_seqs = k ** (m * n)
    if total_seqs > max_sequences:
        raise EnumerationCapError(f"{total_seqs} sequences exceeds brute-force cap")
    fam_for_detector = family
    prob = 0.0
    for seq in product(range(k), repeat=m * n):
        data = np.array(seq, dtype=np.int64).reshape(m, n)
        obs = ObservationMatrix(data, k)
        decision = run_detector(
            kind,
            obs,
            mu=mu,
            pi=pi,
            t=t,
            family=_family_without_null(fam_for_detector) if null else fam_for_detector,
            lam=lam,
        )
        if outlier_set(decision) != outlier_set(truth) or (decision is NULL) != (truth is NULL):
            p = 1.0
            for i, law in enumerate(laws):
                for y in data[i]:
                    p *= law.probs[y]
            prob += p
    return prob


def _family_without_null(family: HypothesisFamily) -> HypothesisFamily:
    hyps = tuple(h for h in family.hypotheses if h is not NULL)
    if len(hyps) == len(family.hypotheses):
        return family
    return HypothesisFamily(hyps, family.m)
