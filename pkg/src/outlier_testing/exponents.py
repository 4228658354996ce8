"""Error-exponent formulas, bound optimizations, and their numerical solvers.

Closed forms cover the known-law settings.  The fully universal settings
require two kinds of optimization:

* a nonconvex program over an M-fold product of simplices with a
  difference-of-divergences constraint, attacked by a multistart
  quadratic-penalty method with projected gradient descent (certified
  for K=2 by an exhaustive grid oracle);
* a convex minimization of a Bhattacharyya objective over a relative
  entropy ball, solved by Frank-Wolfe: the linear subproblem over the
  ball is a one-dimensional exponential tilt found by bisection, and the
  strong convexity of the ball yields fast convergence of the duality gap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from scipy.special import rel_entr, xlogy

from .errors import SolverError, ValidationError
from .simplex import Pmf, bhattacharyya, chernoff_pair_product, geometric_midpoint, kl

FEASIBILITY_TOL = 1e-8
FW_GAP_TOL = 1e-8


@dataclass(frozen=True)
class ExponentResult:
    """Value of an exponent formula or optimization plus solver diagnostics."""

    value: float
    solver: str
    iterations: int = 0
    feasibility_gap: float = 0.0
    minimizer: Optional[tuple[Pmf, ...]] = None

    def __post_init__(self):
        if self.value < 0:
            raise ValidationError("exponent values are nonnegative")


@dataclass(frozen=True)
class KlBallSpec:
    """The constraint set {q : D(q||center) <= radius}."""

    center: Pmf
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValidationError("radius must be >= 0")
        if not self.center.full_support():
            raise ValidationError("ball center must have full support")


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for the multistart penalty solver."""

    restarts: int = 20
    penalty_rounds: int = 6
    penalty_start: float = 1.0
    penalty_growth: float = 10.0
    max_pg_iters: int = 400
    seed: int = 0


def _check_model(mu: Pmf, pi: Pmf) -> None:
    if mu.size != pi.size:
        raise ValidationError("mu and pi live on different alphabets")
    if not (mu.full_support() and pi.full_support()):
        raise ValidationError("laws must have full support")
    if np.allclose(mu.probs, pi.probs, atol=1e-15):
        raise ValidationError("mu must differ from pi")


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def exponent_both_known(mu: Pmf, pi: Pmf) -> ExponentResult:
    """Optimal single-outlier exponent with both laws known: twice the Bhattacharyya distance."""
    _check_model(mu, pi)
    return ExponentResult(2.0 * bhattacharyya(mu, pi), "closed_form")


def exponent_multi_known(mus: Sequence[Pmf], pi: Pmf) -> ExponentResult:
    """Optimal fixed-size multi-outlier exponent with all laws known.

    The minimum over coordinate pairs of the Chernoff information
    between the two swapped product laws on the squared alphabet.
    """
    mus = list(mus)
    if len(mus) < 2:
        raise ValidationError("need at least two outlier laws")
    for mu in mus:
        _check_model(mu, pi)
    best = min(
        chernoff_pair_product(mus[i], mus[j], pi)
        for i in range(len(mus))
        for j in range(len(mus))
        if i < j
    )
    return ExponentResult(best, "one_dim_search")


def exponent_multi_typ_known(mus: Sequence[Pmf], pi: Pmf) -> ExponentResult:
    """Fixed-size multi-outlier exponent achievable knowing only the typical law."""
    mus = list(mus)
    if not mus:
        raise ValidationError("need at least one outlier law")
    for mu in mus:
        _check_model(mu, pi)
    return ExponentResult(min(2.0 * bhattacharyya(mu, pi) for mu in mus), "closed_form")


# ---------------------------------------------------------------------------
# The nonconvex constrained program (fully universal settings)
# ---------------------------------------------------------------------------


def _project_rows_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    u = np.sort(v, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, v.shape[1] + 1)
    cond = u - css / idx > 0
    rho = cond.sum(axis=1)
    theta = css[np.arange(v.shape[0]), rho - 1] / rho
    return np.maximum(v - theta[:, None], 0.0)


def _mix_term(q: np.ndarray, outside: np.ndarray) -> float:
    """sum over i outside S of D(q_i || mean of outside rows)."""
    mix = q[outside].mean(axis=0)
    return float(rel_entr(q[outside], mix[None, :]).sum())


def _program_value(q: np.ndarray, refs: np.ndarray) -> float:
    return float(rel_entr(q, refs).sum())


def _constraint(q: np.ndarray, out_s: np.ndarray, out_sp: np.ndarray) -> float:
    return _mix_term(q, out_s) - _mix_term(q, out_sp)


def _grad_mix_term(q: np.ndarray, outside: np.ndarray, eps: float = 1e-15) -> np.ndarray:
    g = np.zeros_like(q)
    mix = np.maximum(q[outside].mean(axis=0), eps)
    g[outside] = np.log(np.maximum(q[outside], eps) / mix[None, :])
    return g


def _penalty_grad(q, refs, out_s, out_sp, c, eps: float = 1e-15):
    gval = _constraint(q, out_s, out_sp)
    grad = np.log(np.maximum(q, eps) / refs) + 1.0
    if gval < 0:
        grad += 2.0 * c * gval * (_grad_mix_term(q, out_s) - _grad_mix_term(q, out_sp))
    return grad, gval


def _projected_gradient(q, refs, out_s, out_sp, c, max_iters):
    """Armijo-backtracking projected gradient descent on the penalized objective."""

    def value(x):
        g = _constraint(x, out_s, out_sp)
        return _program_value(x, refs) + c * min(g, 0.0) ** 2

    fq = value(q)
    step = 1.0
    iters = 0
    for _ in range(max_iters):
        iters += 1
        grad, _ = _penalty_grad(q, refs, out_s, out_sp, c)
        step = min(step * 2.0, 1.0)
        moved = False
        while step > 1e-14:
            cand = _project_rows_to_simplex(q - step * grad)
            fc = value(cand)
            if fc <= fq - 1e-4 * (np.sum(grad * (q - cand))):
                if np.abs(cand - q).max() < 1e-12:
                    return cand, fc, iters
                q, fq = cand, fc
                moved = True
                break
            step *= 0.5
        if not moved:
            break
    return q, fq, iters


def _repair_feasibility(q, out_s, out_sp, max_iters: int = 300):
    """Locally descend the squared constraint violation until g >= 0.

    The penalty phase leaves a violation of order 1/penalty; this walks
    an O(violation) distance, so the objective barely moves.
    """
    g = _constraint(q, out_s, out_sp)
    step = 1.0
    for _ in range(max_iters):
        if g >= 0.0:
            return q
        grad = 2.0 * g * (_grad_mix_term(q, out_s) - _grad_mix_term(q, out_sp))
        step = min(step * 2.0, 1.0)
        while step > 1e-16:
            cand = _project_rows_to_simplex(q - step * grad)
            gc = _constraint(cand, out_s, out_sp)
            if min(gc, 0.0) ** 2 < min(g, 0.0) ** 2:
                q, g = cand, gc
                break
            step *= 0.5
        else:
            break
    return q


def _solve_pair_program(
    refs: np.ndarray,
    s: tuple[int, ...],
    s_prime: tuple[int, ...],
    mus_by_coord: np.ndarray,
    pi: np.ndarray,
    opts: SolverOptions,
) -> tuple[float, float, int, np.ndarray]:
    """Inner exponent program for one ordered pair of outlier sets.

    Minimizes sum_i D(q_i || refs_i) subject to the outside-S dispersion
    being at least the outside-S' dispersion.  Returns (value, gap,
    iterations, minimizer).
    """
    m, k = refs.shape
    out_s = np.array([i for i in range(m) if i not in s])
    out_sp = np.array([i for i in range(m) if i not in s_prime])

    # strictly feasible anchor: typical everywhere except the coordinates
    # entering S' anew, which keeps the S'-side dispersion at zero
    anchor = np.tile(pi, (m, 1))
    for i in s_prime:
        if i not in s:
            anchor[i] = mus_by_coord[i]

    # boundary start: pair the swapped coordinates at geometric midpoints
    boundary = np.tile(pi, (m, 1))
    enter = [i for i in s if i not in s_prime]
    leave = [i for i in s_prime if i not in s]
    for i in s:
        boundary[i] = mus_by_coord[i]
    for i, j in zip(enter, leave):
        gm = np.sqrt(mus_by_coord[i] * pi)
        gm = gm / gm.sum()
        boundary[i] = gm
        boundary[j] = gm

    rng = np.random.default_rng(np.random.SeedSequence((opts.seed, len(s), *s, *s_prime)))
    starts = [refs.copy(), anchor.copy(), boundary]
    for _ in range(opts.restarts):
        starts.append(rng.dirichlet(np.ones(k), size=m))

    best_val, best_gap, best_q = math.inf, math.inf, None
    total_iters = 0
    for q0 in starts:
        q = q0
        c = opts.penalty_start
        for _ in range(opts.penalty_rounds):
            q, _, it = _projected_gradient(q, refs, out_s, out_sp, c, opts.max_pg_iters)
            total_iters += it
            c *= opts.penalty_growth
        q = _repair_feasibility(q, out_s, out_sp)
        gap = max(0.0, -_constraint(q, out_s, out_sp))
        if gap > FEASIBILITY_TOL:
            continue
        val = _program_value(q, refs)
        if val < best_val:
            best_val, best_gap, best_q = val, gap, q
    if best_q is None:
        raise SolverError("no restart reached the feasibility tolerance")
    return best_val, best_gap, total_iters, best_q


def exponent_univ_single(
    mu: Pmf, pi: Pmf, m: int, opts: Optional[SolverOptions] = None
) -> ExponentResult:
    """Exponent achieved by the fully universal single-outlier test.

    Solved as the constrained program over M pmfs; the returned value is
    an upper bound on the true minimum (global optimality is certified
    only for K=2, via the grid oracle).
    """
    _check_model(mu, pi)
    if m < 3:
        raise ValidationError("need M >= 3")
    opts = opts or SolverOptions()
    k = mu.size
    refs = np.tile(pi.probs, (m, 1))
    refs[0] = mu.probs
    mus_by_coord = np.tile(mu.probs, (m, 1))
    val, gap, iters, q = _solve_pair_program(
        refs, (0,), (1,), mus_by_coord, np.asarray(pi.probs), opts
    )
    cap = 2.0 * bhattacharyya(mu, pi)
    val = min(val, cap)
    return ExponentResult(
        max(val, 0.0),
        "multistart_penalty",
        iterations=iters,
        feasibility_gap=gap,
        minimizer=tuple(Pmf.normalize(np.maximum(row, 0)) for row in q),
    )


def exponent_univ_multi(
    mus: Sequence[Pmf], pi: Pmf, t: int, opts: Optional[SolverOptions] = None
) -> ExponentResult:
    """Exponent achieved by the fully universal fixed-size multi-outlier test.

    Outer minimum over ordered pairs of distinct size-T outlier sets of
    the inner penalized program.
    """
    mus = list(mus)
    m = len(mus)
    if not 1 < t < m / 2:
        raise ValidationError(f"need 1 < T < M/2, got T={t}, M={m}")
    for mu in mus:
        _check_model(mu, pi)
    opts = opts or SolverOptions()
    pi_arr = np.asarray(pi.probs)
    mus_by_coord = np.stack([mu.probs for mu in mus])
    best_val, best_gap, best_q = math.inf, math.inf, None
    total_iters = 0
    subsets = list(combinations(range(m), t))
    for s in subsets:
        refs = np.tile(pi_arr, (m, 1))
        for i in s:
            refs[i] = mus_by_coord[i]
        for sp in subsets:
            if sp == s:
                continue
            val, gap, iters, q = _solve_pair_program(refs, s, sp, mus_by_coord, pi_arr, opts)
            total_iters += iters
            if val < best_val:
                best_val, best_gap, best_q = val, gap, q
    assert best_q is not None
    return ExponentResult(
        max(best_val, 0.0),
        "multistart_penalty",
        iterations=total_iters,
        feasibility_gap=best_gap,
        minimizer=tuple(Pmf.normalize(np.maximum(row, 0)) for row in best_q),
    )


# ---------------------------------------------------------------------------
# Exhaustive grid oracle (binary alphabet, M = 3)
# ---------------------------------------------------------------------------


def _binary_entropy(x: np.ndarray) -> np.ndarray:
    return -(xlogy(x, x) + xlogy(1.0 - x, 1.0 - x))


def _binary_kl(x: np.ndarray, ref: np.ndarray) -> np.ndarray:
    return rel_entr(x, ref[0]) + rel_entr(1.0 - x, ref[1])


def grid_exponent_univ_single(mu: Pmf, pi: Pmf, steps: int = 400) -> ExponentResult:
    """Brute-force grid minimization of the universal single-outlier program.

    Binary alphabet, M = 3 only: each pmf is parameterized by its first
    component on a uniform grid, and the constraint is evaluated exactly
    at every feasible triple.
    """
    _check_model(mu, pi)
    if mu.size != 2:
        raise ValidationError("the grid oracle supports K = 2 only")
    xs = np.arange(steps + 1) / steps
    h = _binary_entropy(xs)
    d_mu = _binary_kl(xs, np.asarray(mu.probs))
    d_pi = _binary_kl(xs, np.asarray(pi.probs))
    b, c = np.meshgrid(xs, xs, indexing="ij")
    hb, hc = h[:, None] * np.ones_like(c), h[None, :] * np.ones_like(b)
    side_a = 2.0 * _binary_entropy(0.5 * (b + c)) - hb - hc
    obj_bc = d_pi[:, None] + d_pi[None, :]
    best = math.inf
    arg = None
    for i, a in enumerate(xs):
        side_b = 2.0 * _binary_entropy(0.5 * (a + c)) - h[i] - hc
        feasible = side_a - side_b >= 0.0
        obj = np.where(feasible, d_mu[i] + obj_bc, math.inf)
        j = int(np.argmin(obj))
        if obj.flat[j] < best:
            best = float(obj.flat[j])
            arg = (a, float(b.flat[j]), float(c.flat[j]))
    assert arg is not None
    minimizer = tuple(Pmf(np.array([x, 1.0 - x])) for x in arg)
    return ExponentResult(best, "grid_oracle", iterations=(steps + 1) ** 3, minimizer=minimizer)


# ---------------------------------------------------------------------------
# Convex minimization over a relative entropy ball (Frank-Wolfe)
# ---------------------------------------------------------------------------


def _tilt_to_radius(log_center: np.ndarray, direction: np.ndarray, radius: float) -> np.ndarray:
    """The exponential tilt of the center along -direction hitting the ball boundary.

    Returns argmin of <direction, x> over D(x||center) <= radius.
    """

    def point(theta: float) -> np.ndarray:
        z = log_center - theta * direction
        z = z - z.max()
        w = np.exp(z)
        return w / w.sum()

    def div(theta: float) -> float:
        x = point(theta)
        return float(rel_entr(x, np.exp(log_center)).sum())

    hi = 1.0
    for _ in range(200):
        if div(hi) >= radius or hi > 1e12:
            break
        hi *= 2.0
    if div(hi) < radius:
        return point(hi)
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if div(mid) < radius:
            lo = mid
        else:
            hi = mid
    return point(0.5 * (lo + hi))


def _fw_min_bhattacharyya(
    mu: np.ndarray,
    center: np.ndarray,
    radius: float,
    gap_tol: float = FW_GAP_TOL,
    max_iters: int = 50000,
) -> tuple[float, int, float, np.ndarray]:
    """Minimize 2B(mu, q) over the KL ball around center via Frank-Wolfe."""
    log_center = np.log(center)

    def value(q: np.ndarray) -> float:
        return -2.0 * math.log(np.sqrt(mu * q).sum())

    q = center.copy()
    gap = math.inf
    for it in range(1, max_iters + 1):
        s = np.sqrt(mu * q).sum()
        grad = -np.sqrt(mu / np.maximum(q, 1e-300)) / s
        x = _tilt_to_radius(log_center, grad, radius)
        gap = float(grad @ (q - x))
        if gap <= gap_tol:
            return value(q), it, gap, q
        d = x - q
        # golden-section line search; the objective is convex along the segment
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        a, b = 0.0, 1.0
        c1 = b - invphi * (b - a)
        c2 = a + invphi * (b - a)
        f1, f2 = value(q + c1 * d), value(q + c2 * d)
        while b - a > 1e-12:
            if f1 < f2:
                b, c2, f2 = c2, c1, f1
                c1 = b - invphi * (b - a)
                f1 = value(q + c1 * d)
            else:
                a, c1, f1 = c1, c2, f2
                c2 = a + invphi * (b - a)
                f2 = value(q + c2 * d)
        q = q + 0.5 * (a + b) * d
    raise SolverError(f"Frank-Wolfe did not reach duality gap {gap_tol} (gap={gap:.3e})")


def min_over_kl_ball(mus: Sequence[Pmf] | Pmf, ball: KlBallSpec) -> ExponentResult:
    """Minimize min_i 2B(mu_i, q) over the relative entropy ball.

    Each branch of the pointwise minimum is convex and solved on its own;
    the reported value is the smallest branch optimum.
    """
    if isinstance(mus, Pmf):
        mus = [mus]
    mus = list(mus)
    if not mus:
        raise ValidationError("need at least one objective pmf")
    center = np.asarray(ball.center.probs)
    best_val, best_q, iters, worst_gap = math.inf, None, 0, 0.0
    for mu in mus:
        if mu.size != ball.center.size:
            raise ValidationError("objective and ball center alphabets differ")
        if ball.radius == 0.0:
            val, it, gap, q = 2.0 * bhattacharyya(mu, ball.center), 0, 0.0, center
        elif mu.full_support() and kl(mu, ball.center) <= ball.radius:
            # the unconstrained minimizer q = mu lies inside the ball
            val, it, gap, q = 0.0, 0, 0.0, np.asarray(mu.probs)
        else:
            val, it, gap, q = _fw_min_bhattacharyya(
                np.asarray(mu.probs), center, ball.radius
            )
        iters += it
        worst_gap = max(worst_gap, gap)
        if val < best_val:
            best_val, best_q = val, q
    assert best_q is not None
    return ExponentResult(
        max(best_val, 0.0),
        "kl_ball_convex",
        iterations=iters,
        feasibility_gap=worst_gap,
        minimizer=(Pmf.normalize(best_q),),
    )


def typical_floor_log(pi: Pmf) -> float:
    """-ln of the smallest mass of pi; finite because pi has full support."""
    if not pi.full_support():
        raise ValidationError("pi must have full support")
    return float(-np.log(pi.probs.min()))


def thm_single_lower_bound(mu: Pmf, pi: Pmf, m: int) -> ExponentResult:
    """Lower bound on the universal single-outlier exponent for given M.

    Nondecreasing in M and converging to the both-known optimum as the
    ball radius shrinks.
    """
    _check_model(mu, pi)
    if m < 3:
        raise ValidationError("need M >= 3")
    radius = (2.0 * bhattacharyya(mu, pi) + typical_floor_log(pi)) / (m - 1)
    return min_over_kl_ball(mu, KlBallSpec(pi, radius))


def thm_multi_lower_bound(mus: Sequence[Pmf], pi: Pmf, t: int, m: int) -> ExponentResult:
    """Lower bound on the universal fixed-size multi-outlier exponent for given M."""
    mus = list(mus)
    if len(mus) < 2:
        raise ValidationError("need at least two outlier laws")
    if not 1 < t < m / 2:
        raise ValidationError(f"need 1 < T < M/2, got T={t}, M={m}")
    for mu in mus:
        _check_model(mu, pi)
    pair_min = exponent_multi_known(mus, pi).value
    radius = (pair_min + t * typical_floor_log(pi)) / (m - t)
    return min_over_kl_ball(mus, KlBallSpec(pi, radius))
