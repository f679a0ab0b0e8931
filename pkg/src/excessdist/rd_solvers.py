"""Rate-distortion functions for the direct, indirect and joint problems.

All solvers work at a fixed slope with Blahut-Arimoto and then search over
slopes to meet the distortion targets.  The slope at the solution is the
(negated) derivative of the rate-distortion curve, which the tilted
information needs, so it is reported alongside the rate.

Rates are in bits; slopes are in bits per unit of distortion.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, InfeasibleDistortionError, RegimeError
from .source_model import (
    DistortionSpec,
    JointSource,
    d_min,
    entropy,
    surrogate_distortion,
)

LAMBDA_MAX = 60.0
BA_TOL = 1e-12
BA_MAX_ITER = 10_000
STALL_GAP = 1e-8  # a stalled Lagrangian only counts as converged with a small gap
FEAS_TOL = 1e-6


class DegenerateSlopeWarning(UserWarning):
    """A target sits at the minimum distortion, where the slope is unbounded."""


@dataclass(frozen=True, eq=False)
class BAPoint:
    slopes: np.ndarray
    conditional: np.ndarray
    output: np.ndarray
    rate: float
    distortions: np.ndarray
    lagrangian: float
    iterations: int
    gap: float


@dataclass(frozen=True, eq=False)
class RDSolution:
    """Rate, achieving conditional and slopes at a distortion target.

    ``outputs`` labels the columns of ``conditional``: reconstruction indices
    for the direct and indirect problems, ``(xhat, yhat)`` pairs for the joint
    one, and ``(posterior pmf, yhat)`` pairs for the log-loss achiever.
    ``conditional`` is ``None`` for the rate-only log-loss direct answer.
    """

    kind: str
    rate: float
    targets: tuple
    conditional: np.ndarray | None
    outputs: tuple
    p_x: np.ndarray
    lambda1: float | None = None
    lambda2: float | None = None
    distortions: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def output_marginal(self) -> np.ndarray:
        return self.p_x @ self.conditional


def mutual_information(p_x: np.ndarray, cond: np.ndarray) -> float:
    joint = p_x[:, None] * cond
    q = joint.sum(axis=0)
    on = joint > 0  # implies q > 0 even when cond is subnormal
    ratio = cond[on] / np.broadcast_to(q, cond.shape)[on]
    return float(max(0.0, (joint[on] * np.log2(ratio)).sum()))


def _ba_batch(p, dists, lams, q0=None, tol=BA_TOL, max_iter=BA_MAX_ITER):
    """Blahut-Arimoto for a batch of slope vectors.

    ``dists`` has shape ``(C, X, K)`` and ``lams`` shape ``(B, C)``.  Returns
    conditionals ``(B, X, K)``, outputs ``(B, K)``, the per-batch iteration
    count, final Lagrangian upper values and Blahut lower values, and a mask
    of batches that met the tolerance.
    """
    B = lams.shape[0]
    K = dists.shape[2]
    dl = np.einsum("bc,cxk->bxk", lams, dists)
    shift = dl.min(axis=2, keepdims=True)
    A = np.exp2(-(dl - shift))
    const = (p * shift[:, :, 0]).sum(axis=1)
    q = np.full((B, K), 1.0 / K) if q0 is None else np.array(np.broadcast_to(q0, (B, K)))
    prev = np.full(B, np.inf)
    done = np.zeros(B, dtype=bool)
    iters = np.zeros(B, dtype=int)
    for it in range(1, max_iter + 1):
        Z = np.einsum("bxk,bk->bx", A, q)
        L = -(p * np.log2(Z)).sum(axis=1) + const
        newly = (prev - L < tol) & ~done
        iters[newly] = it
        done |= newly
        if done.all():
            break
        cond = A * q[:, None, :] / Z[:, :, None]
        q_new = np.einsum("x,bxk->bk", p, cond)
        q = np.where(done[:, None], q, q_new)
        prev = L
    iters[~done] = max_iter
    Z = np.einsum("bxk,bk->bx", A, q)
    cond = A * q[:, None, :] / Z[:, :, None]
    c = np.einsum("x,bxk->bk", p, A / Z[:, :, None])
    lower = -(p * np.log2(Z)).sum(axis=1) + const - np.log2(c.max(axis=1))
    return cond, np.einsum("x,bxk->bk", p, cond), iters, lower, done


def _point(p, dists, lam, cond, iters=0, lower=None) -> BAPoint:
    rate = mutual_information(p, cond)
    dist = np.einsum("x,cxk,xk->c", p, dists, cond)
    lag = rate + float(np.dot(lam, dist))
    gap = 0.0 if lower is None else max(0.0, lag - float(lower))
    return BAPoint(np.asarray(lam, dtype=float), cond, p @ cond, rate, dist, lag, int(iters), gap)


def _ba(p, dists, lam, q0=None, tol=BA_TOL, max_iter=BA_MAX_ITER, strict=True) -> BAPoint:
    """Single-slope Blahut-Arimoto with SQUAREM extrapolation.

    Stops when the Blahut lower bound closes to within ``tol``, or when the
    Lagrangian stalls and the gap is below ``STALL_GAP``.
    """
    lam = np.asarray(lam, dtype=float)
    if np.all(lam == 0):
        return _zero_slope_point(p, dists)
    dl = np.tensordot(lam, dists, axes=1)
    shift = dl.min(axis=1, keepdims=True)
    A = np.exp2(-(dl - shift))
    const = float(p @ shift[:, 0])
    K = A.shape[1]
    if q0 is None:
        q = np.full(K, 1.0 / K)
    else:
        # a zero entry can never regrow under the multiplicative update
        q = np.maximum(np.asarray(q0, dtype=float), 1e-9)
        q /= q.sum()

    def step(q):
        return q * ((p / (A @ q)) @ A)

    def objective(q):
        return const - float(p @ np.log2(A @ q))

    prev = np.inf
    it = 0
    done = False
    while it < max_iter:
        q1 = step(q)
        q2 = step(q1)
        it += 2
        r = q1 - q
        v = q2 - q1 - r
        nv = np.linalg.norm(v)
        if nv > 0:
            a = min(-np.linalg.norm(r) / nv, -1.0)
            qe = q - 2 * a * r + a * a * v
            # backtrack toward the plain double step instead of clipping: clipped
            # entries would be stuck at zero for good
            while a < -1.0 and qe.min() < 0:
                a = (a - 1.0) / 2 if a < -1.001 else -1.0
                qe = q - 2 * a * r + a * a * v
            if qe.min() >= 0 and qe.sum() > 0:
                qe = step(qe / qe.sum())
                it += 1
                if objective(qe) <= objective(q2):
                    q2 = qe
        q = q2
        L = objective(q)
        lower = L - float(np.log2(((p / (A @ q)) @ A).max()))
        gap = L - lower
        if gap < tol or (prev - L < tol and gap < STALL_GAP):
            done = True
            break
        prev = L
    Z = A @ q
    cond = A * q / Z[:, None]
    lower = const - float(p @ np.log2(Z)) - float(np.log2(((p / Z) @ A).max()))
    pt = _point(p, dists, lam, cond, it, lower)
    if strict and not done:
        raise ConvergenceError(
            f"Blahut-Arimoto did not converge within {max_iter} iterations at slopes {lam.tolist()}",
            last_iterate=pt,
        )
    return pt


def _zero_slope_point(p, dists) -> BAPoint:
    # rate 0: a single reconstruction, the one with least total expected distortion
    per_col = np.einsum("x,cxk->k", p, dists)
    k = int(np.argmin(per_col))
    cond = np.zeros((p.size, dists.shape[2]))
    cond[:, k] = 1.0
    return _point(p, dists, np.zeros(dists.shape[0]), cond)


def _min_distortion_point(p, dists) -> BAPoint:
    """Deterministic map sending each ``x`` to its per-constraint minimisers.

    Only meaningful when the minimisers can be chosen jointly, which holds for
    a single constraint and for the product alphabet of the joint problem.
    """
    total = dists.sum(axis=0)
    cond = np.zeros((p.size, dists.shape[2]))
    for x in range(p.size):
        ok = np.all(dists[:, x, :] <= dists[:, x, :].min(axis=1, keepdims=True) + 1e-15, axis=0)
        cand = np.flatnonzero(ok) if ok.any() else np.array([int(np.argmin(total[x]))])
        cond[x, cand[0]] = 1.0
    return _point(p, dists, np.full(dists.shape[0], np.inf), cond)


def ba_fixed_slope(p_x, d, lam: float):
    """Point on the rate-distortion curve where the tangent has slope ``-lam``.

    Returns ``(rate, distortion, conditional)``.  Raises
    :class:`ConvergenceError` carrying the last iterate if the alternating
    updates do not settle within the iteration cap.
    """
    if lam < 0:
        raise ValueError("slope must be >= 0")
    p = np.asarray(p_x, dtype=float)
    dists = np.asarray(d, dtype=float)[None]
    pt = _ba(p, dists, [lam])
    return pt.rate, float(pt.distortions[0]), pt.conditional


# --------------------------------------------------------------------------
# single-constraint problems


def _solve_single(p, d, D, kind, labels):
    d = np.asarray(d, dtype=float)
    dists = d[None]
    dmin = d_min(p, d)
    if D < dmin - 1e-12:
        raise InfeasibleDistortionError(
            f"{kind} target {D} is below the minimum achievable distortion {dmin}"
        )
    diag = {"d_min": dmin}
    zero = _zero_slope_point(p, dists)
    if D >= zero.distortions[0]:
        return _single_solution(kind, zero, D, 0.0, labels, p, diag, iterations=0)

    top = _ba(p, dists, [LAMBDA_MAX], strict=False)
    if top.distortions[0] > D:
        warnings.warn(
            f"{kind} target {D} at the minimum distortion {dmin}; slope capped at {LAMBDA_MAX}",
            DegenerateSlopeWarning,
            stacklevel=3,
        )
        diag["slope_capped"] = True
        floor = _min_distortion_point(p, dists)
        pt = _mix(p, dists, top, floor, D)
        return _single_solution(kind, pt, D, LAMBDA_MAX, labels, p, diag, iterations=top.iterations)

    lo, hi = zero, top
    lam_lo, lam_hi = 0.0, LAMBDA_MAX
    total_iters = top.iterations
    q_warm = top.output
    for _ in range(200):
        lam = 0.5 * (lam_lo + lam_hi)
        if lam_hi - lam_lo < 1e-12:
            break
        pt = _ba(p, dists, [lam], q0=q_warm)
        total_iters += pt.iterations
        q_warm = pt.output
        if pt.distortions[0] > D:
            lo, lam_lo = pt, lam
        else:
            hi, lam_hi = pt, lam
        if abs(pt.distortions[0] - D) < 1e-13:
            break
    best = hi if abs(hi.distortions[0] - D) <= abs(lo.distortions[0] - D) else lo
    if abs(best.distortions[0] - D) < 1e-13:
        pt = best
    else:
        pt = _mix(p, dists, lo, hi, D)
    diag["bracket"] = [lam_lo, lam_hi]
    return _single_solution(kind, pt, D, 0.5 * (lam_lo + lam_hi), labels, p, diag,
                            iterations=total_iters)


def _mix(p, dists, a: BAPoint, b: BAPoint, D: float) -> BAPoint:
    """Time-share two conditionals so the expected distortion equals ``D``.

    ``a`` must sit at or above ``D`` and ``b`` at or below it.
    """
    da, db = float(a.distortions[0]), float(b.distortions[0])
    alpha = 0.0 if da == db else min(1.0, max(0.0, (da - D) / (da - db)))
    cond = (1.0 - alpha) * a.conditional + alpha * b.conditional
    return _point(p, dists, a.slopes, cond, a.iterations + b.iterations)


def _single_solution(kind, pt, D, lam, labels, p, diag, iterations):
    diag = dict(diag, iterations=int(iterations), duality_gap=float(pt.gap))
    lam1 = lam if kind == "direct" else None
    lam2 = lam if kind == "indirect" else None
    return RDSolution(
        kind=kind,
        rate=pt.rate,
        targets=(D,),
        conditional=pt.conditional,
        outputs=tuple(labels),
        p_x=p,
        lambda1=lam1,
        lambda2=lam2,
        distortions=(float(pt.distortions[0]),),
        diagnostics=diag,
    )


def solve_r1(p_x, d1: DistortionSpec, D1: float) -> RDSolution:
    """Direct rate-distortion function ``R1(D1)``; log-loss goes to
    :func:`logloss_r1`."""
    p = np.asarray(p_x, dtype=float)
    if d1.is_logloss:
        return logloss_r1(p, D1)
    d = d1.as_matrix()
    return _solve_single(p, d, D1, "direct", range(d.shape[1]))


def solve_r2(source: JointSource, d2: DistortionSpec, D2: float) -> RDSolution:
    """Indirect rate-distortion function ``R2(D2)``: the direct problem on
    ``X`` under the surrogate distortion."""
    d = surrogate_distortion(source, d2)
    return _solve_single(source.p_x, d, D2, "indirect", range(d.shape[1]))


# --------------------------------------------------------------------------
# joint problem


def joint_distortions(source: JointSource, d1: DistortionSpec, d2: DistortionSpec) -> np.ndarray:
    """Stacked ``(2, |X|, |Xhat||Yhat|)`` distortions on the product alphabet."""
    a = d1.as_matrix()
    b = surrogate_distortion(source, d2)
    nx, na = a.shape
    nb = b.shape[1]
    e1 = np.repeat(a, nb, axis=1)
    e2 = np.tile(b, (1, na))
    return np.stack([e1, e2])


def _slope_grid():
    return np.concatenate([[0.0], np.geomspace(1e-2, LAMBDA_MAX, 15)])


def solve_joint(source: JointSource, d1: DistortionSpec, d2: DistortionSpec,
                D1: float, D2: float) -> RDSolution:
    """Joint rate-distortion function ``R(D1, D2)``.

    Maximises the concave dual over slope pairs: a 16 x 16 logarithmic grid
    picks a start, bounded quasi-Newton refines it, and every Blahut-Arimoto
    point visited is kept.  The primal answer time-shares the visited
    conditionals (a small LP), so it always meets both targets; the reported
    slopes are the dual maximiser.
    """
    p = source.p_x
    dists = joint_distortions(source, d1, d2)
    targets = np.array([D1, D2], dtype=float)
    mins = np.array([d_min(p, dists[0]), d_min(p, dists[1])])
    for i, name in enumerate(("D1", "D2")):
        if targets[i] < mins[i] - 1e-12:
            raise InfeasibleDistortionError(
                f"{name} = {targets[i]} is below the minimum achievable distortion {mins[i]}"
            )
    na = d1.n_reconstructions
    nb = d2.n_reconstructions
    labels = tuple((i, k) for i in range(na) for k in range(nb))
    for active in (0, 1):
        face = _face_solution(p, dists, targets, active, (na, nb), labels)
        if face is not None:
            return face
    finite_targets = np.minimum(targets, dists.max(axis=(1, 2)) + 1.0)

    grid = _slope_grid()
    lams = np.array([(a, b) for a in grid for b in grid])
    cond, _, iters, lower, _ = _ba_batch(p, dists, lams, tol=1e-10, max_iter=2000)
    points = [_zero_slope_point(p, dists), _min_distortion_point(p, dists)]
    best_val, best = -np.inf, None
    for b in range(lams.shape[0]):
        if not np.any(lams[b]):
            continue
        pt = _point(p, dists, lams[b], cond[b], iters[b], lower[b])
        points.append(pt)
        val = pt.lagrangian - float(lams[b] @ finite_targets)
        if val > best_val:
            best_val, best = val, pt
    total_iters = int(iters.sum())

    cache: dict = {}
    warm = [best.output]

    def dual(lam):
        key = (float(lam[0]), float(lam[1]))
        if key not in cache:
            pt = _ba(p, dists, lam, q0=warm[0], strict=False)
            warm[0] = pt.output
            cache[key] = pt
            points.append(pt)
        pt = cache[key]
        val = pt.lagrangian - float(lam @ finite_targets)
        return -val, -(pt.distortions - finite_targets)

    res = optimize.minimize(
        dual, best.slopes, jac=True, method="L-BFGS-B",
        bounds=[(0.0, LAMBDA_MAX)] * 2,
        options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 200},
    )
    lam_star = np.clip(res.x, 0.0, LAMBDA_MAX)
    dual_value = -float(res.fun)
    total_iters += sum(pt.iterations for pt in cache.values())

    cond, slack = _time_share(points, targets, p, dists)
    pt = _point(p, dists, lam_star, cond)
    diag = {
        "iterations": total_iters,
        "dual_value": dual_value,
        "duality_gap": float(pt.rate - dual_value),
        "d_min": mins.tolist(),
        "points_visited": len(points),
        "feasibility_slack": slack,
    }
    if slack:
        diag["slope_capped"] = True
    return RDSolution(
        kind="joint",
        rate=pt.rate,
        targets=(float(D1), float(D2)),
        conditional=cond,
        outputs=labels,
        p_x=p,
        lambda1=float(lam_star[0]),
        lambda2=float(lam_star[1]),
        distortions=tuple(float(v) for v in pt.distortions),
        diagnostics=diag,
    )


def _face_solution(p, dists, targets, active, shape, labels):
    """Joint answer when only constraint ``active`` binds, else ``None``.

    Solves the single-constraint problem on its own alphabet, then lets the
    other reconstruction be the best function of the first; that keeps the
    mutual information unchanged, so if the other target is met the joint
    rate equals the single one.
    """
    na, nb = shape
    other = 1 - active
    if active == 0:
        d_act = dists[0][:, ::nb]          # d1 over xhat
        d_oth = dists[1][:, :nb]           # surrogate d2 over yhat
    else:
        d_act = dists[1][:, :nb]
        d_oth = dists[0][:, ::nb]
    kind = "direct" if active == 0 else "indirect"
    single = _solve_single(p, d_act, targets[active], kind, range(d_act.shape[1]))
    W = single.conditional
    best = np.argmin((p[:, None] * W).T @ d_oth, axis=1)
    cond = np.zeros((p.size, na * nb))
    for r in range(W.shape[1]):
        col = r * nb + best[r] if active == 0 else best[r] * nb + r
        cond[:, col] += W[:, r]
    achieved = np.einsum("x,cxk,xk->c", p, dists, cond)
    if achieved[other] > targets[other] + 1e-12:
        return None
    lam = np.zeros(2)
    lam[active] = single.lambda1 if active == 0 else single.lambda2
    pt = _point(p, dists, lam, cond)
    diag = dict(single.diagnostics, active_constraint=active + 1)
    return RDSolution(
        kind="joint",
        rate=pt.rate,
        targets=tuple(float(t) for t in targets),
        conditional=cond,
        outputs=labels,
        p_x=p,
        lambda1=float(lam[0]),
        lambda2=float(lam[1]),
        distortions=tuple(float(v) for v in pt.distortions),
        diagnostics=diag,
    )


def _time_share(points: Sequence[BAPoint], targets, p, dists):
    rates = np.array([pt.rate for pt in points])
    E = np.array([pt.distortions for pt in points]).T
    n = len(points)
    for slack in (0.0, 1e-9, FEAS_TOL):
        res = optimize.linprog(
            rates, A_ub=E, b_ub=targets + slack, A_eq=np.ones((1, n)), b_eq=[1.0],
            bounds=[(0, None)] * n, method="highs",
        )
        if res.status == 0:
            alpha = np.clip(res.x, 0.0, None)
            alpha /= alpha.sum()
            cond = np.einsum("k,kxr->xr", alpha, np.array([pt.conditional for pt in points]))
            achieved = np.einsum("x,cxk,xk->c", p, dists, cond)
            if np.all(achieved <= targets + FEAS_TOL):
                if slack:
                    warnings.warn("joint target at the edge of the achievable region",
                                  DegenerateSlopeWarning, stacklevel=3)
                return cond, slack
    corners = {
        "d_min": [d_min(p, dists[0]), d_min(p, dists[1])],
        "visited_extremes": [E[0].min(), E[1].min()],
    }
    raise InfeasibleDistortionError(
        f"slope search could not meet both targets {targets.tolist()}; frontier corners {corners}"
    )


# --------------------------------------------------------------------------
# logarithmic loss


def logloss_r1(p_x, D1: float) -> RDSolution:
    """``R1(D1) = H(X) - D1`` clipped at zero; rate-only answer."""
    p = np.asarray(p_x, dtype=float)
    h = entropy(p)
    raw = h - D1
    return RDSolution(
        kind="logloss_direct",
        rate=max(0.0, raw),
        targets=(float(D1),),
        conditional=None,
        outputs=(),
        p_x=p,
        lambda1=1.0 if raw > 0 else 0.0,
        diagnostics={"unclipped_rate": raw, "entropy": h},
    )


@dataclass(frozen=True)
class LoglossRegime:
    case: str  # "A": R2(D2) < H(X) - D1, "B" otherwise
    applicable: bool
    r2: float
    r2_at_min: float
    entropy: float
    d2_min: float


def check_logloss_regime(source: JointSource, d2: DistortionSpec, D1: float, D2: float,
                         r2_solution: RDSolution | None = None) -> LoglossRegime:
    """Which log-loss converse applies, and whether the joint function reduces
    to ``max(R1, R2)`` here."""
    h = entropy(source.p_x)
    dt = surrogate_distortion(source, d2)
    dmin = d_min(source.p_x, dt)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateSlopeWarning)
        r2_min = _solve_single(source.p_x, dt, dmin, "indirect", range(dt.shape[1])).rate
        if D2 < dmin - 1e-12:
            r2 = math.inf
        elif r2_solution is not None:
            r2 = r2_solution.rate
        else:
            r2 = solve_r2(source, d2, D2).rate
    case = "A" if r2 < h - D1 else "B"
    applicable = bool(r2_min >= h - D1 and D2 >= dmin - 1e-12)
    return LoglossRegime(case, applicable, float(r2), float(r2_min), h, dmin)


def _posteriors(p, cond):
    q = p @ cond
    keep = np.flatnonzero(q > 0)
    post = (p[:, None] * cond[:, keep]) / q[keep]
    return keep, post


def construct_logloss_achiever(source: JointSource, d2: DistortionSpec,
                               r2_solution: RDSolution, D1: float, D2: float) -> RDSolution:
    """Joint log-loss achiever built from an indirect solution.

    The reconstruction of ``X`` is the posterior of ``X`` given the indirect
    reconstruction, so both components determine each other.  When the
    direct rate ``H(X) - D1`` exceeds ``R2(D2)`` the indirect problem is
    re-solved at a smaller level whose rate matches it.  Reconstruction
    symbols with identical posteriors are merged, keeping the one with the
    smaller posterior-expected surrogate distortion.
    """
    regime = check_logloss_regime(source, d2, D1, D2, r2_solution)
    if not regime.applicable:
        raise RegimeError(
            f"R2(D2_min) = {regime.r2_at_min:.6g} < H(X) - D1 = {regime.entropy - D1:.6g}"
            " (or D2 < D2_min); use solve_joint with a finite reconstruction alphabet"
        )
    p = source.p_x
    dt = surrogate_distortion(source, d2)
    r1 = max(0.0, regime.entropy - D1)
    r2 = r2_solution.rate
    diag = {"r1": r1, "r2": r2, "entropy": regime.entropy}
    if r2 >= r1:
        cond = r2_solution.conditional
        lam1, lam2 = 0.0, r2_solution.lambda2
        diag["branch"] = "indirect_dominant"
    else:
        cond, lam_used, d2_used = _raise_indirect_rate(p, dt, r2_solution, r1)
        lam1, lam2 = 1.0, 0.0
        diag.update(branch="direct_dominant", reduced_D2=d2_used, reduced_slope=lam_used)

    keep, post = _posteriors(p, cond)
    cond = cond[:, keep]
    groups: list[list[int]] = []
    for j in range(post.shape[1]):
        for g in groups:
            if np.allclose(post[:, g[0]], post[:, j], rtol=0.0, atol=1e-12):
                g.append(j)
                break
        else:
            groups.append([j])
    merged_cond = np.zeros((p.size, len(groups)))
    outputs = []
    for gi, g in enumerate(groups):
        scores = [float(post[:, j] @ dt[:, keep[j]]) for j in g]
        winner = g[int(np.argmin(scores))]
        merged_cond[:, gi] = cond[:, g].sum(axis=1)
        outputs.append((post[:, winner].copy(), int(keep[winner])))
    diag["merged"] = int(post.shape[1] - len(groups))

    rate = mutual_information(p, merged_cond)
    with np.errstate(divide="ignore"):
        ll = np.array([-np.log2(o[0]) for o in outputs]).T
    e1 = float(np.sum(p[:, None] * merged_cond * np.where(merged_cond > 0, ll, 0.0)))
    yidx = [o[1] for o in outputs]
    e2 = float(np.sum(p[:, None] * merged_cond * dt[:, yidx]))
    return RDSolution(
        kind="logloss_joint",
        rate=rate,
        targets=(float(D1), float(D2)),
        conditional=merged_cond,
        outputs=tuple(outputs),
        p_x=p,
        lambda1=lam1,
        lambda2=lam2,
        distortions=(e1, e2),
        diagnostics=diag,
    )


def _raise_indirect_rate(p, dt, r2_solution, target_rate):
    """Indirect conditional with rate ``target_rate`` (within 1e-9, from
    above) at a level no larger than the current one."""
    dists = dt[None]
    lam_lo = r2_solution.lambda2 or 0.0
    lo = _point(p, dists, [lam_lo], r2_solution.conditional)
    hi = _ba(p, dists, [LAMBDA_MAX], strict=False)
    if hi.rate < target_rate:
        floor = _min_distortion_point(p, dists)
        if floor.rate > hi.rate:
            hi = floor
    lam_hi = LAMBDA_MAX
    for _ in range(200):
        if lam_hi - lam_lo < 1e-12 or hi.rate - target_rate < 1e-10:
            break
        lam = 0.5 * (lam_lo + lam_hi)
        pt = _ba(p, dists, [lam], q0=hi.output)
        if pt.rate >= target_rate:
            hi, lam_hi = pt, lam
        else:
            lo, lam_lo = pt, lam
    if hi.rate - target_rate < 1e-9:
        return hi.conditional, lam_hi, float(hi.distortions[0])
    # time-share across a jump in the curve; rate is continuous in the mix weight
    a, b = 0.0, 1.0
    for _ in range(100):
        m = 0.5 * (a + b)
        cond = (1 - m) * lo.conditional + m * hi.conditional
        if mutual_information(p, cond) >= target_rate:
            b = m
        else:
            a = m
    cond = (1 - b) * lo.conditional + b * hi.conditional
    return cond, 0.5 * (lam_lo + lam_hi), float(p @ (cond * dt).sum(axis=1))
