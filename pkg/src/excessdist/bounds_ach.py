"""Achievability (upper) bounds on the minimum excess-distortion probability."""

from __future__ import annotations

import math
import warnings
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from .bounds_conv import default_gamma_grid
from .curves import UPPER, BoundCurve, BoundPoint
from .errors import ConfigError, ExcessDistError
from .rd_solvers import DegenerateSlopeWarning, solve_joint
from .source_model import (
    DistortionSpec,
    ProblemInstance,
    build_binomial_class_source,
    excess_table,
    indirect_excess_table,
    info_density,
)

PMF_TOL = 1e-9


def _check_pmf(q, size: int, name: str) -> np.ndarray:
    q = np.asarray(q, dtype=float).ravel()
    if q.size != size:
        raise ConfigError(f"{name} must have {size} entries, has {q.size}")
    if np.any(q < 0) or abs(q.sum() - 1.0) > PMF_TOL:
        raise ConfigError(f"{name} must be a probability mass function")
    return q / q.sum()


def _check_eps(eps_prime: float) -> float:
    if not 0.0 <= eps_prime <= 1.0:
        raise ConfigError(f"epsilon' must lie in [0, 1], got {eps_prime}")
    return float(eps_prime)


# --------------------------------------------------------------------------
# general achievability


def _tail_steps(pi_row: np.ndarray, q: np.ndarray):
    """Breakpoints and tail masses of ``t -> Q{pi > t}`` on ``[0, 1]``.

    Returns ``(widths, tails)`` such that the tail equals ``tails[i]`` on an
    interval of length ``widths[i]``.
    """
    on = q > 0
    v, w = pi_row[on], q[on]
    b = np.unique(np.concatenate([[0.0, 1.0], v]))
    tails = np.array([w[v > t].sum() for t in b[:-1]])
    return np.diff(b), tails


def thm1_integral(pi: np.ndarray, p_x: np.ndarray, q: np.ndarray, M: int) -> float:
    """``sum_x p(x) int_0^1 Q{pi(x, .) > t}^M dt`` by exact breakpoint sums."""
    total = 0.0
    for x in range(pi.shape[0]):
        widths, tails = _tail_steps(pi[x], q)
        total += p_x[x] * float(widths @ tails ** M)
    return total


def _thm1_gradient(pi, p_x, q, M):
    grad = np.zeros_like(q)
    for x in range(pi.shape[0]):
        on = q > 0
        b = np.unique(np.concatenate([[0.0, 1.0], pi[x, on]]))
        for lo, hi in zip(b[:-1], b[1:]):
            fire = pi[x] > lo
            t = q[fire].sum()
            grad += p_x[x] * (hi - lo) * M * t ** (M - 1) * fire
    return grad


def thm1_bound(inst: ProblemInstance, Q) -> BoundPoint:
    """Random-coding bound for codewords drawn i.i.d. from ``Q`` on pairs.

    ``Q`` is indexed by ``xhat * |Yhat| + yhat`` (or shaped
    ``|Xhat| x |Yhat|``).
    """
    if inst.d1.is_logloss:
        raise ConfigError("thm1_bound needs a finite reconstruction alphabet; use thm5_bound")
    q = _check_pmf(Q, inst.n_xhat * inst.n_yhat, "Q")
    pi = excess_table(inst).reshape(inst.p_x.size, -1)
    raw = thm1_integral(pi, inst.p_x, q, inst.M)
    return BoundPoint.make(inst.M, raw, "thm1", UPPER, {"Q": q.tolist()})


def thm1_candidates(inst: ProblemInstance, rd=None) -> dict[str, np.ndarray]:
    """Named output distributions worth trying in the general bound.

    ``rd`` is a joint solution to reuse; otherwise one is solved for.
    """
    k = inst.n_xhat * inst.n_yhat
    out = {"uniform": np.full(k, 1.0 / k)}
    try:
        sol = rd
        if sol is None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateSlopeWarning)
                sol = solve_joint(inst.source, inst.d1, inst.d2, inst.D1, inst.D2)
        q = np.clip(sol.output_marginal, 0.0, None)
        q /= q.sum()
        out["joint_output"] = q
        grid = q.reshape(inst.n_xhat, inst.n_yhat)
        out["product_of_marginals"] = np.outer(grid.sum(1), grid.sum(0)).ravel()
    except (ExcessDistError, ValueError, RuntimeError):
        pass  # an infinite-rate target leaves only the generic candidates
    pi = excess_table(inst).reshape(inst.p_x.size, -1)
    best = int(np.argmin(inst.p_x @ pi))
    out["best_pair"] = np.eye(k)[best]
    return out


def thm1_optimize_q(inst: ProblemInstance, candidates: dict | None = None,
                    budget: int = 50, step: float = 0.5):
    """Best of the candidate ``Q`` followed by ``budget`` exponential-weight steps.

    Returns ``(Q, BoundPoint)``.  Whatever the search does, the reported
    value is the exact bound at the reported ``Q``.
    """
    if inst.d1.is_logloss:
        raise ConfigError("thm1_optimize_q needs a finite reconstruction alphabet")
    if candidates is None:
        candidates = thm1_candidates(inst)
    pi = excess_table(inst).reshape(inst.p_x.size, -1)
    k = pi.shape[1]
    scored = []
    for name in sorted(candidates):
        q = _check_pmf(candidates[name], k, f"candidate {name!r}")
        scored.append((thm1_integral(pi, inst.p_x, q, inst.M), name, q))
    best_val, best_name, best_q = min(scored, key=lambda s: (s[0], s[1]))
    q = 0.99 * best_q + 0.01 / k
    for _ in range(budget):
        g = _thm1_gradient(pi, inst.p_x, q, inst.M)
        scale = np.abs(g).max()
        if scale <= 0:
            break
        q = q * np.exp(-step * g / scale)
        q /= q.sum()
        v = thm1_integral(pi, inst.p_x, q, inst.M)
        if v < best_val:
            best_val, best_name, best_q = v, "refined", q.copy()
    point = BoundPoint.make(inst.M, best_val, "thm1", UPPER,
                            {"Q": best_q.tolist(), "candidate": best_name, "budget": budget})
    return best_q, point


# --------------------------------------------------------------------------
# indirect-only and log-loss achievability


def _eta(pi_ind: np.ndarray, p_yhat: np.ndarray, eps_prime: float) -> np.ndarray:
    """``eta(x) = P_Yhat{pi'(x, Yhat) > eps'}``."""
    return (pi_ind > eps_prime) @ p_yhat


def eps_prime_candidates(inst: ProblemInstance) -> np.ndarray:
    """Distinct values of ``pi'`` plus 0 and 1; other thresholds are equivalent."""
    return np.unique(np.concatenate([[0.0, 1.0], indirect_excess_table(inst).ravel()]))


def thm4_bound(inst: ProblemInstance, P_yhat, eps_prime: float) -> BoundPoint:
    """Bound for codes with no direct constraint (``D1 = inf``)."""
    if math.isfinite(inst.D1):
        raise ConfigError("thm4_bound is for instances with D1 = inf")
    eps_prime = _check_eps(eps_prime)
    p_yhat = _check_pmf(P_yhat, inst.n_yhat, "P_Yhat")
    eta = _eta(indirect_excess_table(inst), p_yhat, eps_prime)
    e_m = float(inst.p_x @ eta ** inst.M)
    raw = eps_prime * (1.0 - e_m) + e_m
    return BoundPoint.make(inst.M, raw, "thm4", UPPER,
                           {"P_yhat": p_yhat.tolist(), "eps_prime": eps_prime})


def thm4_optimize(inst: ProblemInstance, P_candidates: Sequence, eps_grid=None) -> BoundPoint:
    grid = eps_prime_candidates(inst) if eps_grid is None else eps_grid
    pts = [thm4_bound(inst, P, e) for P in P_candidates for e in grid]
    return min(pts, key=lambda pt: pt.raw_value)


def coverage_sum(eta: np.ndarray, M: int) -> np.ndarray:
    """``sum_{k=1}^M C(M,k) (M/k) eta^(M-k) (1-eta)^k`` per entry, in log domain."""
    eta = np.asarray(eta, dtype=float)[..., None]
    k = np.arange(1, M + 1, dtype=float)
    logc = gammaln(M + 1) - gammaln(k + 1) - gammaln(M - k + 1) + np.log(M / k)
    with np.errstate(divide="ignore"):
        terms = logc + xlogy(M - k, eta) + xlogy(k, 1.0 - eta)
    return np.exp(logsumexp(terms, axis=-1))


def _same_factor_sum(eta: np.ndarray, M: int) -> np.ndarray:
    # the summand with eta in place of (1 - eta), reported for comparison only
    eta = np.asarray(eta, dtype=float)[..., None]
    k = np.arange(1, M + 1, dtype=float)
    logc = gammaln(M + 1) - gammaln(k + 1) - gammaln(M - k + 1) + np.log(M / k)
    with np.errstate(divide="ignore"):
        terms = logc + xlogy(M, eta)
    return np.exp(logsumexp(terms, axis=-1))


def _thm5_parts(inst: ProblemInstance, p_yhat, eps_prime):
    p = inst.p_x
    eta = _eta(indirect_excess_table(inst), p_yhat, eps_prime)
    e_m = float(p @ eta ** inst.M)
    cov = float(p @ coverage_sum(eta, inst.M))
    # slack s_x >= 0 means x is typical at gamma = s_x; the tail term counts s_x < gamma
    slack = inst.D1 + math.log2(inst.M) - info_density(p)
    return eta, e_m, cov, slack


def _thm5_value(eps_prime, e_m, cov, slack, p, gamma):
    c = 2.0 ** (1.0 - gamma)
    tail = float(p[slack < gamma].sum())
    terms = {
        "threshold": eps_prime * (1.0 - e_m),
        "no_cover": e_m * (1.0 + c),
        "collision": c * cov,
        "atypical": tail,
    }
    return sum(terms.values()), terms


def thm5_bound(inst: ProblemInstance, P_yhat, eps_prime: float, gamma: float) -> BoundPoint:
    """Bound for log-loss reconstruction of ``X`` with a binned decoder."""
    if not inst.d1.is_logloss:
        raise ConfigError("thm5_bound needs a log-loss direct distortion")
    if not gamma >= 0:
        raise ConfigError(f"gamma must be >= 0, got {gamma}")
    eps_prime = _check_eps(eps_prime)
    p_yhat = _check_pmf(P_yhat, inst.n_yhat, "P_Yhat")
    eta, e_m, cov, slack = _thm5_parts(inst, p_yhat, eps_prime)
    raw, terms = _thm5_value(eps_prime, e_m, cov, slack, inst.p_x, float(gamma))
    alt = float(inst.p_x @ _same_factor_sum(eta, inst.M))
    params = {"P_yhat": p_yhat.tolist(), "eps_prime": eps_prime, "gamma": float(gamma),
              "terms": terms, "same_factor_variant_sum": alt}
    return BoundPoint.make(inst.M, raw, "thm5", UPPER, params)


def thm5_values(inst: ProblemInstance, P_yhat, eps_prime: float, gammas) -> np.ndarray:
    """Raw ``thm5_bound`` values for many gammas at once."""
    p_yhat = _check_pmf(P_yhat, inst.n_yhat, "P_Yhat")
    eps_prime = _check_eps(eps_prime)
    _, e_m, cov, slack = _thm5_parts(inst, p_yhat, eps_prime)
    return np.array([_thm5_value(eps_prime, e_m, cov, slack, inst.p_x, float(g))[0]
                     for g in gammas])


def thm5_gamma_candidates(inst: ProblemInstance, gammas=None) -> np.ndarray:
    """Grid plus every breakpoint of the atypicality term."""
    slack = inst.D1 + math.log2(inst.M) - info_density(inst.p_x)
    hi = float(info_density(inst.p_x).max()) + math.log2(inst.M)
    base = default_gamma_grid(hi) if gammas is None else np.asarray(gammas, dtype=float)
    return np.unique(np.concatenate([[0.0], base, slack[slack >= 0]]))


def thm5_optimize(inst: ProblemInstance, P_candidates: Sequence, eps_grid=None,
                  gammas=None) -> BoundPoint:
    """Minimum of ``thm5_bound`` over the candidate grid.

    Between breakpoints of the atypicality term the bound decreases in
    gamma, so the breakpoints (and 0) contain the exact minimizer.
    """
    if not inst.d1.is_logloss:
        raise ConfigError("thm5_optimize needs a log-loss direct distortion")
    eps_list = eps_prime_candidates(inst) if eps_grid is None else eps_grid
    g_list = thm5_gamma_candidates(inst, gammas)
    best = None
    for pi, P in enumerate(P_candidates):
        p_yhat = _check_pmf(P, inst.n_yhat, "P_Yhat")
        for e in eps_list:
            e = _check_eps(float(e))
            _, e_m, cov, slack = _thm5_parts(inst, p_yhat, e)
            for g in g_list:
                v, _ = _thm5_value(e, e_m, cov, slack, inst.p_x, float(g))
                if best is None or v < best[0]:
                    best = (v, pi, e, float(g))
    _, pi, e, g = best
    return thm5_bound(inst, P_candidates[pi], e, g)


# --------------------------------------------------------------------------
# example


def example_instance(m: int, n: int, p: float, D1: float, D2: float = 0.5,
                     M: int = 1) -> ProblemInstance:
    """Uniform class ``Y`` on ``m`` labels, binomial ``X`` per class, log-loss
    on ``X`` and Hamming on ``Y``."""
    src = build_binomial_class_source(m, n, p)
    return ProblemInstance(src, DistortionSpec.logloss(), DistortionSpec.hamming(m), D1, D2, M)


def example_ach_curve(m: int, n: int, p: float, D1: float, M_range: Iterable[int],
                      D2: float = 0.5, gammas=None) -> BoundCurve:
    """Log-loss bound with uniform codewords and ``eps' = 0`` for each ``M``."""
    if not D2 < 1:
        raise ConfigError("the example needs D2 < 1")
    base = example_instance(m, n, p, D1, D2)
    uniform = np.full(m, 1.0 / m)
    pts = []
    for M in M_range:
        inst = base.with_M(int(M))
        g_list = thm5_gamma_candidates(inst, gammas)
        _, e_m, cov, slack = _thm5_parts(inst, uniform, 0.0)
        vals = [_thm5_value(0.0, e_m, cov, slack, inst.p_x, float(g))[0] for g in g_list]
        pt = thm5_bound(inst, uniform, 0.0, float(g_list[int(np.argmin(vals))]))
        params = dict(pt.params, m=m, n=n, p=p, D1=D1, D2=D2)
        params.pop("P_yhat")
        pts.append(BoundPoint.make(pt.M, pt.raw_value, "example_ach", UPPER, params))
    return BoundCurve("example_ach", UPPER, tuple(pts))
