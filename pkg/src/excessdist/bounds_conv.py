"""Converse (lower) bounds on the minimum excess-distortion probability."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable

import numpy as np
from scipy import optimize

from .curves import LOWER, BoundCurve, BoundPoint
from .errors import ConfigError, RegimeError
from .rd_solvers import RDSolution, check_logloss_regime, solve_joint, solve_r2
from .source_model import ProblemInstance, info_density
from .tilted import TiltedEvaluator, indirect_tilted_table, joint_tilted_table

GAMMA_STEP = 0.1


def default_gamma_grid(upper: float, step: float = GAMMA_STEP) -> np.ndarray:
    """``0, step, ...`` up to and including the first point at or past ``upper``."""
    upper = max(0.0, float(upper)) if math.isfinite(upper) else 0.0
    return np.arange(int(math.ceil(upper / step)) + 1) * step


def _candidate_gammas(scores: np.ndarray, gammas) -> np.ndarray:
    # the sup over gamma sits at a breakpoint of the step function, so those are always added
    finite = scores[np.isfinite(scores)]
    brk = finite[finite >= 0]
    hi = float(finite.max()) if finite.size else 0.0
    base = default_gamma_grid(hi) if gammas is None else np.asarray(gammas, dtype=float)
    if np.any(base < 0):
        raise ConfigError("gamma grid values must be >= 0")
    return np.unique(np.concatenate([[0.0], base, brk]))


def _firing(p_y_given_x, scores, gamma):
    """``A[x, c] = P[score(x, Y, c) >= gamma | X = x]``."""
    return np.einsum("xy,xyc->xc", p_y_given_x, scores >= gamma)


def converse_profile(p_x, p_y_given_x, scores, gammas=None):
    """Per-gamma values of ``inf_P P[score >= gamma] - 2**-gamma``.

    ``scores[x, y, c]`` is the tilted information minus ``log2 M`` for source
    ``(x, y)`` and reconstruction candidate ``c``; the infimum over
    conditionals is a per-``x`` minimum over candidates.  Every returned
    value is on its own a valid lower bound.
    """
    scores = np.asarray(scores, dtype=float)
    grid = _candidate_gammas(scores, gammas)
    vals = np.empty(grid.size)
    for i, g in enumerate(grid):
        vals[i] = float(p_x @ _firing(p_y_given_x, scores, g).min(axis=1)) - 2.0 ** (-g)
    return grid, vals


def converse_lp(p_x, p_y_given_x, scores, gammas=None) -> tuple[float, np.ndarray]:
    """``inf_P max_gamma`` over a finite gamma grid, as a linear program.

    Returns the optimal value and the optimal conditional ``(X, C)``.
    """
    scores = np.asarray(scores, dtype=float)
    grid = _candidate_gammas(scores, gammas)
    nx, _, nc = scores.shape
    nv = nx * nc + 1
    A_ub = np.zeros((grid.size, nv))
    for i, g in enumerate(grid):
        A_ub[i, :-1] = (p_x[:, None] * _firing(p_y_given_x, scores, g)).ravel()
        A_ub[i, -1] = -1.0
    b_ub = 2.0 ** (-grid)
    A_eq = np.zeros((nx, nv))
    for x in range(nx):
        A_eq[x, x * nc:(x + 1) * nc] = 1.0
    c = np.zeros(nv)
    c[-1] = 1.0
    res = optimize.linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=np.ones(nx),
                           bounds=[(0, None)] * (nv - 1) + [(None, None)], method="highs")
    if res.status != 0:
        raise RuntimeError(f"converse LP failed: {res.message}")
    return float(res.fun), res.x[:-1].reshape(nx, nc)


def _converse_point(inst, scores, gammas, exact_lp, theorem, params) -> BoundPoint:
    p = inst.p_x
    pyx = inst.source.p_y_given_x
    grid, vals = converse_profile(p, pyx, scores, gammas)
    i = int(np.argmax(vals))
    raw, gamma = float(vals[i]), float(grid[i])
    params = dict(params, gamma=gamma, mode="sup_inf", grid_size=int(grid.size))
    if exact_lp:
        lp_val, _ = converse_lp(p, pyx, scores, gammas)
        params.update(mode="exact_lp", sup_inf_value=raw)
        raw = lp_val
    return BoundPoint.make(inst.M, raw, theorem, LOWER, params)


def _ratio_filled(ev: TiltedEvaluator) -> TiltedEvaluator:
    # columns without output mass: the prior is an admissible stand-in posterior (density 0)
    table = np.where(np.isnan(ev.log_ratio_table), 0.0, ev.log_ratio_table)
    return TiltedEvaluator(ev.rd_solution, ev.induced_output_marginal, table,
                           ev.d1_table, ev.d2_matrix, ev.yhat_of)


def _saturate(table: np.ndarray, excess: np.ndarray) -> np.ndarray:
    # on excess pairs the indicator is already paid for by P(excess), so it may fire freely
    return np.where(excess, np.inf, table)


def thm2_scores(inst: ProblemInstance, rd: RDSolution) -> np.ndarray:
    """Joint tilted information minus ``log2 M`` over ``(x, y, pair)``; +inf where
    the pair is an excess for ``(x, y)``."""
    if rd.kind != "joint":
        raise ConfigError(f"the general converse needs a joint solution, got {rd.kind!r}")
    ev = _ratio_filled(TiltedEvaluator.from_solution(rd, inst.d1, inst.d2))
    table = joint_tilted_table(ev, inst.D1, inst.D2)
    excess = (ev.d1_table > inst.D1)[:, None, :] | (ev.d2_matrix[:, ev.yhat_of] > inst.D2)[None]
    return _saturate(table, excess) - math.log2(inst.M)


def thm2_bound(inst: ProblemInstance, rd: RDSolution | None = None, gammas=None,
               exact_lp: bool = False) -> BoundPoint:
    """General converse from the joint tilted information.

    For each gamma the infimum over reconstruction conditionals is taken per
    source symbol; the result is the sup over gamma of those values.  With
    ``exact_lp`` the infimum is taken outside the sup over the gamma grid
    instead (never smaller).
    """
    if inst.d1.is_logloss:
        raise ConfigError("log-loss direct distortion: use cor1_bound")
    if rd is None:
        rd = solve_joint(inst.source, inst.d1, inst.d2, inst.D1, inst.D2)
    scores = thm2_scores(inst, rd)
    params = {"lambda1": rd.lambda1, "lambda2": rd.lambda2, "rate": rd.rate}
    return _converse_point(inst, scores, gammas, exact_lp, "thm2", params)


def cor1_scores(inst: ProblemInstance, r2: RDSolution | None = None):
    """Scores for the log-loss converse and the case that produced them."""
    if not inst.d1.is_logloss:
        raise ConfigError("cor1_bound needs a log-loss direct distortion")
    if r2 is None and inst.D2 >= 0:
        try:
            r2 = solve_r2(inst.source, inst.d2, inst.D2)
        except ValueError:
            r2 = None
    regime = check_logloss_regime(inst.source, inst.d2, inst.D1, inst.D2, r2)
    if not regime.applicable:
        raise RegimeError(
            f"log-loss converse needs R2(D2_min) >= H(X) - D1 and D2 >= D2_min "
            f"(R2(D2_min) = {regime.r2_at_min:.6g}, H(X) - D1 = {regime.entropy - inst.D1:.6g})"
        )
    logM = math.log2(inst.M)
    if regime.case == "A":
        s = info_density(inst.p_x) - inst.D1 - logM
        scores = np.broadcast_to(s[:, None, None], (s.size, inst.source.p_xy.shape[1], 1))
        return np.array(scores), regime, r2
    ev = _ratio_filled(TiltedEvaluator.from_solution(r2, d2=inst.d2))
    excess = (ev.d2_matrix[:, ev.yhat_of] > inst.D2)[None]
    return _saturate(indirect_tilted_table(ev, inst.D2), excess) - logM, regime, r2


def cor1_bound(inst: ProblemInstance, gammas=None, exact_lp: bool = False,
               r2: RDSolution | None = None) -> BoundPoint:
    """Converse for log-loss reconstruction of ``X``.

    Case A (``R2(D2) < H(X) - D1``) uses the information of ``X`` alone;
    case B uses the indirect tilted information.
    """
    scores, regime, r2 = cor1_scores(inst, r2)
    params = {"case": regime.case, "r2": regime.r2, "entropy": regime.entropy}
    if r2 is not None and regime.case == "B":
        params["lambda2"] = r2.lambda2
    return _converse_point(inst, scores, gammas, exact_lp, f"cor1_{regime.case}", params)


def example_conv_curve(m: int, M_range: Iterable[int]) -> BoundCurve:
    """``max(0, 1 - M/m)`` for the uniform-class example, in exact arithmetic."""
    pts = []
    for M in M_range:
        v = max(Fraction(0), 1 - Fraction(int(M), int(m)))
        pts.append(BoundPoint.make(M, float(v), "example_conv", LOWER, {"m": int(m)}))
    return BoundCurve("example_conv", LOWER, tuple(pts))
