"""Information densities and tilted informations of rate-distortion achievers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UndefinedInformationError
from .rd_solvers import RDSolution
from .source_model import DistortionSpec

MASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TiltedEvaluator:
    """Bayes-inverted view of an achieving conditional.

    ``log_ratio_table[x, r]`` is ``log2 P(r | x) / P(r)``, which equals the
    posterior-to-prior ratio of ``x`` given reconstruction ``r``.  Columns
    with no induced output mass hold NaN.  ``d1_table`` and ``d2_matrix``
    carry what the tilted forms need: ``d1(x, r)`` per column and
    ``d2(y, yhat)`` with ``yhat_of`` mapping columns to ``yhat`` indices.
    """

    rd_solution: RDSolution
    induced_output_marginal: np.ndarray
    log_ratio_table: np.ndarray
    d1_table: np.ndarray | None = None
    d2_matrix: np.ndarray | None = None
    yhat_of: np.ndarray | None = None

    @classmethod
    def from_solution(cls, sol: RDSolution, d1: DistortionSpec | None = None,
                      d2: DistortionSpec | None = None) -> "TiltedEvaluator":
        q = sol.p_x @ sol.conditional
        if abs(q.sum() - 1.0) > MASS_TOL:
            raise ValueError("achieving conditional does not induce a pmf")
        with np.errstate(divide="ignore", invalid="ignore"):
            table = np.log2(sol.conditional / q)
        table[:, q <= 0] = np.nan

        d1_table = yhat_of = None
        if sol.kind == "indirect":
            yhat_of = np.asarray(sol.outputs, dtype=int)
        elif sol.kind == "joint":
            yhat_of = np.array([k for _, k in sol.outputs], dtype=int)
            if d1 is not None:
                xhat_of = np.array([i for i, _ in sol.outputs], dtype=int)
                d1_table = d1.as_matrix()[:, xhat_of]
        elif sol.kind == "logloss_joint":
            yhat_of = np.array([k for _, k in sol.outputs], dtype=int)
            with np.errstate(divide="ignore"):
                d1_table = np.array([-np.log2(post) for post, _ in sol.outputs]).T
        elif sol.kind == "direct" and d1 is not None:
            d1_table = d1.as_matrix()
        d2m = d2.as_matrix() if d2 is not None else None
        for a in (table, d1_table, d2m, yhat_of, q):
            if a is not None:
                a.setflags(write=False)
        return cls(sol, q, table, d1_table, d2m, yhat_of)

    @property
    def n_outputs(self) -> int:
        return self.log_ratio_table.shape[1]

    def density(self, x: int, r: int) -> float:
        v = self.log_ratio_table[x, r]
        if math.isnan(v):
            raise UndefinedInformationError(f"reconstruction {r} has no induced output mass")
        return float(v)


def mutual_info_density(ev: TiltedEvaluator, x: int, r: int) -> float:
    """``log2 P(x | r) / P(x)`` under the achiever, in bits."""
    return ev.density(x, r)


def indirect_tilted(ev: TiltedEvaluator, x: int, y: int, yhat: int, D2: float) -> float:
    """``i(x; yhat) + lambda2 * (d2(y, yhat) - D2)`` for an indirect solution."""
    lam = ev.rd_solution.lambda2 or 0.0
    r = _column_for_yhat(ev, yhat)
    return ev.density(x, r) + lam * (float(ev.d2_matrix[y, yhat]) - D2)


def joint_tilted(ev: TiltedEvaluator, x: int, y: int, r: int, D1: float, D2: float) -> float:
    """Joint tilted information at achiever column ``r`` (an ``(xhat, yhat)``
    pair, or a ``(posterior, yhat)`` pair for the log-loss achiever)."""
    sol = ev.rd_solution
    lam1 = sol.lambda1 or 0.0
    lam2 = sol.lambda2 or 0.0
    yhat = int(ev.yhat_of[r])
    out = ev.density(x, r)
    if lam1:
        out += lam1 * (float(ev.d1_table[x, r]) - D1)
    if lam2:
        out += lam2 * (float(ev.d2_matrix[y, yhat]) - D2)
    return out


def _column_for_yhat(ev: TiltedEvaluator, yhat: int) -> int:
    hits = np.flatnonzero(ev.yhat_of == yhat)
    if hits.size == 0:
        raise UndefinedInformationError(f"yhat {yhat} is not an output of the achiever")
    return int(hits[0])


def indirect_tilted_table(ev: TiltedEvaluator, D2: float) -> np.ndarray:
    """All indirect tilted values, shape ``|X| x |Y| x |Yhat|``."""
    lam = ev.rd_solution.lambda2 or 0.0
    ratio = ev.log_ratio_table
    pen = ev.d2_matrix[:, ev.yhat_of] - D2
    return ratio[:, None, :] + lam * pen[None, :, :]


def joint_tilted_table(ev: TiltedEvaluator, D1: float, D2: float) -> np.ndarray:
    """All joint tilted values over achiever columns, shape ``|X| x |Y| x R``."""
    sol = ev.rd_solution
    lam1 = sol.lambda1 or 0.0
    lam2 = sol.lambda2 or 0.0
    out = np.array(ev.log_ratio_table[:, None, :], dtype=float)
    if lam1:
        pen = (ev.d1_table - D1)[:, None, :]
        with np.errstate(invalid="ignore"):
            out = out + lam1 * pen
        # zero posterior mass: infinite log-loss, a certain excess; any value is admissible there
        out = np.where(np.isinf(pen) & np.isnan(out), np.inf, out)
    if lam2:
        out = out + lam2 * (ev.d2_matrix[:, ev.yhat_of] - D2)[None, :, :]
    ny = ev.d2_matrix.shape[0] if ev.d2_matrix is not None else out.shape[1]
    return np.array(np.broadcast_to(out, (out.shape[0], ny, out.shape[2])))
