"""Exhaustive minimum excess-distortion probability on tiny instances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import BudgetExceededError, ConfigError
from .source_model import ProblemInstance, excess_table, indirect_excess_table

DEFAULT_BUDGET = 10 ** 8
STRICT = 1e-15  # improvements smaller than this are summation noise


@dataclass(frozen=True)
class CodeRealization:
    """A deterministic code.  Indices are 0-based.

    ``decoder[i]`` is ``(xhat, yhat)``; for log-loss ``xhat`` is a pmf tuple
    over ``X``.  ``bins`` and ``L`` are only set by the binned scheme.
    """

    M: int
    encoder: tuple
    decoder: tuple
    bins: tuple | None = None
    L: int | None = None

    def excess_probability(self, inst: ProblemInstance) -> float:
        """Exact excess probability of this code on ``inst``."""
        p = inst.p_x
        pi_ind = indirect_excess_table(inst)
        total = 0.0
        if inst.d1.is_logloss:
            for x, u in enumerate(self.encoder):
                q, yhat = self.decoder[u]
                total += p[x] * (pi_ind[x, yhat] if covers(q[x], inst.D1) else 1.0)
            return total
        pi = excess_table(inst)
        for x, u in enumerate(self.encoder):
            xhat, yhat = self.decoder[u]
            total += p[x] * pi[x, xhat, yhat]
        return total

    def to_dict(self) -> dict:
        dec = [[list(map(float, a)) if isinstance(a, tuple) else int(a), int(b)]
               for a, b in self.decoder]
        out = {"M": self.M, "encoder": list(self.encoder), "decoder": dec}
        if self.bins is not None:
            out.update(bins=list(self.bins), L=self.L)
        return out


def covers(qx: float, D1: float) -> bool:
    """``-log2 qx <= D1`` with a relative tolerance for ``qx = 2**-D1``."""
    return qx > 0 and qx >= 2.0 ** (-D1) * (1 - 1e-12)


def restricted_growth_strings(n: int, k: int) -> Iterator[tuple]:
    """Set partitions of ``n`` items into at most ``k`` labelled-by-first-use
    cells, in lexicographic order."""
    if n == 0:
        yield ()
        return
    a = [0] * n

    def rec(i, top):
        if i == n:
            yield tuple(a)
            return
        for v in range(min(top + 2, k)):
            a[i] = v
            yield from rec(i + 1, max(top, v))

    yield from rec(1, 0)


def _check_budget(inst: ProblemInstance, per_cell: int, budget: int) -> None:
    nx = inst.p_x.size
    work = inst.M ** nx * per_cell
    if work > budget:
        raise BudgetExceededError(
            f"enumeration needs M^|X| * choices = {inst.M}^{nx} * {per_cell} = {work:.3g} "
            f"operations, above the budget {budget:.3g}"
        )


def _subset_costs(weights: np.ndarray):
    """Min over columns of the summed rows for every subset of rows (bitmask)."""
    nx, k = weights.shape
    sums = np.zeros((1 << nx, k))
    for mask in range(1, 1 << nx):
        low = (mask & -mask).bit_length() - 1
        sums[mask] = sums[mask & (mask - 1)] + weights[low]
    return sums.min(axis=1), sums.argmin(axis=1)


def _search(nx: int, M: int, cost: np.ndarray):
    best, best_enc = math.inf, None
    for enc in restricted_growth_strings(nx, M):
        total = sum(cost[mk] for mk in _cell_masks(enc, M) if mk)
        if total < best - STRICT:
            best, best_enc = total, enc
    return best, best_enc


def _cell_masks(enc, M):
    masks = [0] * M
    for x, u in enumerate(enc):
        masks[u] |= 1 << x
    return masks


def exact_eps_star(inst: ProblemInstance, budget: int = DEFAULT_BUDGET):
    """``(eps*, optimal code)`` by enumerating partitions of the source.

    The best decoder for a fixed encoder picks, per cell, the pair
    minimizing the cell's excess mass, so only partitions need visiting.
    """
    if inst.d1.is_logloss:
        raise ConfigError("log-loss instance: use exact_eps_star_logloss")
    k = inst.n_xhat * inst.n_yhat
    _check_budget(inst, k, budget)
    nx = inst.p_x.size
    w = inst.p_x[:, None] * excess_table(inst).reshape(nx, k)
    cost, arg = _subset_costs(w)
    best, enc = _search(nx, inst.M, cost)
    dec = []
    for mk in _cell_masks(enc, inst.M):
        c = int(arg[mk]) if mk else 0
        dec.append(divmod(c, inst.n_yhat))
    return best, CodeRealization(inst.M, enc, tuple(dec))


def logloss_cover_size(D1: float, nx: int) -> int:
    """``floor(2**D1)`` capped at the alphabet size."""
    if D1 >= math.log2(nx):
        return nx
    return int(math.floor(2.0 ** D1 + 1e-12))


def _covering_reconstruction(p, w_col, members, L, D1):
    nx = p.size
    order = sorted(members, key=lambda x: (-w_col[x], x))
    cover = order[:L]
    q = np.zeros(nx)
    if not cover:
        return tuple(p.tolist())
    q[cover] = 2.0 ** (-D1)
    top = max(cover, key=lambda x: (p[x], -x))
    q[top] += 1.0 - q.sum()
    return tuple(q.tolist())


def exact_eps_star_logloss(inst: ProblemInstance, budget: int = DEFAULT_BUDGET):
    """``eps*`` when ``X`` is reconstructed as a distribution under log-loss.

    A cell with codeword ``yhat`` can cover ``L = floor(2**D1)`` of its
    symbols; the best choice covers those with the largest success weight
    ``p(x) * P[d2 <= D2 | x]``.
    """
    if not inst.d1.is_logloss:
        raise ConfigError("exact_eps_star_logloss needs a log-loss direct distortion")
    nx = inst.p_x.size
    _check_budget(inst, inst.n_yhat * nx, budget)
    L = logloss_cover_size(inst.D1, nx)
    p = inst.p_x
    w = p[:, None] * (1.0 - indirect_excess_table(inst))
    # per subset and codeword: p(S) - (top-L success weight in S)
    n_sub = 1 << nx
    cost = np.empty(n_sub)
    arg = np.zeros(n_sub, dtype=int)
    cost[0] = 0.0
    for mask in range(1, n_sub):
        members = [x for x in range(nx) if mask >> x & 1]
        top = np.sort(w[members], axis=0)[::-1][:L].sum(axis=0)
        c = int(np.argmax(top))
        arg[mask] = c
        cost[mask] = p[members].sum() - top[c]
    best, enc = _search(nx, inst.M, cost)
    dec = []
    for mk in _cell_masks(enc, inst.M):
        members = [x for x in range(nx) if mk >> x & 1]
        yhat = int(arg[mk]) if mk else 0
        dec.append((_covering_reconstruction(p, w[:, yhat], members, L, inst.D1), yhat))
    return best, CodeRealization(inst.M, enc, tuple(dec), L=L)


def oracle_eps_star(inst: ProblemInstance, budget: int = DEFAULT_BUDGET):
    if inst.d1.is_logloss:
        return exact_eps_star_logloss(inst, budget)
    return exact_eps_star(inst, budget)
