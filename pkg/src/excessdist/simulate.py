"""Monte Carlo simulation of the random-coding constructions behind the bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ConfigError
from .oracle import logloss_cover_size
from .source_model import ProblemInstance, excess_table, indirect_excess_table, info_density

BLOCK = 4096  # trials per independent stream


@dataclass(frozen=True)
class SimReport:
    trials: int
    excess_count: int
    estimate: float
    std_error: float
    seed: int

    @classmethod
    def from_counts(cls, trials: int, excess: int, seed: int) -> "SimReport":
        est = excess / trials
        return cls(trials, excess, est, math.sqrt(est * (1.0 - est) / trials), seed)

    def to_dict(self) -> dict:
        return {"trials": self.trials, "excess_count": self.excess_count,
                "estimate": self.estimate, "std_error": self.std_error, "seed": self.seed}


def _blocks(seed: int, trials: int) -> Iterator[tuple[np.random.Generator, int]]:
    """One Philox stream per block of trials, keyed by ``(seed, block index)``."""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    done, b = 0, 0
    while done < trials:
        n = min(BLOCK, trials - done)
        yield np.random.Generator(np.random.Philox(key=int(seed) | (b << 64))), n
        done += n
        b += 1


def _draw_source(rng, inst, n):
    p = inst.source.p_xy
    idx = rng.choice(p.size, size=n, p=p.ravel())
    return np.divmod(idx, p.shape[1])


def _pmf(q, size, name):
    q = np.asarray(q, dtype=float).ravel()
    if q.size != size or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
        raise ConfigError(f"{name} must be a pmf with {size} entries")
    return q / q.sum()


def _excess(inst, x, y, xhat, yhat):
    d2 = inst.d2.as_matrix()[y, yhat] > inst.D2
    if math.isinf(inst.D1):
        return d2
    return (inst.d1.as_matrix()[x, xhat] > inst.D1) | d2


def simulate_thm1_code(inst: ProblemInstance, Q, trials: int, seed: int) -> SimReport:
    """Codebook of ``M`` pairs drawn from ``Q``; each ``x`` goes to the pair
    with the least excess kernel (lowest index on ties)."""
    if inst.d1.is_logloss:
        raise ConfigError("simulate_thm1_code needs a finite reconstruction alphabet")
    nx = inst.p_x.size
    q = _pmf(Q, inst.n_xhat * inst.n_yhat, "Q")
    pi = excess_table(inst).reshape(nx, -1)
    count = 0
    for rng, n in _blocks(seed, trials):
        book = rng.choice(q.size, size=(n, inst.M), p=q)
        x, y = _draw_source(rng, inst, n)
        u = np.argmin(pi[x[:, None], book], axis=1)
        xhat, yhat = np.divmod(book[np.arange(n), u], inst.n_yhat)
        count += int(_excess(inst, x, y, xhat, yhat).sum())
    return SimReport.from_counts(trials, count, int(seed))


def simulate_thm4_code(inst: ProblemInstance, P_yhat, eps_prime: float, trials: int,
                       seed: int) -> SimReport:
    """Codebook from ``P_yhat``; ``x`` takes the first codeword whose
    indirect kernel is at most ``eps_prime`` (else the first codeword)."""
    if math.isfinite(inst.D1):
        raise ConfigError("simulate_thm4_code is for instances with D1 = inf")
    p_yhat = _pmf(P_yhat, inst.n_yhat, "P_Yhat")
    pi_ind = indirect_excess_table(inst)
    count = 0
    for rng, n in _blocks(seed, trials):
        book = rng.choice(p_yhat.size, size=(n, inst.M), p=p_yhat)
        x, y = _draw_source(rng, inst, n)
        u = np.argmax(pi_ind[x[:, None], book] <= eps_prime, axis=1)
        yhat = book[np.arange(n), u]
        count += int((inst.d2.as_matrix()[y, yhat] > inst.D2).sum())
    return SimReport.from_counts(trials, count, int(seed))


def simulate_thm5_code(inst: ProblemInstance, P_yhat, eps_prime: float, gamma: float,
                       trials: int, seed: int) -> SimReport:
    """Codebook from ``P_yhat`` with random binning of the typical symbols.

    Each ``x`` picks uniformly among acceptable codewords (all codewords if
    none is acceptable) and a uniform bin among ``L = floor(2**D1)``.  The
    decoder for index ``i`` reconstructs ``X`` uniformly over the typical
    symbols alone in their (index, bin) cell, or as the prior if there are
    none.
    """
    if not inst.d1.is_logloss:
        raise ConfigError("simulate_thm5_code needs a log-loss direct distortion")
    p_yhat = _pmf(P_yhat, inst.n_yhat, "P_Yhat")
    p = inst.p_x
    nx, M = p.size, inst.M
    L = logloss_cover_size(inst.D1, nx) if math.isfinite(inst.D1) else nx
    iota = info_density(p)
    typical = iota <= inst.D1 + math.log2(M) - gamma
    prior_ok = iota <= inst.D1
    pi_ind = indirect_excess_table(inst)
    d2 = inst.d2.as_matrix()
    count = 0
    for rng, n in _blocks(seed, trials):
        book = rng.choice(p_yhat.size, size=(n, M), p=p_yhat)
        ok = pi_ind[np.arange(nx)[None, :, None], book[:, None, :]] <= eps_prime  # (n, X, M)
        ok |= ~ok.any(axis=2, keepdims=True)
        rank = np.floor(rng.random((n, nx)) * ok.sum(axis=2)).astype(int)
        f = np.argmax(np.cumsum(ok, axis=2) > rank[..., None], axis=2)  # (n, X)
        bins = rng.integers(0, L, size=(n, nx))
        x0, y0 = _draw_source(rng, inst, n)
        rows = np.arange(n)
        i = f[rows, x0]
        in_cell = typical[None, :] & (f == i[:, None])
        same = (bins[:, :, None] == bins[:, None, :]) & in_cell[:, None, :]
        alone = in_cell & (same.sum(axis=2) == 1)
        direct_ok = np.where(alone.any(axis=1), alone[rows, x0], prior_ok[x0])
        indirect_bad = d2[y0, book[rows, i]] > inst.D2
        count += int((~direct_ok | indirect_bad).sum())
    return SimReport.from_counts(trials, count, int(seed))
