"""Finite joint sources, distortion measures and the excess-probability kernels.

Every information quantity is in bits.  A problem instance couples a joint
source ``P_XY`` with a direct distortion ``d1`` on ``X`` and an indirect
distortion ``d2`` on ``Y``; the encoder sees only ``X``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigError, UndefinedInformationError

MASS_TOL = 1e-12

MATRIX, HAMMING, LOGLOSS = "matrix", "hamming", "logloss"
KINDS = (MATRIX, HAMMING, LOGLOSS)


def _frozen(a: Any) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Alphabet:
    labels: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise ConfigError("alphabet must be nonempty")
        if len(set(labels)) != len(labels):
            raise ConfigError(f"alphabet labels must be distinct: {labels!r}")

    @classmethod
    def range(cls, n: int) -> "Alphabet":
        return cls(tuple(range(n)))

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        return self.labels.index(label)


@dataclass(frozen=True, eq=False)
class JointSource:
    """Joint pmf ``p_xy`` with rows indexed by ``X`` and columns by ``Y``."""

    x_alphabet: Alphabet
    y_alphabet: Alphabet
    p_xy: np.ndarray

    def __post_init__(self):
        p = _frozen(self.p_xy)
        object.__setattr__(self, "p_xy", p)
        if p.shape != (len(self.x_alphabet), len(self.y_alphabet)):
            raise ConfigError(
                f"p_xy has shape {p.shape}, expected "
                f"({len(self.x_alphabet)}, {len(self.y_alphabet)})"
            )
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ConfigError("p_xy entries must be finite and nonnegative")
        if abs(p.sum() - 1.0) > MASS_TOL:
            raise ConfigError(f"p_xy sums to {p.sum()!r}, not 1")

    @classmethod
    def from_array(cls, p_xy, x_labels=None, y_labels=None) -> "JointSource":
        p = np.asarray(p_xy, dtype=float)
        xs = Alphabet(x_labels) if x_labels is not None else Alphabet.range(p.shape[0])
        ys = Alphabet(y_labels) if y_labels is not None else Alphabet.range(p.shape[1])
        return cls(xs, ys, p)

    @property
    def p_x(self) -> np.ndarray:
        return self.p_xy.sum(axis=1)

    @property
    def p_y(self) -> np.ndarray:
        return self.p_xy.sum(axis=0)

    @property
    def p_y_given_x(self) -> np.ndarray:
        """Rows for zero-mass ``x`` are left at zero."""
        px = self.p_x
        out = np.zeros_like(self.p_xy)
        pos = px > 0
        out[pos] = self.p_xy[pos] / px[pos, None]
        return out

    @property
    def support(self) -> np.ndarray:
        return self.p_x > 0

    def restrict_x(self, keep: np.ndarray) -> "JointSource":
        labels = tuple(l for l, k in zip(self.x_alphabet.labels, keep) if k)
        p = self.p_xy[keep]
        return JointSource(Alphabet(labels), self.y_alphabet, p / p.sum())


@dataclass(frozen=True, eq=False)
class DistortionSpec:
    """A distortion measure between a source alphabet and reconstructions.

    ``matrix`` is held for the matrix kind only; Hamming builds its matrix on
    demand and log-loss has no matrix since reconstructions are pmfs over the
    source alphabet.
    """

    kind: str
    matrix: np.ndarray | None = None
    reconstruction_alphabet: Alphabet | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown distortion kind {self.kind!r}")
        if self.kind == MATRIX:
            if self.matrix is None:
                raise ConfigError("matrix distortion needs a matrix")
            m = _frozen(self.matrix)
            if m.ndim != 2 or m.size == 0:
                raise ConfigError("distortion matrix must be a nonempty 2-D array")
            if not np.all(np.isfinite(m)) or np.any(m < 0):
                raise ConfigError("distortion matrix entries must be finite and >= 0")
            object.__setattr__(self, "matrix", m)
            if self.reconstruction_alphabet is None:
                object.__setattr__(self, "reconstruction_alphabet", Alphabet.range(m.shape[1]))
            elif len(self.reconstruction_alphabet) != m.shape[1]:
                raise ConfigError("reconstruction alphabet does not match matrix columns")
        elif self.kind == HAMMING:
            if self.matrix is not None:
                raise ConfigError("hamming distortion takes no explicit matrix")
            if self.reconstruction_alphabet is None:
                raise ConfigError("hamming distortion needs the source alphabet")
        else:
            if self.matrix is not None or self.reconstruction_alphabet is not None:
                raise ConfigError("logloss distortion takes no matrix or reconstruction alphabet")

    @classmethod
    def from_matrix(cls, matrix, labels=None) -> "DistortionSpec":
        return cls(MATRIX, np.asarray(matrix, dtype=float), Alphabet(labels) if labels else None)

    @classmethod
    def hamming(cls, alphabet: Alphabet | int) -> "DistortionSpec":
        if isinstance(alphabet, int):
            alphabet = Alphabet.range(alphabet)
        return cls(HAMMING, None, alphabet)

    @classmethod
    def logloss(cls) -> "DistortionSpec":
        return cls(LOGLOSS)

    @property
    def is_logloss(self) -> bool:
        return self.kind == LOGLOSS

    @property
    def n_reconstructions(self) -> int:
        if self.is_logloss:
            raise ConfigError("log-loss reconstructions form a simplex, not a finite alphabet")
        return len(self.reconstruction_alphabet)

    def as_matrix(self) -> np.ndarray:
        if self.kind == MATRIX:
            return self.matrix
        if self.kind == HAMMING:
            n = len(self.reconstruction_alphabet)
            return _frozen(1.0 - np.eye(n))
        raise ConfigError("log-loss distortion has no finite matrix")

    def restrict_rows(self, keep: np.ndarray) -> "DistortionSpec":
        if self.is_logloss:
            return self
        return DistortionSpec(MATRIX, self.as_matrix()[keep], self.reconstruction_alphabet)


def _check_level(name: str, value) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if math.isnan(v) or v < 0:
        raise ConfigError(f"{name} must be >= 0, got {value!r}")
    return v


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Source, distortion pair, levels and codebook size.

    Zero-probability source symbols are dropped on construction (together
    with the matching rows of a matrix ``d1``).
    """

    source: JointSource
    d1: DistortionSpec
    d2: DistortionSpec
    D1: float
    D2: float
    M: int = 1

    def __post_init__(self):
        object.__setattr__(self, "D1", _check_level("D1", self.D1))
        object.__setattr__(self, "D2", _check_level("D2", self.D2))
        if isinstance(self.M, bool) or int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"M must be a positive integer, got {self.M!r}")
        object.__setattr__(self, "M", int(self.M))
        if self.d2.is_logloss:
            raise ConfigError("logloss is only permitted as the direct distortion d1")
        nx, ny = self.source.p_xy.shape
        if self.d1.kind == HAMMING and len(self.d1.reconstruction_alphabet) != nx:
            raise ConfigError("hamming d1 needs a reconstruction alphabet the size of X")
        if self.d1.kind == MATRIX and self.d1.matrix.shape[0] != nx:
            raise ConfigError(f"d1 matrix needs {nx} rows, has {self.d1.matrix.shape[0]}")
        if self.d2.kind == HAMMING and len(self.d2.reconstruction_alphabet) != ny:
            raise ConfigError("hamming d2 needs a reconstruction alphabet the size of Y")
        if self.d2.kind == MATRIX and self.d2.matrix.shape[0] != ny:
            raise ConfigError(f"d2 matrix needs {ny} rows, has {self.d2.matrix.shape[0]}")
        keep = self.source.support
        if not keep.all():
            object.__setattr__(self, "source", self.source.restrict_x(keep))
            object.__setattr__(self, "d1", self.d1.restrict_rows(keep))

    def with_M(self, M: int) -> "ProblemInstance":
        return replace(self, M=M)

    def with_levels(self, D1=None, D2=None) -> "ProblemInstance":
        return replace(self, D1=self.D1 if D1 is None else D1, D2=self.D2 if D2 is None else D2)

    @property
    def p_x(self) -> np.ndarray:
        return self.source.p_x

    @property
    def n_xhat(self) -> int:
        return self.d1.n_reconstructions

    @property
    def n_yhat(self) -> int:
        return self.d2.n_reconstructions


# --------------------------------------------------------------------------
# elementary quantities


def entropy(p: Sequence[float]) -> float:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("entropy needs a probability mass function")
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def binary_entropy(q: float) -> float:
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"binary entropy needs 0 <= q <= 1, got {q}")
    return entropy([q, 1.0 - q])


def info_density(p_x: np.ndarray | JointSource) -> np.ndarray:
    """``log2(1 / p_x(x))`` for every symbol; all symbols must carry mass."""
    if isinstance(p_x, JointSource):
        p_x = p_x.p_x
    p_x = np.asarray(p_x, dtype=float)
    if np.any(p_x <= 0):
        bad = np.flatnonzero(p_x <= 0).tolist()
        raise UndefinedInformationError(f"information undefined off the support (symbols {bad})")
    return -np.log2(p_x)


def surrogate_distortion(source: JointSource, d2: DistortionSpec) -> np.ndarray:
    """``E[d2(Y, yhat) | X = x]`` as an ``|X| x |Yhat|`` matrix."""
    if d2.is_logloss:
        raise ConfigError("the indirect distortion cannot be logloss")
    return source.p_y_given_x @ d2.as_matrix()


def d_min(p_x: np.ndarray, d: np.ndarray) -> float:
    """Least expected distortion reachable at finite rate."""
    return float(np.dot(p_x, np.asarray(d).min(axis=1)))


def logloss_distortion(x: int, q: np.ndarray) -> float:
    qx = float(q[x])
    return math.inf if qx <= 0 else -math.log2(qx)


def indirect_excess_table(inst: ProblemInstance) -> np.ndarray:
    """``pi'(x, yhat) = P[d2(Y, yhat) > D2 | X = x]``, shape ``|X| x |Yhat|``."""
    exceed = (inst.d2.as_matrix() > inst.D2).astype(float)
    return np.clip(inst.source.p_y_given_x @ exceed, 0.0, 1.0)


def direct_excess_table(inst: ProblemInstance) -> np.ndarray:
    """Indicator ``d1(x, xhat) > D1`` for finite ``d1``, shape ``|X| x |Xhat|``."""
    return (inst.d1.as_matrix() > inst.D1).astype(float)


def excess_table(inst: ProblemInstance) -> np.ndarray:
    """``pi(x, xhat, yhat)`` over the full product alphabet.

    Shape ``|X| x |Xhat| x |Yhat|``; flattening the last two axes in C order
    gives the pair index ``xhat * |Yhat| + yhat`` used everywhere else.
    """
    direct = direct_excess_table(inst)[:, :, None]
    indirect = indirect_excess_table(inst)[:, None, :]
    return np.where(direct > 0, 1.0, indirect)


def excess_kernel_pi(inst: ProblemInstance, x: int, xhat, yhat: int) -> float:
    """``P[{d1(x, xhat) > D1} or {d2(Y, yhat) > D2} | X = x]``.

    ``xhat`` is an index, or a pmf over ``X`` when ``d1`` is log-loss, or
    ``None`` to drop the direct clause (the indirect-only kernel).
    """
    nx = inst.source.p_xy.shape[0]
    if not 0 <= x < nx:
        raise ConfigError(f"source index {x} outside 0..{nx - 1}")
    if not 0 <= yhat < inst.n_yhat:
        raise ConfigError(f"yhat index {yhat} outside 0..{inst.n_yhat - 1}")
    if xhat is not None:
        if inst.d1.is_logloss:
            q = np.asarray(xhat, dtype=float)
            if q.shape != (nx,):
                raise ConfigError(f"logloss reconstruction must have length {nx}")
            d1 = logloss_distortion(x, q)
        else:
            if not 0 <= int(xhat) < inst.n_xhat:
                raise ConfigError(f"xhat index {xhat} outside 0..{inst.n_xhat - 1}")
            d1 = float(inst.d1.as_matrix()[x, int(xhat)])
        if d1 > inst.D1:
            return 1.0
    return float(indirect_excess_table(inst)[x, yhat])


def build_binomial_class_source(m: int, n: int, p: float) -> JointSource:
    """Uniform class ``Y`` on ``m`` values; ``X`` is Binomial(n, p) placed in
    the ``Y``-th block of ``n + 1`` consecutive symbols."""
    if m < 2 or n < 1 or not 0.0 <= p <= 1.0:
        raise ConfigError(f"need m >= 2, n >= 1, 0 <= p <= 1 (got m={m}, n={n}, p={p})")
    phi = stats.binom.pmf(np.arange(n + 1), n, p)
    phi = phi / phi.sum()
    p_xy = np.zeros((m * (n + 1), m))
    for y in range(m):
        p_xy[y * (n + 1):(y + 1) * (n + 1), y] = phi / m
    return JointSource.from_array(p_xy)


# --------------------------------------------------------------------------
# JSON


def _level_from_json(v):
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity", "+inf"):
        return math.inf
    return v


def _level_to_json(v: float):
    return "inf" if math.isinf(v) else v


def distortion_from_dict(d: dict, source_alphabet: Alphabet) -> DistortionSpec:
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError("distortion entries need a 'kind'")
    kind = d["kind"]
    if kind == MATRIX:
        if "matrix" not in d:
            raise ConfigError("matrix distortion needs 'matrix'")
        labels = d.get("reconstruction_alphabet")
        return DistortionSpec(MATRIX, np.asarray(d["matrix"], dtype=float),
                              Alphabet(labels) if labels is not None else None)
    if kind == HAMMING:
        labels = d.get("reconstruction_alphabet")
        alpha = Alphabet(labels) if labels is not None else source_alphabet
        if alpha != source_alphabet:
            raise ConfigError("hamming reconstruction alphabet must equal the source alphabet")
        return DistortionSpec.hamming(alpha)
    if kind == LOGLOSS:
        return DistortionSpec.logloss()
    raise ConfigError(f"unknown distortion kind {kind!r}")


def instance_from_dict(d: dict, M: int = 1) -> ProblemInstance:
    required = ("x_alphabet", "y_alphabet", "p_xy", "d1", "d2", "D1", "D2")
    missing = [k for k in required if k not in d]
    if missing:
        raise ConfigError(f"instance is missing fields: {', '.join(missing)}")
    try:
        source = JointSource(Alphabet(d["x_alphabet"]), Alphabet(d["y_alphabet"]),
                             np.asarray(d["p_xy"], dtype=float))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad p_xy: {exc}") from None
    d1 = distortion_from_dict(d["d1"], source.x_alphabet)
    if d.get("d2", {}).get("kind") == LOGLOSS:
        raise ConfigError("logloss is forbidden for d2")
    d2 = distortion_from_dict(d["d2"], source.y_alphabet)
    return ProblemInstance(source, d1, d2, _level_from_json(d["D1"]),
                           _level_from_json(d["D2"]), M)


def distortion_to_dict(spec: DistortionSpec) -> dict:
    out: dict = {"kind": spec.kind}
    if spec.kind == MATRIX:
        out["matrix"] = spec.matrix.tolist()
        out["reconstruction_alphabet"] = list(spec.reconstruction_alphabet.labels)
    elif spec.kind == HAMMING:
        out["reconstruction_alphabet"] = list(spec.reconstruction_alphabet.labels)
    return out


def instance_to_dict(inst: ProblemInstance) -> dict:
    s = inst.source
    return {
        "x_alphabet": list(s.x_alphabet.labels),
        "y_alphabet": list(s.y_alphabet.labels),
        "p_xy": s.p_xy.tolist(),
        "d1": distortion_to_dict(inst.d1),
        "d2": distortion_to_dict(inst.d2),
        "D1": _level_to_json(inst.D1),
        "D2": _level_to_json(inst.D2),
    }
