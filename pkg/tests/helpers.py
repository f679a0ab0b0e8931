"""Random tiny instances shared by the test modules."""

from __future__ import annotations

import math

import numpy as np

from excessdist.source_model import DistortionSpec, JointSource, ProblemInstance, surrogate_distortion


def random_source(rng, nx, ny, sparsity=0.3):
    p = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
    p[rng.random((nx, ny)) < sparsity] = 0.0
    p[np.arange(nx), rng.integers(0, ny, nx)] += 0.02  # every x keeps mass
    return JointSource.from_array(p / p.sum())


def random_matrix(rng, rows, cols):
    return rng.integers(0, 3, size=(rows, cols)).astype(float)


def random_level(rng, p, d):
    lo = float(p @ d.min(axis=1))
    hi = float(p @ d.mean(axis=1))
    return round(lo + rng.random() * max(hi - lo, 0.0) + 0.01, 3)


def random_finite_instance(rng, M=None, d1_inf=False):
    nx, ny = int(rng.integers(2, 6)), int(rng.integers(2, 4))
    kx, ky = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    src = random_source(rng, nx, ny)
    d1 = random_matrix(rng, nx, kx)
    d2 = random_matrix(rng, ny, ky)
    spec2 = DistortionSpec.from_matrix(d2)
    D1 = math.inf if d1_inf else random_level(rng, src.p_x, d1)
    D2 = random_level(rng, src.p_x, surrogate_distortion(src, spec2))
    M = int(rng.integers(1, 4)) if M is None else M
    return ProblemInstance(src, DistortionSpec.from_matrix(d1), spec2, D1, D2, M)


def random_logloss_instance(rng, M=None):
    nx, ny = int(rng.integers(2, 6)), int(rng.integers(2, 4))
    ky = int(rng.integers(1, 4))
    src = random_source(rng, nx, ny)
    spec2 = DistortionSpec.from_matrix(random_matrix(rng, ny, ky))
    D1 = float(rng.choice([0.0, 0.5, 1.0, 1.5, 2.0, 3.0]))
    D2 = random_level(rng, src.p_x, surrogate_distortion(src, spec2))
    M = int(rng.integers(1, 4)) if M is None else M
    return ProblemInstance(src, DistortionSpec.logloss(), spec2, D1, D2, M)
