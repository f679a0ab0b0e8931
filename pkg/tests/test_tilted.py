import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from excessdist import rd_solvers as rd
from excessdist.errors import UndefinedInformationError
from excessdist.source_model import DistortionSpec, JointSource, surrogate_distortion
from excessdist.tilted import (
    TiltedEvaluator,
    indirect_tilted,
    indirect_tilted_table,
    joint_tilted,
    joint_tilted_table,
    mutual_info_density,
)

from helpers import random_finite_instance, random_source


def _joint(inst):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", rd.DegenerateSlopeWarning)
        return rd.solve_joint(inst.source, inst.d1, inst.d2, inst.D1, inst.D2)


def test_density_averages_to_rate():
    p = np.array([0.5, 0.3, 0.2])
    d = DistortionSpec.hamming(3)
    sol = rd.solve_r1(p, d, 0.15)
    ev = TiltedEvaluator.from_solution(sol, d1=d)
    joint = p[:, None] * sol.conditional
    on = joint > 0
    assert (joint[on] * ev.log_ratio_table[on]).sum() == pytest.approx(sol.rate, abs=1e-9)


def test_scalar_and_table_agree_indirect():
    rng = np.random.default_rng(3)
    src = random_source(rng, 4, 3, sparsity=0.0)
    d2 = DistortionSpec.hamming(3)
    D2 = 0.5
    sol = rd.solve_r2(src, d2, D2)
    ev = TiltedEvaluator.from_solution(sol, d2=d2)
    table = indirect_tilted_table(ev, D2)
    for x in range(4):
        for y in range(3):
            for k in range(3):
                if ev.induced_output_marginal[k] > 0:
                    assert indirect_tilted(ev, x, y, k, D2) == pytest.approx(table[x, y, k])


def test_tilted_is_flat_across_used_columns():
    # the achiever is a Gibbs kernel, so density + slope * surrogate cost depends on x only
    rng = np.random.default_rng(8)
    src = random_source(rng, 4, 3, sparsity=0.0)
    d2 = DistortionSpec.from_matrix(rng.random((3, 3)))
    sd = surrogate_distortion(src, d2)
    sol = rd.solve_r2(src, d2, float(src.p_x @ sd.min(axis=1)) + 0.05)
    ev = TiltedEvaluator.from_solution(sol, d2=d2)
    used = ev.induced_output_marginal > 1e-6
    vals = ev.log_ratio_table[:, used] + sol.lambda2 * sd[:, used]
    assert np.ptp(vals, axis=1).max() < 1e-6


def test_expected_joint_tilted_is_rate_when_constraints_bind():
    rng = np.random.default_rng(21)
    for _ in range(10):
        inst = random_finite_instance(rng)
        sol = _joint(inst)
        ev = TiltedEvaluator.from_solution(sol, inst.d1, inst.d2)
        t = joint_tilted_table(ev, inst.D1, inst.D2)
        w = inst.source.p_xy[:, :, None] * sol.conditional[:, None, :]
        on = w > 0
        # complementary slackness kills the penalty terms on average
        assert (w[on] * t[on]).sum() == pytest.approx(sol.rate, abs=1e-6)


def test_joint_scalar_matches_table():
    rng = np.random.default_rng(5)
    inst = random_finite_instance(rng)
    sol = _joint(inst)
    ev = TiltedEvaluator.from_solution(sol, inst.d1, inst.d2)
    t = joint_tilted_table(ev, inst.D1, inst.D2)
    nx, ny = inst.source.p_xy.shape
    for r in np.flatnonzero(ev.induced_output_marginal > 0):
        for x in range(nx):
            for y in range(ny):
                assert joint_tilted(ev, x, y, int(r), inst.D1, inst.D2) == pytest.approx(t[x, y, r])


def test_zero_mass_column_is_undefined():
    p = np.array([0.9, 0.1])
    d = DistortionSpec.from_matrix(np.array([[0.0, 5.0, 5.0], [1.0, 0.0, 5.0]]))
    sol = rd.solve_r1(p, d, 0.05)
    ev = TiltedEvaluator.from_solution(sol, d1=d)
    assert ev.induced_output_marginal[2] < 1e-9
    if ev.induced_output_marginal[2] == 0:
        with pytest.raises(UndefinedInformationError):
            mutual_info_density(ev, 0, 2)
        assert np.isnan(ev.log_ratio_table[:, 2]).all()


def test_tables_are_read_only():
    p = np.array([0.5, 0.5])
    d = DistortionSpec.hamming(2)
    ev = TiltedEvaluator.from_solution(rd.solve_r1(p, d, 0.1), d1=d)
    with pytest.raises(ValueError):
        ev.log_ratio_table[0, 0] = 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_density_mean_is_rate_direct(seed):
    rng = np.random.default_rng(seed)
    nx, k = int(rng.integers(2, 5)), int(rng.integers(2, 4))
    p = rng.dirichlet(np.ones(nx))
    d = DistortionSpec.from_matrix(rng.random((nx, k)))
    lo = float(p @ d.as_matrix().min(axis=1))
    sol = rd.solve_r1(p, d, lo + 0.1 * rng.random() + 1e-3)
    ev = TiltedEvaluator.from_solution(sol, d1=d)
    w = p[:, None] * sol.conditional
    on = w > 0
    assert (w[on] * ev.log_ratio_table[on]).sum() == pytest.approx(sol.rate, abs=1e-7)
