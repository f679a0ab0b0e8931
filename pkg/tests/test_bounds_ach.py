import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from excessdist import bounds_ach as ach
from excessdist.errors import ConfigError
from excessdist.source_model import DistortionSpec, JointSource, ProblemInstance, excess_table

from helpers import random_finite_instance, random_logloss_instance

H2 = DistortionSpec.hamming(2)


def bsc_instance(M=1, D1=0.0, D2=0.0, eps=0.1):
    src = JointSource.from_array(np.array([[0.5 - eps / 2, eps / 2], [eps / 2, 0.5 - eps / 2]]))
    return ProblemInstance(src, H2, H2, D1, D2, M)


def identity_instance(M, D2=0.0):
    # Y = X uniform binary, no direct constraint, a single dummy xhat
    src = JointSource.from_array(np.diag([0.5, 0.5]))
    return ProblemInstance(src, DistortionSpec.from_matrix(np.zeros((2, 1))), H2, math.inf, D2, M)


class TestThm1:
    def test_point_mass_value(self):
        q = np.array([1.0, 0.0, 0.0, 0.0])
        for M in (1, 2, 5):
            assert ach.thm1_bound(bsc_instance(M), q).value == pytest.approx(0.55, abs=1e-15)

    def test_no_constraints_gives_zero(self):
        inst = bsc_instance(D1=math.inf, D2=math.inf)
        assert ach.thm1_bound(inst, np.full(4, 0.25)).value == 0.0

    def test_single_codeword_is_average_kernel(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            inst = random_finite_instance(rng, M=1)
            k = inst.n_xhat * inst.n_yhat
            q = rng.dirichlet(np.ones(k))
            pi = excess_table(inst).reshape(inst.p_x.size, k)
            assert ach.thm1_bound(inst, q).raw_value == pytest.approx(inst.p_x @ pi @ q, abs=1e-12)

    def test_large_M_limit(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            inst = random_finite_instance(rng, M=2 ** 20)
            k = inst.n_xhat * inst.n_yhat
            pi = excess_table(inst).reshape(inst.p_x.size, k)
            q = rng.dirichlet(np.ones(k))
            assert ach.thm1_bound(inst, q).raw_value == pytest.approx(inst.p_x @ pi.min(axis=1), abs=1e-6)

    def test_rejects_bad_q(self):
        with pytest.raises(ConfigError):
            ach.thm1_bound(bsc_instance(), np.array([0.5, 0.5]))
        with pytest.raises(ConfigError):
            ach.thm1_bound(bsc_instance(), np.array([0.5, 0.6, 0.0, -0.1]))

    def test_optimizer_budget_zero_is_best_candidate(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            inst = random_finite_instance(rng)
            cands = ach.thm1_candidates(inst)
            best = min(ach.thm1_bound(inst, q).raw_value for q in cands.values())
            _, pt = ach.thm1_optimize_q(inst, cands, budget=0)
            assert pt.raw_value == best

    def test_optimizer_reports_exact_value_at_q(self):
        rng = np.random.default_rng(10)
        inst = random_finite_instance(rng, M=3)
        q, pt = ach.thm1_optimize_q(inst)
        assert ach.thm1_bound(inst, q).raw_value == pt.raw_value


class TestThm4:
    def test_identity_value(self):
        pt = ach.thm4_bound(identity_instance(2), [0.5, 0.5], 0.0)
        assert pt.value == pytest.approx(0.25, abs=1e-15)

    def test_vacuous_threshold(self):
        assert ach.thm4_bound(identity_instance(3), [0.5, 0.5], 1.0).value == 1.0

    @pytest.mark.parametrize("M", [1, 2, 3, 7])
    def test_matches_thm1_when_kernel_is_binary(self, M):
        rng = np.random.default_rng(M)
        for _ in range(5):
            P = rng.dirichlet(np.ones(2))
            inst = identity_instance(M)
            a = ach.thm4_bound(inst, P, 0.0).raw_value
            b = ach.thm1_bound(inst, P).raw_value
            assert abs(a - b) <= 1e-12

    def test_rejects_finite_d1(self):
        with pytest.raises(ConfigError):
            ach.thm4_bound(bsc_instance(), [0.5, 0.5], 0.0)

    def test_rejects_eps_out_of_range(self):
        with pytest.raises(ConfigError):
            ach.thm4_bound(identity_instance(1), [0.5, 0.5], 1.5)


class TestThm5:
    def test_coverage_sum_small_M_by_hand(self):
        eta = np.array([0.0, 0.3, 1.0])
        M = 3
        ref = [sum(math.comb(M, k) * M / k * e ** (M - k) * (1 - e) ** k for k in range(1, M + 1))
               for e in eta]
        assert np.allclose(ach.coverage_sum(eta, M), ref, rtol=1e-13, atol=0)

    def test_coverage_sum_huge_M_is_finite(self):
        v = ach.coverage_sum(np.array([0.5, 0.9]), 5000)
        assert np.all(np.isfinite(v))

    def test_example_eta(self):
        inst = ach.example_instance(10, 6, 0.1, 6.0, 0.5, M=4)
        eta, e_m, _, _ = ach._thm5_parts(inst, np.full(10, 0.1), 0.0)
        assert np.allclose(eta, 0.9)
        assert e_m == pytest.approx(0.9 ** 4)

    def test_gamma_zero_clips_to_one(self):
        inst = ach.example_instance(10, 6, 0.1, 6.0, 0.5, M=4)
        pt = ach.thm5_bound(inst, np.full(10, 0.1), 0.0, 0.0)
        assert pt.raw_value > 1 and pt.value == 1.0

    def test_values_match_bound(self):
        inst = ach.example_instance(10, 6, 0.1, 6.0, 0.5, M=7)
        P = np.full(10, 0.1)
        gs = [0.0, 0.5, 1.3, 4.0]
        vals = ach.thm5_values(inst, P, 0.0, gs)
        for g, v in zip(gs, vals):
            assert ach.thm5_bound(inst, P, 0.0, g).raw_value == v

    def test_terms_reported(self):
        inst = ach.example_instance(10, 6, 0.1, 6.0, 0.5, M=7)
        pt = ach.thm5_bound(inst, np.full(10, 0.1), 0.0, 2.0)
        assert sum(pt.params["terms"].values()) == pytest.approx(pt.raw_value)
        assert pt.params["terms"]["threshold"] == 0.0
        assert "same_factor_variant_sum" in pt.params

    def test_large_d1_kills_atypical_term(self):
        inst = ach.example_instance(10, 6, 0.1, 30.0, 0.5, M=3)
        pt = ach.thm5_bound(inst, np.full(10, 0.1), 0.0, 1.0)
        assert pt.params["terms"]["atypical"] == 0.0

    def test_negative_gamma_rejected(self):
        inst = ach.example_instance(10, 6, 0.1, 6.0, 0.5)
        with pytest.raises(ConfigError):
            ach.thm5_bound(inst, np.full(10, 0.1), 0.0, -0.1)

    def test_optimize_is_min_over_grid(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            inst = random_logloss_instance(rng)
            P = [np.full(inst.n_yhat, 1.0 / inst.n_yhat)]
            best = ach.thm5_optimize(inst, P)
            for e in ach.eps_prime_candidates(inst):
                vals = ach.thm5_values(inst, P[0], float(e), ach.thm5_gamma_candidates(inst))
                assert best.raw_value <= vals.min() + 1e-15


class TestExample:
    def test_curve_properties(self):
        curve = ach.example_ach_curve(10, 6, 0.1, 6.0, range(1, 61))
        vals = np.array(curve.values())
        assert np.all(np.diff(vals) <= 1e-9)
        assert (vals < 1).sum() >= 30
        conv = np.maximum(0, 1 - np.arange(1, 61) / 10)
        assert np.all(vals >= conv - 1e-12)

    def test_degenerate_direct_part(self):
        # X determines Y and is uniform, so only the coverage terms remain once log2 M covers it
        pt = ach.example_ach_curve(4, 3, 0.0, 0.0, [64]).points[0]
        assert pt.params["terms"]["atypical"] == 0.0
        assert pt.value < 1

    def test_rejects_d2_at_one(self):
        with pytest.raises(ConfigError):
            ach.example_ach_curve(10, 6, 0.1, 6.0, [1], D2=1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_thm1_non_increasing_in_M(seed):
    rng = np.random.default_rng(seed)
    inst = random_finite_instance(rng, M=1)
    q = rng.dirichlet(np.ones(inst.n_xhat * inst.n_yhat))
    vals = [ach.thm1_bound(inst.with_M(M), q).raw_value for M in (1, 2, 3, 5, 8)]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_thm4_non_increasing_in_M(seed):
    rng = np.random.default_rng(seed)
    inst = random_finite_instance(rng, M=1, d1_inf=True)
    P = rng.dirichlet(np.ones(inst.n_yhat))
    e = float(rng.choice(ach.eps_prime_candidates(inst)))
    vals = [ach.thm4_bound(inst.with_M(M), P, e).raw_value for M in (1, 2, 3, 5, 8)]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_thm5_optimized_non_increasing_in_M(seed):
    rng = np.random.default_rng(seed)
    inst = random_logloss_instance(rng, M=1)
    P = [np.full(inst.n_yhat, 1.0 / inst.n_yhat)]
    vals = [ach.thm5_optimize(inst.with_M(M), P).raw_value for M in (1, 2, 3, 4, 6)]
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))
