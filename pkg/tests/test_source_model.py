import math

import numpy as np
import pytest

from excessdist.errors import ConfigError, UndefinedInformationError
from excessdist.source_model import (
    Alphabet,
    DistortionSpec,
    JointSource,
    ProblemInstance,
    binary_entropy,
    build_binomial_class_source,
    entropy,
    excess_kernel_pi,
    excess_table,
    indirect_excess_table,
    info_density,
    instance_from_dict,
    instance_to_dict,
    surrogate_distortion,
)


def bsc(eps=0.1):
    return JointSource.from_array(np.array([[0.5 - eps / 2, eps / 2], [eps / 2, 0.5 - eps / 2]]))


def test_alphabet_rejects_duplicates():
    with pytest.raises(ConfigError):
        Alphabet(("a", "a"))
    assert Alphabet.range(3).index(2) == 2


def test_joint_source_mass_check():
    with pytest.raises(ConfigError):
        JointSource.from_array([[0.5, 0.2], [0.1, 0.1]])
    with pytest.raises(ConfigError):
        JointSource.from_array([[1.2, -0.2], [0.0, 0.0]])


def test_marginals_and_conditionals():
    src = bsc()
    np.testing.assert_allclose(src.p_x, [0.5, 0.5])
    np.testing.assert_allclose(src.p_y_given_x, [[0.9, 0.1], [0.1, 0.9]])


def test_zero_mass_symbols_dropped():
    src = JointSource.from_array([[0.5, 0.0], [0.0, 0.0], [0.0, 0.5]])
    d1 = DistortionSpec.from_matrix(np.arange(6.0).reshape(3, 2))
    inst = ProblemInstance(src, d1, DistortionSpec.hamming(2), 1.0, 0.0)
    assert inst.p_x.size == 2
    np.testing.assert_array_equal(inst.d1.as_matrix(), [[0, 1], [4, 5]])


def test_level_and_M_validation():
    src = bsc()
    h = DistortionSpec.hamming(2)
    for bad in (-1.0, float("nan")):
        with pytest.raises(ConfigError):
            ProblemInstance(src, h, h, bad, 0.0)
    for M in (0, 1.5, True):
        with pytest.raises(ConfigError):
            ProblemInstance(src, h, h, 0.0, 0.0, M)
    with pytest.raises(ConfigError):
        ProblemInstance(src, h, DistortionSpec.logloss(), 0.0, 0.0)
    assert math.isinf(ProblemInstance(src, h, h, math.inf, 0.0).D1)


def test_entropies():
    assert entropy([0.25] * 4) == pytest.approx(2.0, abs=1e-15)
    assert binary_entropy(0.11) == pytest.approx(0.4999166, abs=1e-6)
    np.testing.assert_allclose(info_density(np.array([0.5, 0.25, 0.25])), [1, 2, 2])
    with pytest.raises(UndefinedInformationError):
        info_density(np.array([1.0, 0.0]))


def test_excess_kernel_bsc():
    h = DistortionSpec.hamming(2)
    inst = ProblemInstance(bsc(), h, h, 0.0, 0.0)
    pi = excess_table(inst)
    # x = 0 with pair (0, 0): only the indirect part can fail, with prob 0.1
    assert pi[0, 0, 0] == pytest.approx(0.1)
    assert pi[0, 1, 0] == 1.0
    assert pi[1, 1, 1] == pytest.approx(0.1)
    assert excess_kernel_pi(inst, 0, 0, 0) == pytest.approx(0.1)
    assert excess_kernel_pi(inst, 0, None, 1) == pytest.approx(0.9)
    assert excess_kernel_pi(inst, 1, 0, 1) == 1.0


def test_excess_kernel_logloss():
    src = JointSource.from_array(np.eye(4) / 4)
    inst = ProblemInstance(src, DistortionSpec.logloss(), DistortionSpec.hamming(4), 1.0, 0.0)
    q = np.array([0.5, 0.5, 0.0, 0.0])
    assert excess_kernel_pi(inst, 0, q, 0) == 0.0
    assert excess_kernel_pi(inst, 2, q, 2) == 1.0
    with pytest.raises(ConfigError):
        excess_kernel_pi(inst, 0, np.ones(3) / 3, 0)


def test_infinite_levels_never_exceed():
    h = DistortionSpec.hamming(2)
    inst = ProblemInstance(bsc(), h, h, math.inf, math.inf)
    assert excess_table(inst).max() == 0.0


def test_binomial_class_source_structure():
    src = build_binomial_class_source(10, 6, 0.1)
    assert src.p_xy.shape == (70, 10)
    np.testing.assert_allclose(src.p_y, 0.1)
    # X determines Y
    assert np.all((src.p_xy > 0).sum(axis=1) <= 1)
    np.testing.assert_allclose(src.p_xy[7:14, 1] * 10, [0.9 ** (6 - k) * 0.1 ** k * math.comb(6, k)
                                                         for k in range(7)])


def test_surrogate_distortion():
    s = surrogate_distortion(bsc(), DistortionSpec.hamming(2))
    np.testing.assert_allclose(s, [[0.1, 0.9], [0.9, 0.1]])
    np.testing.assert_allclose(indirect_excess_table(
        ProblemInstance(bsc(), DistortionSpec.hamming(2), DistortionSpec.hamming(2), 0, 0.5)), s)


def test_json_round_trip():
    d = {"x_alphabet": ["a", "b"], "y_alphabet": [0, 1], "p_xy": [[0.45, 0.05], [0.05, 0.45]],
         "d1": {"kind": "logloss"}, "d2": {"kind": "matrix", "matrix": [[0, 1, 2], [1, 0, 2]]},
         "D1": "inf", "D2": 0.3}
    inst = instance_from_dict(d, M=3)
    assert inst.M == 3 and math.isinf(inst.D1)
    again = instance_to_dict(instance_from_dict(instance_to_dict(inst)))
    assert again == instance_to_dict(inst)
    with pytest.raises(ConfigError):
        instance_from_dict({k: v for k, v in d.items() if k != "p_xy"})
    with pytest.raises(ConfigError):
        instance_from_dict(dict(d, d2={"kind": "logloss"}))
