import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fgrt.errors import MalformedRuleError
from fgrt.fuzzy_core import (
    FeaturePartition,
    LinguisticTerm,
    TNorm,
    Trapezoid,
    conjoin,
    membership,
    membership_matrix,
    rule_membership,
)
from fgrt.partition_builder import quantile_partition

finite = st.floats(-1e3, 1e3, allow_nan=False)


@st.composite
def trapezoids(draw):
    return Trapezoid(*sorted(draw(st.lists(finite, min_size=4, max_size=4))))


@pytest.mark.parametrize("x, expected", [(1.5, 1.0), (0.5, 0.5), (3.5, 0.0), (2.5, 0.5), (-1.0, 0.0)])
def test_membership_examples(x, expected):
    assert membership(Trapezoid(0, 1, 2, 3), x) == pytest.approx(expected)


def test_degenerate_shoulders():
    left = Trapezoid(0, 0, 1, 2)
    assert membership(left, 0) == 1.0
    assert membership(left, -1e-12) == 0.0
    right = Trapezoid(0, 1, 2, 2)
    assert membership(right, 2) == 1.0
    assert membership(right, 2 + 1e-12) == 0.0
    assert membership(Trapezoid(1, 1, 1, 1), 1) == 1.0


def test_invalid_trapezoid():
    with pytest.raises(ValueError):
        Trapezoid(0, 2, 1, 3)


def test_vectorized_matches_scalar():
    t = Trapezoid(-1, 0, 0.5, 2)
    xs = np.linspace(-2, 3, 101)
    assert np.array_equal(membership(t, xs), [membership(t, x) for x in xs])


def test_membership_matrix_bit_identical():
    rng = np.random.default_rng(3)
    params = np.sort(rng.normal(size=(40, 4)), axis=1)
    params[::5, 1] = params[::5, 0]
    params[::7, 2] = params[::7, 3]
    x = rng.normal(size=(300, 40)) * 1.5
    got = membership_matrix(params, x)
    for j in range(40):
        assert np.array_equal(got[:, j], membership(Trapezoid(*params[j]), x[:, j]))


@given(trapezoids(), finite)
def test_membership_in_unit_interval(t, x):
    assert 0.0 <= membership(t, x) <= 1.0


@given(trapezoids(), finite, finite)
def test_membership_monotone_on_ramps(t, x1, x2):
    lo, hi = min(x1, x2), max(x1, x2)
    if hi <= t.b:
        assert membership(t, lo) <= membership(t, hi)
    if lo >= t.c:
        assert membership(t, lo) >= membership(t, hi)


@given(finite, finite, finite, finite, finite)
def test_membership_continuous_when_nondegenerate(a, w1, w2, w3, x):
    t = Trapezoid(a, a + abs(w1) + 1, a + abs(w1) + abs(w2) + 1, a + abs(w1) + abs(w2) + abs(w3) + 2)
    eps = 1e-7
    assert abs(membership(t, x) - membership(t, x + eps)) <= eps * 2


def test_conjoin_examples():
    assert conjoin(1.0, 0.7) == 0.7
    assert conjoin(0.0, 0.9) == 0.0
    assert conjoin(0.5, 0.5) == 0.25
    assert conjoin(0.5, 0.5, "minimum") == 0.5
    assert conjoin(1.0, 0.7, TNorm.MINIMUM) == 0.7


@pytest.mark.parametrize("tnorm", list(TNorm))
def test_tnorm_axioms_on_grid(tnorm):
    g = np.round(np.arange(0, 101) / 100, 2)
    a, b = np.meshgrid(g, g, indexing="ij")
    ab = conjoin(a, b, tnorm)
    assert np.array_equal(ab, conjoin(b, a, tnorm))
    assert np.array_equal(conjoin(g, 1.0, tnorm), g)
    assert np.all(conjoin(g, 0.0, tnorm) == 0)
    # monotone in each argument
    assert np.all(np.diff(ab, axis=0) >= -1e-15)
    # associativity on a coarser grid keeps this fast
    c = g[::10]
    for x, y, z in itertools.product(c, c, c):
        assert conjoin(conjoin(x, y, tnorm), z, tnorm) == pytest.approx(conjoin(x, conjoin(y, z, tnorm), tnorm), abs=1e-15)


def _two_feature_partitions():
    return [quantile_partition(np.linspace(0, 100, 101), 3, f"f{j}") for j in range(2)]


def test_rule_membership_examples():
    parts = _two_feature_partitions()
    x = np.array([90.0, 70.0])
    assert rule_membership([], parts, x) == 1.0
    # High is (50, 75, 100, 100): 0.8 at 70
    assert rule_membership([(1, 2)], parts, x) == pytest.approx(0.8)
    # Medium is (25, 37.5, 62.5, 75): 0.4 at 70; 0.8 * 0.4 under product
    assert rule_membership([(1, 2), (0, 2)], parts, np.array([70.0, 70.0])) == pytest.approx(0.64)
    assert rule_membership([(0, 1), (1, 2)], parts, np.array([70.0, 70.0])) == pytest.approx(0.4 * 0.8)
    assert rule_membership([(0, 1), (1, 2)], parts, np.array([70.0, 70.0]), "minimum") == pytest.approx(0.4)


def test_rule_membership_batch():
    parts = _two_feature_partitions()
    X = np.array([[70.0, 70.0], [10.0, 90.0]])
    got = rule_membership([(0, 1), (1, 2)], parts, X)
    assert got.shape == (2,)
    assert got[1] == 0.0


@pytest.mark.parametrize("conds", [[(2, 0)], [(0, 3)], [(0, 0), (0, 1)], [(-1, 0)]])
def test_rule_membership_malformed(conds):
    with pytest.raises(MalformedRuleError):
        rule_membership(conds, _two_feature_partitions(), np.zeros(2))


@settings(max_examples=60)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 2)), min_size=1, max_size=4, unique_by=lambda c: c[0]),
       st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.sampled_from(list(TNorm)))
def test_extension_never_increases_membership(conds, x, tnorm):
    parts = [quantile_partition(np.linspace(-2, 2, 50), 3, f"f{j}") for j in range(4)]
    x = np.array(x)
    for i in range(1, len(conds)):
        assert rule_membership(conds[:i + 1], parts, x, tnorm) <= rule_membership(conds[:i], parts, x, tnorm)


def test_partition_invariants():
    p = quantile_partition(np.arange(10.0))
    assert p.violations() == []
    gap = FeaturePartition("g", (LinguisticTerm("Low", Trapezoid(0, 0, 1, 2)),
                                 LinguisticTerm("High", Trapezoid(3, 4, 5, 5))), 0, 5)
    assert any(v.startswith("coverage") for v in gap.violations())
    swapped = FeaturePartition("s", (LinguisticTerm("Low", Trapezoid(2, 3, 5, 5)),
                                     LinguisticTerm("High", Trapezoid(0, 0, 1, 3))), 0, 5)
    assert any(v.startswith("ordering") for v in swapped.violations())
    with pytest.raises(ValueError):
        FeaturePartition("d", (LinguisticTerm("A", Trapezoid(0, 0, 1, 1)),
                               LinguisticTerm("A", Trapezoid(0, 1, 1, 1))), 0, 1)
    with pytest.raises(ValueError):
        LinguisticTerm("", Trapezoid(0, 0, 1, 1))


def test_out_of_domain_values_take_edge_shoulder():
    p = quantile_partition(np.linspace(0, 100, 101))
    mu = p.memberships(np.array([-50.0, 150.0]))
    assert mu.tolist() == [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
