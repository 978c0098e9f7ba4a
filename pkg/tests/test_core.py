"""Domain types and confusion counts."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from covfdr.core import (CovariateMatrix, DimensionError, DiscoveryResult, HypothesisSet,
                         ValidationError, confusion)


class TestHypothesisSet:
    def test_valid(self):
        h = HypothesisSet([0.0, 0.5, 1.0], truth=[0, 1, 0], ids=["a", "b", "c"])
        assert h.m == 3 and h.m1 == 1
        assert h.truth.dtype == np.int64

    @pytest.mark.parametrize("p", [[0.1, 1.2], [-0.01, 0.3], [np.nan, 0.2]])
    def test_rejects_bad_p(self, p):
        with pytest.raises(ValidationError):
            HypothesisSet(p)

    def test_truth_length(self):
        with pytest.raises(DimensionError):
            HypothesisSet([0.1, 0.2], truth=[1])

    def test_truth_labels_binary(self):
        with pytest.raises(ValidationError):
            HypothesisSet([0.1, 0.2], truth=[1, 2])

    def test_immutable(self):
        h = HypothesisSet([0.1, 0.2])
        with pytest.raises(ValueError):
            h.p_values[0] = 0.5


class TestCovariateMatrix:
    def test_vector_becomes_column(self):
        cm = CovariateMatrix(np.arange(4.0))
        assert (cm.m, cm.d) == (4, 1)
        assert cm.names == ("x1",)

    def test_non_finite(self):
        with pytest.raises(ValidationError):
            CovariateMatrix([[1.0, np.inf]])

    def test_names(self):
        cm = CovariateMatrix(np.ones((3, 2)), ("MAF", "baseL2"))
        np.testing.assert_array_equal(cm.column("baseL2"), np.ones(3))
        with pytest.raises(ValidationError):
            CovariateMatrix(np.ones((3, 2)), ("a", "a"))
        with pytest.raises(DimensionError):
            CovariateMatrix(np.ones((3, 2)), ("a",))


class TestConfusion:
    @pytest.mark.parametrize("rejected, truth, expected", [
        ((1, 1, 0, 0), (1, 0, 1, 0), dict(tp=1, fp=1, fn=1, tn=1, tpr=0.5, fdp=0.5)),
        ((0, 0, 0), (0, 0, 0), dict(tp=0, fp=0, fn=0, tn=3, tpr=0.0, fdp=0.0)),
        ((1, 1), (1, 1), dict(tp=2, fp=0, fn=0, tn=0, tpr=1.0, fdp=0.0)),
    ])
    def test_examples(self, rejected, truth, expected):
        c = confusion(DiscoveryResult(rejected, np.zeros(len(rejected)), 0.05, "t"), truth)
        assert c.as_dict() == expected

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            confusion(np.ones(3), np.ones(2))

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), max_size=60))
    def test_identities(self, pairs):
        delta = np.array([a for a, _ in pairs], dtype=int)
        truth = np.array([b for _, b in pairs], dtype=int)
        c = confusion(delta, truth)
        assert c.tp + c.fn == truth.sum()
        assert c.tp + c.fp == delta.sum()
        assert c.tp + c.fp + c.fn + c.tn == len(pairs)
        assert 0.0 <= c.tpr <= 1.0 and 0.0 <= c.fdp <= 1.0
        if delta.sum() == 0:
            assert c.fdp == 0.0
        if truth.sum() == 0:
            assert c.tpr == 0.0


def test_discovery_result_count():
    r = DiscoveryResult([True, False, True], [0.01, 0.5, 0.02], 0.05, "x")
    assert r.discoveries == 2
    assert r.rejection_set() == frozenset({0, 2})
