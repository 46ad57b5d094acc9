import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixedcorr.errors import DataError, DomainError
from mixedcorr.model import (DataMatrix, PairClass, ThresholdParams,
                             VariableKind, classify_pair, detect_types,
                             estimate_thresholds)
from mixedcorr.mvnorm import phi


def dm(*cols, names=None):
    arr = np.column_stack([np.asarray(c, dtype=float) for c in cols])
    names = names or tuple(f"c{i}" for i in range(arr.shape[1]))
    return DataMatrix(arr, names)


class TestDetectTypes:
    def test_binary_two_levels(self):
        data = dm([0, 1, 0, 1, 1])
        assert detect_types(data) == [VariableKind.BINARY]

    def test_ternary_three_levels(self):
        data = dm([0, 1, 2, 2, 0])
        assert detect_types(data) == [VariableKind.TERNARY]

    def test_truncated_needs_zeros(self):
        vals = np.concatenate([np.zeros(10), np.linspace(0.5, 3.0, 40)])
        assert detect_types(dm(vals)) == [VariableKind.TRUNCATED]
        # no zeros -> continuous even though non-negative
        assert detect_types(dm(vals + 1.0)) == [VariableKind.CONTINUOUS]

    def test_negative_values_continuous(self):
        vals = np.concatenate([np.zeros(10), np.linspace(-2, 3, 40)])
        assert detect_types(dm(vals)) == [VariableKind.CONTINUOUS]

    def test_mtcars_type_vector(self, mtcars, mtcars_types):
        assert detect_types(mtcars) == mtcars_types

    def test_degenerate_column_named(self):
        data = dm([1.0, 1.0, 1.0], names=("flat",))
        with pytest.raises(DataError, match="flat"):
            detect_types(data)

    def test_declared_overrides_detection(self):
        data = dm([0, 1, 0, 1, 1])
        got = detect_types(data, declared=[VariableKind.CONTINUOUS])
        assert got == [VariableKind.CONTINUOUS]

    def test_declared_mismatch_validated(self):
        data = dm([0, 1, 0, 1, 1])
        with pytest.raises(DataError, match="ternary"):
            detect_types(data, declared=[VariableKind.TERNARY])


class TestThresholds:
    def test_binary_half(self):
        col = np.concatenate([np.zeros(50), np.ones(50)])
        t = estimate_thresholds(col, VariableKind.BINARY)
        assert t.delta1 == 0.0
        assert t.delta2 is None

    def test_ternary_published_quantiles(self):
        col = np.concatenate([np.zeros(30), np.ones(50), np.full(20, 2.0)])
        t = estimate_thresholds(col, VariableKind.TERNARY)
        # standard normal quantile table: z(0.30) = -0.5244, z(0.80) = 0.8416
        assert t.delta1 == pytest.approx(-0.5244, abs=5e-5)
        assert t.delta2 == pytest.approx(0.8416, abs=5e-5)
        # and the round trip through the module's own CDF is exact
        assert phi(t.delta1) == pytest.approx(0.30, abs=1e-12)
        assert phi(t.delta2) == pytest.approx(0.80, abs=1e-12)

    def test_continuous_empty(self):
        t = estimate_thresholds(np.linspace(0, 1, 20), VariableKind.CONTINUOUS)
        assert t.empty

    def test_truncated_zero_share(self):
        col = np.concatenate([np.zeros(25), np.linspace(0.1, 2, 75)])
        t = estimate_thresholds(col, VariableKind.TRUNCATED)
        assert phi(t.delta1) == pytest.approx(0.25, abs=1e-12)

    def test_missing_ignored(self):
        col = np.array([0, 0, 1, 1, np.nan, np.nan])
        t = estimate_thresholds(col, VariableKind.BINARY)
        assert t.delta1 == 0.0

    def test_boundary_proportion_clamped(self):
        col = np.linspace(0.5, 2.0, 8)  # truncated with no zeros at all
        t = estimate_thresholds(col, VariableKind.TRUNCATED)
        assert phi(t.delta1) == pytest.approx(1.0 / 16, abs=1e-12)

    def test_boundary_proportion_error_without_clamp(self):
        col = np.linspace(0.5, 2.0, 8)
        with pytest.raises(DataError, match="boundary proportion"):
            estimate_thresholds(col, VariableKind.TRUNCATED,
                                clamp_proportions=False)

    @given(st.permutations(list(range(60))))
    @settings(max_examples=25, deadline=None)
    def test_permutation_invariant(self, perm):
        base = np.array([0.0] * 20 + [1.0] * 25 + [2.0] * 15)
        t1 = estimate_thresholds(base, VariableKind.TERNARY)
        t2 = estimate_thresholds(base[np.array(perm)], VariableKind.TERNARY)
        assert t1 == t2

    @given(st.integers(1, 58), st.integers(1, 58))
    @settings(max_examples=40, deadline=None)
    def test_ternary_order_always_strict(self, n0, n1):
        if n0 + n1 >= 60:
            n1 = max(1, 59 - n0)
        n2 = 60 - n0 - n1
        col = np.array([0.0] * n0 + [1.0] * n1 + [2.0] * n2)
        t = estimate_thresholds(col, VariableKind.TERNARY)
        assert t.delta1 < t.delta2


class TestPairClass:
    def test_canonical_ordering(self):
        pc = classify_pair(VariableKind.CONTINUOUS, VariableKind.TERNARY)
        assert not pc.canonical
        assert pc.key == ("ter", "con")
        assert classify_pair(VariableKind.TERNARY, VariableKind.CONTINUOUS).canonical

    def test_ten_combinations(self):
        keys = {classify_pair(a, b).key
                for a in VariableKind for b in VariableKind}
        assert len(keys) == 10

    def test_threshold_invariants(self):
        with pytest.raises(DomainError):
            ThresholdParams(1.0, 0.5)
        with pytest.raises(DomainError):
            ThresholdParams(np.inf)
        with pytest.raises(DomainError):
            ThresholdParams(None, 1.0)


class TestDataMatrix:
    def test_shape_validation(self):
        with pytest.raises(DataError):
            DataMatrix(np.zeros((3, 2)), ("a",))

    def test_truncated_invariants(self):
        data = dm([-0.5, 0.0, 1.0, 2.0, 3.0])
        with pytest.raises(DataError, match="negative"):
            data.validate_column(0, VariableKind.TRUNCATED)

    def test_kind_parse(self):
        assert VariableKind.parse("TER") is VariableKind.TERNARY
        assert VariableKind.parse("continuous") is VariableKind.CONTINUOUS
        with pytest.raises(DomainError):
            VariableKind.parse("ordinal")
