"""Effect regression on the intervention rows, and normal intervals."""

import numpy as np
import pytest

from longfuse import (
    ColumnKind,
    ColumnSchema,
    DataError,
    EstimationError,
    SchemaError,
    VariableRole,
    concatenate,
    confidence_interval,
    estimate_effect,
)
from longfuse.effects import resolve_outcome

Z = ColumnSchema("Z", VariableRole.TREATMENT, ColumnKind.BINARY)
X = ColumnSchema("X", VariableRole.COVARIATE, ColumnKind.CONTINUOUS)
Y = ColumnSchema("Y", VariableRole.OUTCOME, ColumnKind.CONTINUOUS)


def _fused(z, y_int, y_out=(0.0, 0.0, 0.0)):
    n_out = len(y_out)
    n_int = len(z)
    outcomes = {"X": np.zeros(n_out), "Y": np.asarray(y_out, dtype=float)}
    intervention = {
        "Z": np.asarray(z, dtype=float),
        "X": np.zeros(n_int),
        "Y": np.asarray(y_int, dtype=float),
    }
    data = concatenate(outcomes, intervention, (Z, X, Y))
    rows = np.flatnonzero(data.missing_of("Y"))
    filled = np.asarray(y_int, dtype=float)
    return data.with_filled({"Y": (rows, filled)})


def test_hand_computed_two_arm_regression():
    est = estimate_effect(_fused(z=[0, 0, 1, 1, 1], y_int=[1.0, 2.0, 4.0, 5.0, 6.0]))
    assert est.intercept == pytest.approx(1.5, abs=1e-14)
    assert est.effect == pytest.approx(3.5, abs=1e-14)
    # pooled s2 = (0.5 + 2.0) / 3; var(intercept) = s2/2; var(effect) = s2*(1/2+1/3)
    s2 = 2.5 / 3.0
    assert est.var_intercept == pytest.approx(s2 / 2.0, rel=1e-14)
    assert est.var_effect == pytest.approx(s2 * (1 / 2 + 1 / 3), rel=1e-14)
    assert (est.n_control, est.n_treated) == (2, 3)


def test_outcomes_rows_never_enter_the_regression():
    a = estimate_effect(
        _fused(z=[0, 0, 1, 1], y_int=[1.0, 2.0, 3.0, 4.0], y_out=(0.0, 0.0, 0.0))
    )
    b = estimate_effect(
        _fused(z=[0, 0, 1, 1], y_int=[1.0, 2.0, 3.0, 4.0], y_out=(99.0, -99.0, 50.0))
    )
    assert (a.intercept, a.effect) == (b.intercept, b.effect)
    assert (a.var_intercept, a.var_effect) == (b.var_intercept, b.var_effect)


def test_single_arm_is_rejected():
    with pytest.raises(EstimationError, match="both arms"):
        estimate_effect(_fused(z=[1, 1, 1], y_int=[1.0, 2.0, 3.0]))


def test_two_rows_are_not_enough():
    with pytest.raises(EstimationError, match="at least 3"):
        estimate_effect(_fused(z=[0, 1], y_int=[1.0, 2.0]))


def test_unimputed_outcome_is_rejected():
    outcomes = {"X": np.zeros(3), "Y": np.zeros(3)}
    intervention = {"Z": np.array([0.0, 1.0, 1.0]), "X": np.zeros(3)}
    data = concatenate(outcomes, intervention, (Z, X, Y))
    with pytest.raises(DataError, match="impute first"):
        estimate_effect(data)


def test_resolve_outcome_defaults_to_the_single_declared_column():
    data = _fused(z=[0, 1, 1], y_int=[1.0, 2.0, 3.0])
    assert resolve_outcome(data, None) == "Y"
    assert resolve_outcome(data, "Y") == "Y"
    with pytest.raises(SchemaError, match="not an outcome"):
        resolve_outcome(data, "X")


def test_two_outcome_columns_need_an_explicit_choice():
    y2 = ColumnSchema("Y2", VariableRole.OUTCOME, ColumnKind.CONTINUOUS)
    outcomes = {
        "X": np.zeros(4),
        "Y": np.arange(4.0),
        "Y2": np.arange(4.0) * 2,
    }
    intervention = {"Z": np.array([0.0, 1.0, 1.0]), "X": np.zeros(3)}
    data = concatenate(outcomes, intervention, (Z, X, Y, y2))
    with pytest.raises(SchemaError, match="pass outcome="):
        resolve_outcome(data, None)


def test_interval_matches_the_normal_quantile():
    low, high = confidence_interval(-0.0035, 0.0017**2, gamma=0.05)
    assert low == pytest.approx(-0.0035 - 1.959963984540054 * 0.0017, rel=1e-12)
    assert high == pytest.approx(-0.0035 + 1.959963984540054 * 0.0017, rel=1e-12)
    assert high < 0.0  # this interval excludes zero


def test_interval_width_grows_with_the_level():
    narrow = confidence_interval(0.0, 1.0, gamma=0.10)
    wide = confidence_interval(0.0, 1.0, gamma=0.01)
    assert wide[1] > narrow[1] > 0.0
    assert narrow == pytest.approx((-1.6448536269514722, 1.6448536269514722), rel=1e-12)


def test_interval_rejects_negative_variance():
    with pytest.raises(EstimationError):
        confidence_interval(1.0, -0.5)
