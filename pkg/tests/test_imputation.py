"""Conditional model fitting and proper multiple imputation."""

import numpy as np
import pytest

from longfuse import (
    ColumnKind,
    ColumnSchema,
    ConditionalModelSpec,
    DataError,
    EstimationError,
    SchemaError,
    VariableRole,
    concatenate,
    default_specs,
    draw_parameters,
    estimate_effect,
    fit,
    impute_m,
    impute_once,
)
from longfuse.imputation import _MIN_EXTRA_ROWS
from longfuse.replication import imputation_estimates
from longfuse.rng import child, seed_sequence

Z = ColumnSchema("Z", VariableRole.TREATMENT, ColumnKind.BINARY)
X1 = ColumnSchema("X1", VariableRole.COVARIATE, ColumnKind.CONTINUOUS)
X2 = ColumnSchema("X2", VariableRole.INTERMEDIATE, ColumnKind.CONTINUOUS)
Y = ColumnSchema("Y", VariableRole.OUTCOME, ColumnKind.CONTINUOUS)


def _toy_data(rng, n_out=120, n_int=80, hole_in_x2=False):
    x1o = rng.normal(size=n_out)
    x2o = rng.normal(size=n_out) + 0.5 * x1o
    yo = x1o + x2o + rng.normal(size=n_out) * 0.3
    if hole_in_x2:
        x2o = x2o.copy()
        x2o[rng.random(n_out) < 0.25] = np.nan
    outcomes = {"X1": x1o, "X2": x2o, "Y": yo}
    x1i = rng.normal(size=n_int)
    z = (rng.random(n_int) < 0.5).astype(float)
    intervention = {
        "Z": z,
        "X1": x1i,
        "X2": rng.normal(size=n_int) + 0.5 * x1i + 0.4 * z,
    }
    return concatenate(outcomes, intervention, (Z, X1, X2, Y))


def test_treatment_cannot_be_an_imputation_target(rng):
    data = _toy_data(rng)
    with pytest.raises(SchemaError, match="never imputed"):
        fit(data, (ConditionalModelSpec("Z", ("X1",)),))


def test_treatment_cannot_be_an_imputation_predictor(rng):
    data = _toy_data(rng)
    with pytest.raises(SchemaError, match="must not condition on treatment"):
        fit(data, (ConditionalModelSpec("Y", ("X1", "Z")),))


def test_degenerate_target_is_rejected():
    prng = np.random.default_rng(5)
    outcomes = {
        "X1": prng.normal(size=60),
        "X2": prng.normal(size=60),
        "Y": np.full(60, 3.0),
    }
    intervention = {
        "Z": np.tile([0.0, 1.0], 20),
        "X1": prng.normal(size=40),
        "X2": prng.normal(size=40),
    }
    data = concatenate(outcomes, intervention, (Z, X1, X2, Y))
    with pytest.raises(DataError, match="no variation"):
        fit(data, (ConditionalModelSpec("Y", ("X1", "X2")),))


def test_too_few_complete_rows_is_rejected(rng):
    data = _toy_data(rng, n_out=60, n_int=40)
    # only outcomes rows observe Y, and the rule needs n_params + a margin
    keep = np.concatenate(
        [np.arange(_MIN_EXTRA_ROWS + 2), np.arange(60, 60 + 40)]
    )
    small = data.take_rows(keep)
    with pytest.raises(DataError, match="complete rows"):
        fit(small, (ConditionalModelSpec("Y", ("X1", "X2")),))


def test_collinear_predictors_are_named(rng):
    n_out, n_int = 80, 40
    x1 = rng.normal(size=n_out)
    outcomes = {"X1": x1, "X2": 2.0 * x1, "Y": x1 + rng.normal(size=n_out)}
    x1i = rng.normal(size=n_int)
    intervention = {
        "Z": np.tile([0.0, 1.0], n_int // 2),
        "X1": x1i,
        "X2": 2.0 * x1i,
    }
    data = concatenate(outcomes, intervention, (Z, X1, X2, Y))
    with pytest.raises(EstimationError, match="X2"):
        fit(data, (ConditionalModelSpec("Y", ("X1", "X2")),))


def test_default_specs_cover_all_missing_columns_in_rate_order(rng):
    data = _toy_data(rng, hole_in_x2=True)
    specs = default_specs(data)
    # X2 has a lower missingness rate than Y (structurally absent on one side)
    assert [s.target for s in specs] == ["X2", "Y"]
    assert specs[0].predictors == ("X1",)
    assert set(specs[1].predictors) == {"X1", "X2"}
    for s in specs:
        assert "Z" not in (s.target, *s.predictors)


def test_impute_once_fills_every_hole_and_keeps_observed_cells(rng):
    data = _toy_data(rng, hole_in_x2=True)
    model = fit(data, default_specs(data))
    done = impute_once(data, model, 11)
    assert not done.missing.any()
    obs = ~data.missing
    assert np.array_equal(done.values[obs], data.values[obs])


def test_impute_once_is_deterministic_in_the_seed(rng):
    data = _toy_data(rng)
    model = fit(data, default_specs(data))
    a = impute_once(data, model, 101)
    b = impute_once(data, model, 101)
    c = impute_once(data, model, 102)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_impute_m_children_match_single_draws(rng):
    data = _toy_data(rng, hole_in_x2=True)
    model = fit(data, default_specs(data))
    root = seed_sequence(77)
    batch = impute_m(data, model, 3, root)
    for k, done in enumerate(batch):
        single = impute_once(data, model, child(root, k))
        assert np.array_equal(done.values, single.values)


def test_imputed_values_stay_inside_the_observed_range(rng):
    data = _toy_data(rng)
    model = fit(data, default_specs(data))
    done = impute_once(data, model, 5)
    y_obs = data.values_of("Y")[~data.missing_of("Y")]
    y_new = done.values_of("Y")[data.missing_of("Y")]
    assert y_new.min() >= y_obs.min()
    assert y_new.max() <= y_obs.max()


def test_draw_parameters_is_deterministic_and_proper(rng):
    data = _toy_data(rng)
    model = fit(data, default_specs(data))
    a = draw_parameters(model, 12)
    b = draw_parameters(model, 12)
    assert len(a) == len(model.conditionals)
    assert np.array_equal(a[0].coefficients, b[0].coefficients)
    assert a[0].residual_variance == b[0].residual_variance


def test_parameter_draws_match_posterior_moments(rng):
    data = _toy_data(rng, n_out=400, n_int=200)
    model = fit(data, (ConditionalModelSpec("Y", ("X1", "X2")),))
    cond = model.conditionals[0]
    draws = [draw_parameters(model, child(9, k))[0] for k in range(4000)]
    sig = np.array([d.residual_variance for d in draws])
    # sigma2 = rss / chi2(dof) has mean rss / (dof - 2)
    assert np.isclose(sig.mean(), cond.rss / (cond.dof - 2), rtol=0.05)
    betas = np.stack([d.coefficients for d in draws])
    assert np.allclose(betas.mean(axis=0), cond.coefficients, atol=0.02)
    # coefficient spread follows sigma2 * inv(X'X)
    cov = cond.coef_noise_map @ cond.coef_noise_map.T
    expected = np.diag(cov) * sig.mean()
    assert np.allclose(betas.var(axis=0), expected, rtol=0.15)


def test_fast_estimate_path_matches_materialized_imputations(rng):
    data = _toy_data(rng, hole_in_x2=True)
    model = fit(data, default_specs(data))
    fast = imputation_estimates(data, model, 4, 2024)
    slow = []
    for done in impute_m(data, model, 4, 2024):
        e = estimate_effect(done)
        slow.append([e.intercept, e.effect, e.var_intercept, e.var_effect])
    assert np.array_equal(fast, np.array(slow))


def test_unknown_predictor_is_a_schema_error(rng):
    data = _toy_data(rng)
    with pytest.raises(SchemaError):
        fit(data, (ConditionalModelSpec("Y", ("X1", "NOPE")),))


def test_uncovered_missing_column_is_rejected(rng):
    data = _toy_data(rng, hole_in_x2=True)
    model = fit(data, (ConditionalModelSpec("Y", ("X1", "X2")),))
    with pytest.raises(DataError, match="no imputation rule covers it"):
        impute_once(data, model, 3)


def test_predictor_imputed_too_late_is_rejected(rng):
    n_out, n_int = 120, 80
    x1o = rng.normal(size=n_out)
    outcomes = {
        "X1": x1o,
        "X2": rng.normal(size=n_out) + 0.5 * x1o,
        "Y": x1o + rng.normal(size=n_out),
    }
    x1i = rng.normal(size=n_int)
    x2i = rng.normal(size=n_int) + 0.5 * x1i
    x2i[: n_int // 4] = np.nan  # holes on rows where Y must be imputed
    intervention = {
        "Z": np.tile([0.0, 1.0], n_int // 2),
        "X1": x1i,
        "X2": x2i,
    }
    data = concatenate(outcomes, intervention, (Z, X1, X2, Y))
    # X2 is needed by Y's rule but only gets imputed afterwards
    model = fit(
        data,
        (
            ConditionalModelSpec("Y", ("X1", "X2")),
            ConditionalModelSpec("X2", ("X1",)),
        ),
    )
    with pytest.raises(DataError, match="not imputed by an earlier conditional"):
        impute_once(data, model, 3)
    # with the rules in dependency order the same data imputes fine
    ordered = fit(
        data,
        (
            ConditionalModelSpec("X2", ("X1",)),
            ConditionalModelSpec("Y", ("X1", "X2")),
        ),
    )
    assert not impute_once(data, ordered, 3).missing.any()


def test_self_prediction_is_rejected():
    with pytest.raises(SchemaError, match="predict itself"):
        ConditionalModelSpec("Y", ("Y",))
