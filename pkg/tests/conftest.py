"""Shared fixtures.

The replicated calibration studies are the expensive part of this suite
(a few minutes each at 500 replications on one core), so each one runs at
most once per session and is shared between the acceptance checks and the
property tests that read different aspects of the same run.
"""

from __future__ import annotations

import numpy as np
import pytest

from longfuse import MethodPlan, ScenarioSpec, generate_fused, run_study
from longfuse.simlab import scenario_conditionals

STUDY_SEED = 20260816


@pytest.fixture(scope="session")
def primary_study():
    """Calibration study of the well-specified scenario.

    Methods cover the combining rules at m=200 plus the replication
    schemes at the settings the desk-scale reproduction checks: jackknife
    G=25 with m in {1, 50} and bootstrap B=250 with m=10.
    """
    spec = ScenarioSpec(
        scenario="primary",
        replications=500,
        methods=MethodPlan(
            pooled_m=200,
            jackknife=((25, 1), (25, 50)),
            bootstrap=((250, 10),),
        ),
    )
    return spec, run_study(spec, STUDY_SEED)


@pytest.fixture(scope="session")
def inflation_study():
    """Smaller study spanning several m values per replication scheme.

    Used by the properties that track how replicate variance shrinks as
    the number of imputations per refit grows.
    """
    spec = ScenarioSpec(
        scenario="primary",
        replications=100,
        methods=MethodPlan(
            jackknife=((25, 5), (25, 50), (25, 200)),
            bootstrap=((100, 1), (100, 25)),
        ),
    )
    return spec, run_study(spec, STUDY_SEED + 1)


def _scenario_study(name: str) -> tuple[ScenarioSpec, object]:
    spec = ScenarioSpec(
        scenario=name,
        replications=500,
        methods=MethodPlan(jackknife=((25, 50),)),
    )
    return spec, run_study(spec, STUDY_SEED + 2)


@pytest.fixture(scope="session")
def drop_x3_study():
    return _scenario_study("drop_x3")


@pytest.fixture(scope="session")
def no_covariates_study():
    return _scenario_study("no_covariates")


@pytest.fixture(scope="session")
def different_conditionals_study():
    return _scenario_study("different_conditionals")


@pytest.fixture(scope="session")
def reduced_outcomes_study():
    return _scenario_study("reduced_outcomes")


@pytest.fixture(scope="session")
def demo_spec():
    return ScenarioSpec(
        scenario="primary", replications=1, methods=MethodPlan(pooled_m=2)
    )


@pytest.fixture(scope="session")
def demo_data(demo_spec):
    """One fused dataset (about 1000 rows) for unit-level checks."""
    return generate_fused(demo_spec, 314)


@pytest.fixture(scope="session")
def demo_conditionals(demo_spec):
    return scenario_conditionals(demo_spec)


@pytest.fixture
def rng():
    return np.random.default_rng(8675309)
