"""Treatment-effect estimation on the intervention block.

The estimand model is a two-parameter regression of the (completed)
outcome on the treatment indicator over intervention rows only:

    E[Y | Z] = intercept + effect * Z

With a binary Z this is difference-in-means territory: the OLS solution is
``intercept = mean(Y | Z = 0)`` and ``effect = mean(Y | Z = 1) - mean(Y | Z = 0)``,
with homoskedastic variance estimates

    var(intercept) = s^2 / n0,
    var(effect)    = s^2 (1/n0 + 1/n1),

where s^2 pools the within-arm residual sums of squares over n - 2 degrees
of freedom.  Outcomes rows never enter: they inform the imputation model,
not the effect regression.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .dataset import FusedDataset, SourceTag
from .errors import DataError, EstimationError, SchemaError

__all__ = ["EffectEstimate", "estimate_effect", "confidence_interval"]


@dataclass(frozen=True)
class EffectEstimate:
    """Point estimates and homoskedastic variances from one completed dataset."""

    intercept: float
    effect: float
    var_intercept: float
    var_effect: float
    n_control: int
    n_treated: int

    def parameter(self, name: str) -> tuple[float, float]:
        """(estimate, variance) for ``"intercept"`` or ``"effect"``."""
        if name == "intercept":
            return self.intercept, self.var_intercept
        if name == "effect":
            return self.effect, self.var_effect
        raise ValueError(f"unknown parameter {name!r}")


def _effect_from_arrays(y: np.ndarray, z: np.ndarray) -> tuple[float, float, float, float, int, int]:
    """Core computation on intervention-row arrays; shared with replication."""
    treated = z == 1.0
    n1 = int(treated.sum())
    n0 = y.size - n1
    if n0 < 1 or n1 < 1:
        raise EstimationError(
            f"need both arms on intervention rows, got {n0} control / {n1} treated"
        )
    if n0 + n1 < 3:
        raise EstimationError("need at least 3 intervention rows for a variance estimate")
    y1 = y[treated]
    y0 = y[~treated]
    mean1 = y1.mean()
    mean0 = y0.mean()
    rss = float(((y1 - mean1) ** 2).sum() + ((y0 - mean0) ** 2).sum())
    s2 = rss / (n0 + n1 - 2)
    return (
        float(mean0),
        float(mean1 - mean0),
        s2 / n0,
        s2 * (1.0 / n0 + 1.0 / n1),
        n0,
        n1,
    )


def resolve_outcome(data: FusedDataset, outcome: str | None) -> str:
    """Pick the outcome column: explicit name, or the single declared one."""
    names = data.outcome_names
    if outcome is None:
        if len(names) != 1:
            raise SchemaError(
                f"dataset declares {len(names)} outcome columns; pass outcome= explicitly"
            )
        return names[0]
    if outcome not in names:
        raise SchemaError(f"{outcome!r} is not an outcome column")
    return outcome


def estimate_effect(data: FusedDataset, outcome: str | None = None) -> EffectEstimate:
    """Fit the effect regression on the intervention rows of a completed dataset."""
    name = resolve_outcome(data, outcome)
    rows = data.source_rows(SourceTag.INTERVENTION)
    if data.missing_of(name)[rows].any():
        raise DataError(
            f"outcome {name!r} still has missing intervention cells; impute first"
        )
    y = data.values_of(name)[rows]
    z = data.values_of(data.treatment_name)[rows]
    intercept, effect, v_int, v_eff, n0, n1 = _effect_from_arrays(y, z)
    return EffectEstimate(
        intercept=intercept,
        effect=effect,
        var_intercept=v_int,
        var_effect=v_eff,
        n_control=n0,
        n_treated=n1,
    )


def confidence_interval(estimate: float, variance: float, gamma: float = 0.05) -> tuple[float, float]:
    """Two-sided normal interval with coverage target 1 - gamma."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    if not variance >= 0.0:
        raise EstimationError(f"variance must be non-negative, got {variance}")
    half = ndtri(1.0 - gamma / 2.0) * np.sqrt(variance)
    return (float(estimate - half), float(estimate + half))
