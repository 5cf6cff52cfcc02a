"""Closed-form bias of the fusion estimand in six structural scenarios.

The fusion estimator predicts the long-term outcome from shared predictors
fit on auxiliary data, deliberately never conditioning on treatment.  When
the outcome model is linear this makes its effect estimand a *product of
slopes*: (slope of outcome on predictors, treatment held out) times (slope
of predictors on treatment).  The scenarios here are small linear systems
with Gaussian noise where both that estimand and the true total effect of
treatment on the outcome have closed forms, so the bias from a broken
identifying condition is exact arithmetic rather than simulation.

Notation shared by all scenarios: ``true_slope`` is the total effect of
the treatment on the long-term outcome; ``fused_slope`` is what the fusion
estimand converges to; ``raw_gap = fused_slope - true_slope``;
``scaled_bias = raw_gap / true_slope`` (signed infinity when the true
slope is zero but the gap is not); ``portion = fused_slope / true_slope
= 1 + scaled_bias`` is the portion of the effect the fusion recovers.

Scenarios (all noise terms independent, zero-mean Gaussian):

1. Direct treatment leak::

       X = phi0 + phi1 Z + e_x
       Y = theta0 + theta1 Z + theta2 X + e_y

   The fused estimand keeps theta2 phi1 and drops theta1.

2. Confounded predictor-outcome relation (latent U)::

       U = alpha0 + e_u
       X = beta0 + beta1 U + beta2 Z + e_x
       Y = gamma0 + gamma1 U + gamma2 X + e_y

   Regression of Y on X alone absorbs gamma1 c of the confounder per unit
   X, with c = beta1 var_u / (beta1^2 var_u + var_x).

3. Confounder drives both, no predictor-outcome edge (example 2 with
   gamma2 = 0): the true effect is zero, the fused slope is not.

4. Reverse causation::

       Y = gamma0 + e_y
       X = beta0 + beta2 Z + beta3 Y + e_x

   The true effect is zero; regressing Y on X recovers the attenuation
   slope c2 = beta3 var_y / (beta3^2 var_y + var_x).

5. Partial mediation with confounding and a direct effect::

       U = alpha0 + e_u
       X = beta0 + beta1 U + beta2 Z + e_x
       Y = gamma0 + gamma1 U + gamma2 X + gamma3 Z + e_y

   Both failure modes at once; with gamma3 < 0 the fused slope can be
   positive while the true effect is negative (sign reversal).

6. Two-component predictor, fully mediated::

       X1 = alpha0 + e_1
       X2 = beta0 + beta1 X1 + beta2 Z + e_2
       Y  = gamma0 + gamma1 X1 + gamma2 X2 + e_y

   Y given (X1, X2) carries no extra treatment term, so the fused slope
   equals the true effect exactly: including every treatment-affected
   predictor repairs the scenario-1 failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .errors import SchemaError

__all__ = ["PathwayParams", "PathwayAnalysis", "analyze_pathway", "product_of_estimates"]


_REQUIRED: dict[int, tuple[str, ...]] = {
    1: ("phi0", "phi1", "theta0", "theta1", "theta2", "var_x", "var_y"),
    2: ("alpha0", "beta0", "beta1", "beta2", "gamma0", "gamma1", "gamma2",
        "var_u", "var_x", "var_y"),
    3: ("alpha0", "beta0", "beta1", "beta2", "gamma0", "gamma1",
        "var_u", "var_x", "var_y"),
    4: ("beta0", "beta2", "beta3", "gamma0", "var_x", "var_y"),
    5: ("alpha0", "beta0", "beta1", "beta2", "gamma0", "gamma1", "gamma2", "gamma3",
        "var_u", "var_x", "var_y"),
    6: ("alpha0", "beta0", "beta1", "beta2", "gamma0", "gamma1", "gamma2",
        "var_1", "var_2", "var_y"),
}


@dataclass(frozen=True)
class PathwayParams:
    """Structural coefficients for one scenario.

    Exactly the fields required by ``example`` may be set; everything else
    must stay None.  ``var_*`` fields are noise variances and must be
    positive.
    """

    example: int
    alpha0: float | None = None
    beta0: float | None = None
    beta1: float | None = None
    beta2: float | None = None
    beta3: float | None = None
    gamma0: float | None = None
    gamma1: float | None = None
    gamma2: float | None = None
    gamma3: float | None = None
    theta0: float | None = None
    theta1: float | None = None
    theta2: float | None = None
    phi0: float | None = None
    phi1: float | None = None
    var_u: float | None = None
    var_x: float | None = None
    var_y: float | None = None
    var_1: float | None = None
    var_2: float | None = None

    def __post_init__(self) -> None:
        if self.example not in _REQUIRED:
            raise SchemaError(f"example must be 1..6, got {self.example}")
        required = _REQUIRED[self.example]
        missing = [n for n in required if getattr(self, n) is None]
        extra = [
            f.name
            for f in fields(self)
            if f.name != "example"
            and f.name not in required
            and getattr(self, f.name) is not None
        ]
        if missing:
            raise SchemaError(f"example {self.example} needs {', '.join(missing)}")
        if extra:
            raise SchemaError(
                f"example {self.example} does not use {', '.join(extra)}"
            )
        for name in required:
            if name.startswith("var_") and not getattr(self, name) > 0:
                raise SchemaError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class PathwayAnalysis:
    """Closed-form comparison of the fused estimand with the true effect."""

    example: int
    true_slope: float
    fused_slope: float
    raw_gap: float
    scaled_bias: float
    portion: float
    latent_recovery_slope: float | None   # c / c1 / c2 where the scenario has one
    surrogate_outcome_slope: float | None  # outcome-model slope on the predictor
    dropped_treatment_coef: float | None   # treatment term the fusion discards
    treatment_surrogate_slope: float | None  # predictor-model slope on treatment


def _finish(
    example: int,
    true_slope: float,
    fused_slope: float,
    latent: float | None,
    theta2: float | None,
    theta1: float | None,
    phi1: float | None,
) -> PathwayAnalysis:
    gap = fused_slope - true_slope
    if true_slope != 0.0:
        scaled = gap / true_slope
        portion = fused_slope / true_slope
    elif gap != 0.0:
        scaled = math.copysign(math.inf, gap)
        portion = scaled
    else:
        scaled = 0.0
        portion = math.nan
    return PathwayAnalysis(
        example=example,
        true_slope=true_slope,
        fused_slope=fused_slope,
        raw_gap=gap,
        scaled_bias=scaled,
        portion=portion,
        latent_recovery_slope=latent,
        surrogate_outcome_slope=theta2,
        dropped_treatment_coef=theta1,
        treatment_surrogate_slope=phi1,
    )


def analyze_pathway(params: PathwayParams) -> PathwayAnalysis:
    """Exact fused-versus-true slopes for the scenario in ``params``."""
    p = params
    if p.example == 1:
        true = p.theta1 + p.theta2 * p.phi1
        fused = p.theta2 * p.phi1
        return _finish(1, true, fused, None, p.theta2, p.theta1, p.phi1)
    if p.example == 2:
        c = p.beta1 * p.var_u / (p.beta1**2 * p.var_u + p.var_x)
        theta2 = p.gamma1 * c + p.gamma2
        theta1 = -p.gamma1 * p.beta2 * c
        true = p.beta2 * p.gamma2
        fused = p.beta2 * theta2
        return _finish(2, true, fused, c, theta2, theta1, p.beta2)
    if p.example == 3:
        c1 = p.gamma1 * p.beta1 * p.var_u / (p.beta1**2 * p.var_u + p.var_x)
        return _finish(3, 0.0, p.beta2 * c1, c1, c1, -p.beta2 * c1, p.beta2)
    if p.example == 4:
        c2 = p.beta3 * p.var_y / (p.beta3**2 * p.var_y + p.var_x)
        return _finish(4, 0.0, c2 * p.beta2, c2, c2, -c2 * p.beta2, p.beta2)
    if p.example == 5:
        c1 = p.gamma1 * p.beta1 * p.var_u / (p.beta1**2 * p.var_u + p.var_x)
        theta2 = c1 + p.gamma2
        theta1 = p.gamma3 - c1 * p.beta2
        true = p.gamma3 + p.beta2 * p.gamma2
        fused = p.beta2 * theta2
        return _finish(5, true, fused, c1, theta2, theta1, p.beta2)
    # example 6: outcome model on both components leaves no treatment term
    true = p.beta2 * p.gamma2
    return _finish(6, true, true, None, None, 0.0, None)


def product_of_estimates(*components: tuple[float, float]) -> tuple[float, float]:
    """First-order (delta method) product of independent estimates.

    Each component is an (estimate, standard error) pair; returns the
    product estimate with its propagated standard error
    ``sqrt(sum_i se_i^2 prod_{j != i} est_j^2)``.
    """
    if len(components) < 2:
        raise ValueError("need at least two components to multiply")
    values = [float(v) for v, _ in components]
    ses = [float(s) for _, s in components]
    if any(s < 0 for s in ses):
        raise ValueError("standard errors must be non-negative")
    prod = math.prod(values)
    var = 0.0
    for i, s in enumerate(ses):
        rest = math.prod(v for j, v in enumerate(values) if j != i)
        var += (s * rest) ** 2
    return prod, math.sqrt(var)
