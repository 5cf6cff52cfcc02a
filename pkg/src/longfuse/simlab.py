"""Simulation studies for the fusion pipeline.

Data generating process
-----------------------
Four latent traits per subject are equicorrelated standard normals
(pairwise correlation 0.5).  Intervention subjects get a fair-coin
treatment Z; treatment shifts the third and fourth predictors by +0.5
each.  The long-term outcome is 0.5 times the sum of the four predictors
plus unit normal noise.  Intervention recruitment truncates on the first
predictor (keep X1 >= -0.5 by default), so roughly 69% of the base draw
remains; outcomes-source subjects are drawn without truncation and their
outcome is recorded while their treatment is structurally 0.

Under those defaults the true parameter values are closed form: the
treatment effect is 0.5 exactly, and the control-arm mean is
1.25 * pdf(-0.5) / (1 - cdf(-0.5)) ~= 0.63645 by the standard truncated
normal mean together with E[Xj | X1] = X1 / 2 for the other three
predictors.

Scenario knobs deliberately break one identifying condition at a time:

* ``primary``          - everything well specified;
* ``reduced_outcomes`` - the outcomes source is also restricted on X1
  (aligned side by default, see ``reduced_direction``);
* ``drop_x3``          - X3 is withheld from the imputation model although
  treatment shifts it;
* ``no_covariates``    - only the treatment-affected predictors X3, X4
  enter the imputation model;
* ``different_conditionals`` - the outcomes source generates its outcome
  with slopes 0.6 instead of 0.5, violating the equal-conditionals
  condition.

``run_study`` repeats generate -> stack -> fit -> impute -> estimate R
times, applies every configured variance method to identical data within
a replication, and reports bias, root mean squared error and interval
coverage per parameter and method.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .dataset import ColumnKind, ColumnSchema, FusedDataset, VariableRole, concatenate
from .errors import DataError, EstimationError, SchemaError
from .imputation import ConditionalModelSpec, fit
from .pathways import PathwayParams, product_of_estimates
from .replication import (
    CombiningRule,
    bootstrap,
    combine,
    imputation_estimates,
    jackknife,
    pool,
)
from .rng import child, generator, seed_sequence

__all__ = [
    "SCENARIOS",
    "MethodPlan",
    "ScenarioSpec",
    "TruthValues",
    "MetricSet",
    "MethodMetrics",
    "StudyResult",
    "PathwayMonteCarlo",
    "simulation_schema",
    "scenario_conditionals",
    "generate_pair",
    "generate_fused",
    "truth",
    "summarize",
    "run_study",
    "simulate_pathway",
]

SCENARIOS = (
    "primary",
    "reduced_outcomes",
    "drop_x3",
    "no_covariates",
    "different_conditionals",
)

_PREDICTORS = ("X1", "X2", "X3", "X4")
_TRAIT_CORRELATION = 0.5
_TREAT_SHIFT = 0.5          # added to X3 and X4 under treatment
_OUTCOME_SLOPE = 0.5        # per-predictor outcome slope, intervention world
_ALTERED_SLOPE = 0.6        # outcomes-source slope under different_conditionals


@dataclass(frozen=True)
class MethodPlan:
    """Which variance methods a study runs.

    ``pooled_m`` > 0 activates the closed-form combining rules on that many
    imputations (all five rules are reported from the same imputation
    set).  ``jackknife`` holds (n_groups, m) pairs, ``bootstrap`` holds
    (n_resamples, m) pairs.  ``size_ratio`` overrides the per-replicate
    intervention/outcomes row ratio used by the ratio-based rules.
    """

    pooled_m: int = 0
    size_ratio: float | None = None
    jackknife: tuple[tuple[int, int], ...] = ()
    bootstrap: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "jackknife", tuple(tuple(p) for p in self.jackknife))
        object.__setattr__(self, "bootstrap", tuple(tuple(p) for p in self.bootstrap))
        if self.pooled_m < 0:
            raise SchemaError("pooled_m cannot be negative")
        if self.pooled_m == 1:
            raise SchemaError("combining rules need at least 2 imputations")
        for g, m in self.jackknife:
            if g < 2 or m < 1:
                raise SchemaError(f"bad jackknife entry (groups={g}, m={m})")
        for b, m in self.bootstrap:
            if b < 2 or m < 1:
                raise SchemaError(f"bad bootstrap entry (resamples={b}, m={m})")
        if not (self.pooled_m or self.jackknife or self.bootstrap):
            raise SchemaError("method plan is empty")


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation configuration (generator knobs plus analysis plan)."""

    scenario: str
    replications: int
    methods: MethodPlan
    n_outcomes: int = 500
    n_intervention_base: int = 724
    treat_prob: float = 0.5
    truncate_at: float | None = -0.5
    reduced_direction: str = "match"
    gamma: float = 0.05

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise SchemaError(f"unknown scenario {self.scenario!r}; pick one of {SCENARIOS}")
        if self.replications < 1:
            raise SchemaError("replications must be >= 1")
        if self.n_outcomes < 30 or self.n_intervention_base < 30:
            raise SchemaError("source sizes below 30 rows are not supported")
        if not 0.0 < self.treat_prob < 1.0:
            raise SchemaError("treat_prob must be in (0, 1)")
        if not 0.0 < self.gamma < 1.0:
            raise SchemaError("gamma must be in (0, 1)")
        if self.reduced_direction not in ("match", "opposite"):
            raise SchemaError("reduced_direction must be 'match' or 'opposite'")
        if self.scenario == "reduced_outcomes" and self.truncate_at is None:
            raise SchemaError("reduced_outcomes needs a truncation threshold")


def simulation_schema() -> tuple[ColumnSchema, ...]:
    """Column declarations for the simulated stacked file."""
    return (
        ColumnSchema("Z", VariableRole.TREATMENT, ColumnKind.BINARY),
        ColumnSchema("X1", VariableRole.COVARIATE, ColumnKind.CONTINUOUS),
        ColumnSchema("X2", VariableRole.COVARIATE, ColumnKind.CONTINUOUS),
        ColumnSchema("X3", VariableRole.INTERMEDIATE, ColumnKind.CONTINUOUS),
        ColumnSchema("X4", VariableRole.INTERMEDIATE, ColumnKind.CONTINUOUS),
        ColumnSchema("Y", VariableRole.OUTCOME, ColumnKind.CONTINUOUS),
    )


def scenario_conditionals(spec: ScenarioSpec) -> tuple[ConditionalModelSpec, ...]:
    """The imputation model each scenario is allowed to use."""
    if spec.scenario == "drop_x3":
        predictors = ("X1", "X2", "X4")
    elif spec.scenario == "no_covariates":
        predictors = ("X3", "X4")
    else:
        predictors = _PREDICTORS
    return (ConditionalModelSpec(target="Y", predictors=predictors),)


def _trait_cholesky() -> np.ndarray:
    cov = np.full((4, 4), _TRAIT_CORRELATION)
    np.fill_diagonal(cov, 1.0)
    return np.linalg.cholesky(cov)


def generate_pair(spec: ScenarioSpec, seed) -> tuple[dict, dict]:
    """Draw one (outcomes table, intervention table) pair.

    Randomness is consumed in a fixed order (intervention traits,
    treatment coin, outcomes traits, outcome noise) so generated pairs are
    stable under refactoring of downstream code.
    """
    rng = generator(seed)
    chol = _trait_cholesky()

    w_int = rng.standard_normal((spec.n_intervention_base, 4)) @ chol.T
    z = rng.binomial(1, spec.treat_prob, spec.n_intervention_base).astype(float)
    x_int = w_int.copy()
    x_int[:, 2] += _TREAT_SHIFT * z
    x_int[:, 3] += _TREAT_SHIFT * z
    if spec.truncate_at is not None:
        keep = x_int[:, 0] >= spec.truncate_at
        if keep.sum() < 30:
            raise DataError("truncation left fewer than 30 intervention rows")
        x_int = x_int[keep]
        z = z[keep]

    w_out = rng.standard_normal((spec.n_outcomes, 4)) @ chol.T
    noise = rng.standard_normal(spec.n_outcomes)
    slope = _ALTERED_SLOPE if spec.scenario == "different_conditionals" else _OUTCOME_SLOPE
    y_out = slope * w_out.sum(axis=1) + noise
    if spec.scenario == "reduced_outcomes":
        if spec.reduced_direction == "match":
            keep = w_out[:, 0] >= spec.truncate_at
        else:
            keep = w_out[:, 0] < spec.truncate_at
        if keep.sum() < 30:
            raise DataError("outcomes-side restriction left fewer than 30 rows")
        w_out = w_out[keep]
        y_out = y_out[keep]

    outcomes = {name: w_out[:, j] for j, name in enumerate(_PREDICTORS)}
    outcomes["Y"] = y_out
    intervention = {"Z": z}
    intervention.update({name: x_int[:, j] for j, name in enumerate(_PREDICTORS)})
    return outcomes, intervention


def generate_fused(spec: ScenarioSpec, seed) -> FusedDataset:
    """Generate a pair and stack it."""
    outcomes, intervention = generate_pair(spec, seed)
    return concatenate(outcomes, intervention, simulation_schema())


@dataclass(frozen=True)
class TruthValues:
    intercept: float
    effect: float


def truth(spec: ScenarioSpec) -> TruthValues:
    """Closed-form target values for a scenario.

    The intervention-world parameters do not depend on the scenario knobs
    that only change what the analyst gets to see (imputation predictors,
    outcomes-source slopes or restriction): the effect is
    2 * slope * shift = 0.5 and the control mean is
    2.5 * slope * E[X1 | X1 >= a] under truncation at a (0 without).
    """
    if spec.truncate_at is None:
        mean_x1 = 0.0
    else:
        a = spec.truncate_at
        mean_x1 = norm.pdf(a) / norm.sf(a)
    intercept = 2.5 * _OUTCOME_SLOPE * mean_x1
    effect = 2.0 * _OUTCOME_SLOPE * _TREAT_SHIFT
    return TruthValues(intercept=float(intercept), effect=float(effect))


# ---------------------------------------------------------------------------
# study metrics


@dataclass(frozen=True)
class MetricSet:
    """Bias, root-MSE and interval coverage of one parameter and method."""

    bias: float
    rmse: float
    coverage: float | None
    mean_variance: float | None
    n_estimates: int
    n_intervals: int


@dataclass(frozen=True)
class MethodMetrics:
    label: str
    intercept: MetricSet
    effect: MetricSet
    n_negative_variance: int = 0
    n_rejected_resamples: int = 0


@dataclass(frozen=True)
class StudyResult:
    scenario: str
    replications: int
    n_failed: int
    truth: TruthValues
    gamma: float
    methods: tuple[MethodMetrics, ...]
    wall_seconds: float

    def method(self, label: str) -> MethodMetrics:
        for m in self.methods:
            if m.label == label:
                return m
        raise KeyError(f"no method {label!r} in this study")


def summarize(
    estimates: np.ndarray,
    variances: np.ndarray,
    truth_value: float,
    gamma: float = 0.05,
) -> MetricSet:
    """Aggregate per-replication (estimate, variance) pairs against a truth.

    ``variances`` may contain NaN where a replication produced no valid
    variance (negative combining-rule total); those replications are
    excluded from coverage and mean variance but not from bias/rmse.
    """
    est = np.asarray(estimates, dtype=float)
    var = np.asarray(variances, dtype=float)
    if est.shape != var.shape or est.ndim != 1 or est.size == 0:
        raise ValueError("estimates and variances must be equal-length 1-d arrays")
    err = est - truth_value
    bias = float(err.mean())
    rmse = float(np.sqrt((err**2).mean()))
    valid = ~np.isnan(var)
    n_valid = int(valid.sum())
    if n_valid == 0:
        coverage = None
        mean_var = None
    else:
        half = norm.ppf(1.0 - gamma / 2.0) * np.sqrt(var[valid])
        coverage = float((np.abs(err[valid]) <= half).mean())
        mean_var = float(var[valid].mean())
    return MetricSet(
        bias=bias,
        rmse=rmse,
        coverage=coverage,
        mean_variance=mean_var,
        n_estimates=est.size,
        n_intervals=n_valid,
    )


# ---------------------------------------------------------------------------
# the replicated study


def _one_replicate(spec: ScenarioSpec, root, r: int) -> list[tuple]:
    """All method rows for replication r; identical data across methods."""
    data = generate_fused(spec, child(root, r, 0))
    conditionals = scenario_conditionals(spec)
    ratio = data.n_intervention / data.n_outcomes
    plan = spec.methods
    rows: list[tuple] = []
    slot = 1
    if plan.pooled_m:
        ests = imputation_estimates(
            data, fit(data, conditionals), plan.pooled_m, child(root, r, slot)
        )
        slot += 1
        pooled = {p: pool(ests, p) for p in ("intercept", "effect")}
        for rule in CombiningRule:
            reports = {
                p: combine(
                    pooled[p],
                    rule,
                    size_ratio=plan.size_ratio if plan.size_ratio is not None else ratio,
                    gamma=spec.gamma,
                )
                for p in ("intercept", "effect")
            }
            rows.append(
                (
                    rule.value,
                    reports["intercept"].estimate,
                    reports["effect"].estimate,
                    np.nan if reports["intercept"].negative else reports["intercept"].variance,
                    np.nan if reports["effect"].negative else reports["effect"].variance,
                    int(reports["intercept"].negative or reports["effect"].negative),
                    0,
                )
            )
    for n_groups, m in plan.jackknife:
        res = jackknife(data, conditionals, n_groups, m, child(root, r, slot))
        slot += 1
        rows.append(
            (
                f"jackknife_G{n_groups}_m{m}",
                res.intercept,
                res.effect,
                res.var_intercept,
                res.var_effect,
                0,
                0,
            )
        )
    for n_resamples, m in plan.bootstrap:
        res = bootstrap(data, conditionals, n_resamples, m, child(root, r, slot))
        slot += 1
        rows.append(
            (
                f"bootstrap_B{n_resamples}_m{m}",
                res.intercept,
                res.effect,
                res.var_intercept,
                res.var_effect,
                0,
                res.n_rejected,
            )
        )
    return rows


def _replicate_worker(args) -> tuple[int, list[tuple] | None, str | None]:
    spec, root, r = args
    try:
        return r, _one_replicate(spec, root, r), None
    except (DataError, EstimationError) as exc:
        return r, None, f"replication {r}: {exc}"


def run_study(spec: ScenarioSpec, seed, threads: int = 1) -> StudyResult:
    """Run the full study; deterministic for fixed (spec, seed).

    Replications are independent work units seeded by index, so results
    are identical for any ``threads`` setting; failed replications are
    counted and excluded.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    t0 = time.perf_counter()
    root = seed_sequence(seed)
    jobs = [(spec, root, r) for r in range(spec.replications)]
    if threads == 1:
        outcomes = [_replicate_worker(j) for j in jobs]
    else:
        chunk = max(1, spec.replications // (8 * threads))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_replicate_worker, jobs, chunksize=chunk))

    labels: list[str] = []
    collected: dict[str, list[tuple]] = {}
    n_failed = 0
    for _, rows, err in outcomes:
        if err is not None:
            n_failed += 1
            continue
        for row in rows:
            if row[0] not in collected:
                labels.append(row[0])
                collected[row[0]] = []
            collected[row[0]].append(row[1:])
    if not collected:
        raise EstimationError("every replication failed")

    truths = truth(spec)
    methods = []
    for label in labels:
        rows = np.array([r[:4] for r in collected[label]], dtype=float)
        negatives = sum(r[4] for r in collected[label])
        rejected = sum(r[5] for r in collected[label])
        methods.append(
            MethodMetrics(
                label=label,
                intercept=summarize(rows[:, 0], rows[:, 2], truths.intercept, spec.gamma),
                effect=summarize(rows[:, 1], rows[:, 3], truths.effect, spec.gamma),
                n_negative_variance=int(negatives),
                n_rejected_resamples=int(rejected),
            )
        )
    return StudyResult(
        scenario=spec.scenario,
        replications=spec.replications,
        n_failed=n_failed,
        truth=truths,
        gamma=spec.gamma,
        methods=tuple(methods),
        wall_seconds=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# pathway scenarios: Monte Carlo versions of the closed-form calculators


@dataclass(frozen=True)
class PathwayMonteCarlo:
    """Simulation estimates of the fused and true slopes for one scenario."""

    example: int
    n: int
    true_slope: float
    true_se: float
    fused_slope: float
    fused_se: float


def _ols(design: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficients, their covariance, and residuals (flat-prior OLS)."""
    gram = design.T @ design
    coef = np.linalg.solve(gram, design.T @ y)
    resid = y - design @ coef
    dof = design.shape[0] - design.shape[1]
    sigma2 = float(resid @ resid) / dof
    return coef, sigma2 * np.linalg.inv(gram), resid


def _with_intercept(*cols: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(cols[0].size), *cols])


def _sample_pathway(p: PathwayParams, z: np.ndarray, rng: np.random.Generator) -> dict:
    """One draw of the structural system given a treatment vector."""
    n = z.size
    ex = p.example
    if ex == 1:
        x = p.phi0 + p.phi1 * z + np.sqrt(p.var_x) * rng.standard_normal(n)
        y = p.theta0 + p.theta1 * z + p.theta2 * x + np.sqrt(p.var_y) * rng.standard_normal(n)
        return {"x": x, "y": y}
    if ex in (2, 3, 5):
        u = p.alpha0 + np.sqrt(p.var_u) * rng.standard_normal(n)
        x = p.beta0 + p.beta1 * u + p.beta2 * z + np.sqrt(p.var_x) * rng.standard_normal(n)
        y = p.gamma0 + p.gamma1 * u + np.sqrt(p.var_y) * rng.standard_normal(n)
        if ex == 2:
            y = y + p.gamma2 * x
        elif ex == 5:
            y = y + p.gamma2 * x + p.gamma3 * z
        return {"x": x, "y": y}
    if ex == 4:
        y = p.gamma0 + np.sqrt(p.var_y) * rng.standard_normal(n)
        x = p.beta0 + p.beta2 * z + p.beta3 * y + np.sqrt(p.var_x) * rng.standard_normal(n)
        return {"x": x, "y": y}
    x1 = p.alpha0 + np.sqrt(p.var_1) * rng.standard_normal(n)
    x2 = p.beta0 + p.beta1 * x1 + p.beta2 * z + np.sqrt(p.var_2) * rng.standard_normal(n)
    y = p.gamma0 + p.gamma1 * x1 + p.gamma2 * x2 + np.sqrt(p.var_y) * rng.standard_normal(n)
    return {"x1": x1, "x2": x2, "y": y}


def simulate_pathway(params: PathwayParams, n: int, seed, treat_prob: float = 0.5) -> PathwayMonteCarlo:
    """Monte Carlo counterpart of :func:`longfuse.pathways.analyze_pathway`.

    Three independent datasets of n rows are drawn: an intervention-style
    one (treatment observed, outcome discarded) giving the
    predictor-on-treatment slope, an outcomes-style one (treatment fixed
    at 0) giving the outcome-on-predictor slope, and an oracle one where
    the outcome is regressed on treatment directly for the true slope.
    The fused slope is the product of the first two (delta-method standard
    error); in the two-predictor scenario it is the dot product of the
    slope vectors with the full covariance propagated.
    """
    if n < 100:
        raise ValueError("use at least 100 rows per dataset")
    rng = generator(seed)
    z_int = rng.binomial(1, treat_prob, n).astype(float)
    sys_int = _sample_pathway(params, z_int, rng)
    sys_out = _sample_pathway(params, np.zeros(n), rng)
    z_orc = rng.binomial(1, treat_prob, n).astype(float)
    sys_orc = _sample_pathway(params, z_orc, rng)

    coef_true, cov_true, _ = _ols(_with_intercept(z_orc), sys_orc["y"])
    true_slope = float(coef_true[1])
    true_se = float(np.sqrt(cov_true[1, 1]))

    if params.example == 6:
        coef_g, cov_g, _ = _ols(
            _with_intercept(sys_out["x1"], sys_out["x2"]), sys_out["y"]
        )
        gammas = coef_g[1:]
        cov_gammas = cov_g[1:, 1:]
        # bivariate predictor-on-treatment regression shares the design, so
        # slope covariance is the residual covariance times the z precision
        design = _with_intercept(z_int)
        targets = np.column_stack([sys_int["x1"], sys_int["x2"]])
        gram_inv = np.linalg.inv(design.T @ design)
        coef_b = gram_inv @ design.T @ targets
        resid = targets - design @ coef_b
        sigma = resid.T @ resid / (n - 2)
        slopes = coef_b[1]
        cov_slopes = sigma * gram_inv[1, 1]
        fused = float(slopes @ gammas)
        fused_var = float(gammas @ cov_slopes @ gammas + slopes @ cov_gammas @ slopes)
        return PathwayMonteCarlo(
            example=6,
            n=n,
            true_slope=true_slope,
            true_se=true_se,
            fused_slope=fused,
            fused_se=float(np.sqrt(fused_var)),
        )

    coef_t, cov_t, _ = _ols(_with_intercept(sys_out["x"]), sys_out["y"])
    coef_p, cov_p, _ = _ols(_with_intercept(z_int), sys_int["x"])
    fused, fused_se = product_of_estimates(
        (float(coef_t[1]), float(np.sqrt(cov_t[1, 1]))),
        (float(coef_p[1]), float(np.sqrt(cov_p[1, 1]))),
    )
    return PathwayMonteCarlo(
        example=params.example,
        n=n,
        true_slope=true_slope,
        true_se=true_se,
        fused_slope=fused,
        fused_se=fused_se,
    )
