"""Uncertainty for fused estimates: pooling rules and replication schemes.

Three families of variance estimates are provided for an estimate obtained
by averaging over m imputations:

* closed-form combining rules on the pooled within/between components
  (:func:`pool` then :func:`combine`), with five rule variants whose only
  difference is how the two components and the block-size ratio enter;
* a delete-a-group jackknife (:func:`jackknife`): rows of each source are
  dealt into G groups, the whole pipeline (transforms, conditional fits,
  m imputations, effect regression) is redone on each leave-one-group-out
  dataset, and the spread of the group estimates around their mean gives
  the variance;
* a nonparametric bootstrap (:func:`bootstrap`): whole rows of the stacked
  file are resampled with replacement (not stratified by source), the
  pipeline is redone per resample, and the across-resample variance of the
  resample estimates is reported.

Both replication schemes estimate the variance of the *replicated point
estimate*, so they charge for imputation-model refitting in a way the
closed-form rules cannot; small m inflates their variance by a term that
shrinks like 1/m (jackknife) or 1/(mB) relative terms, which is why
single-imputation jackknives over-cover.

Seed discipline: every scheme derives child seeds per replicate and per
imputation, so results are independent of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .dataset import FusedDataset, SourceTag
from .effects import EffectEstimate, _effect_from_arrays, confidence_interval, resolve_outcome
from .errors import DataError, EstimationError
from .imputation import ImputationModel, _build_plan, _draw_fill, fit
from .rng import child, generator, seed_sequence

__all__ = [
    "PooledMI",
    "CombiningRule",
    "VarianceReport",
    "ReplicateSet",
    "ReplicationResult",
    "pool",
    "combine",
    "partition_groups",
    "jackknife",
    "pseudovalues",
    "bootstrap",
    "imputation_estimates",
]

PARAMETERS = ("intercept", "effect")


# ---------------------------------------------------------------------------
# shared fast path: per-imputation effect estimates without materializing
# completed datasets


def imputation_estimates(
    data: FusedDataset,
    model: ImputationModel,
    m: int,
    seed,
    outcome: str | None = None,
) -> np.ndarray:
    """(m, 4) array of [intercept, effect, var_intercept, var_effect] rows.

    Row k is numerically identical to
    ``estimate_effect(impute_m(data, model, m, seed)[k], outcome)``: the
    same plan, child seeds and draw order are used, only the intermediate
    completed datasets are skipped.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    name = resolve_outcome(data, outcome)
    plan = _build_plan(data, model)
    int_rows = data.source_rows(SourceTag.INTERVENTION)
    int_idx = np.flatnonzero(int_rows)
    z = data.values_of(data.treatment_name)[int_rows]
    y_base = data.values_of(name)[int_rows].copy()
    oj = data.column_index(name)
    if data.missing[:, oj].any() and name not in {s.target for s in model.specs}:
        raise DataError(f"outcome {name!r} has missing cells but no imputation rule")

    # positions of the outcome's imputed rows inside the intervention block
    fill_pos = fill_take = None
    for step in plan.steps:
        if step.cond.spec.target == name:
            take = int_rows[step.rows]
            fill_take = np.flatnonzero(take)
            fill_pos = np.searchsorted(int_idx, step.rows[take])
            break

    out = np.empty((m, 4))
    for k, child_seed in enumerate(seed_sequence(seed).spawn(m)):
        fills = _draw_fill(model, plan, generator(child_seed))
        y = y_base
        if fill_pos is not None and fill_pos.size:
            y = y_base.copy()
            y[fill_pos] = fills[name][1][fill_take]
        intercept, effect, v_int, v_eff, _, _ = _effect_from_arrays(y, z)
        out[k] = (intercept, effect, v_int, v_eff)
    return out


def _as_estimate_rows(estimates: Sequence[EffectEstimate]) -> np.ndarray:
    return np.array(
        [[e.intercept, e.effect, e.var_intercept, e.var_effect] for e in estimates]
    )


# ---------------------------------------------------------------------------
# combining rules


@dataclass(frozen=True)
class PooledMI:
    """Within/between decomposition of m per-imputation estimates."""

    parameter: str
    estimate: float      # mean of per-imputation point estimates
    within_var: float    # mean of per-imputation variance estimates
    between_var: float   # sample variance (denominator m - 1) of point estimates
    m: int


class CombiningRule(Enum):
    """Closed-form total-variance rules on the pooled components.

    With W the within component, B the between component, m the imputation
    count and r the block-size ratio (imputed block rows over donor block
    rows):

    * MI:                   W + (1 + 1/m) B
    * SYNTHETIC:            (1 + 1/m) B - W          (can be negative)
    * POSTERIOR_PREDICTIVE: (r + (1 + r)/m) W
    * SYNTHETIC_SIMPLE:     (r + 1/m) W
    * PARTIAL:              W + B/m
    """

    MI = "T_mi"
    SYNTHETIC = "T_syn"
    POSTERIOR_PREDICTIVE = "T_ppd"
    SYNTHETIC_SIMPLE = "T_s"
    PARTIAL = "T_p"


_NEEDS_RATIO = (CombiningRule.POSTERIOR_PREDICTIVE, CombiningRule.SYNTHETIC_SIMPLE)


@dataclass(frozen=True)
class VarianceReport:
    """One rule's verdict: variance, negativity flag, interval when valid."""

    rule: CombiningRule
    parameter: str
    estimate: float
    variance: float
    negative: bool
    interval: tuple[float, float] | None


def pool(estimates, parameter: str = "effect") -> PooledMI:
    """Average m >= 2 per-imputation estimates into pooled components.

    Accepts either a sequence of :class:`~longfuse.effects.EffectEstimate`
    or the (m, 4) row array that :func:`imputation_estimates` returns.
    """
    if parameter not in PARAMETERS:
        raise ValueError(f"parameter must be one of {PARAMETERS}, got {parameter!r}")
    if isinstance(estimates, np.ndarray):
        rows = np.asarray(estimates, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 4:
            raise ValueError(f"expected an (m, 4) estimate array, got shape {rows.shape}")
        col = PARAMETERS.index(parameter)
        m = rows.shape[0]
        points = rows[:, col]
        variances = rows[:, col + 2]
    else:
        m = len(estimates)
        points = np.array([e.parameter(parameter)[0] for e in estimates])
        variances = np.array([e.parameter(parameter)[1] for e in estimates])
    if m < 2:
        raise ValueError(f"pooling needs at least 2 imputations, got {m}")
    return PooledMI(
        parameter=parameter,
        estimate=float(points.mean()),
        within_var=float(variances.mean()),
        between_var=float(points.var(ddof=1)),
        m=m,
    )


def combine(
    pooled: PooledMI,
    rule: CombiningRule,
    *,
    size_ratio: float | None = None,
    gamma: float = 0.05,
) -> VarianceReport:
    """Apply one combining rule; see :class:`CombiningRule` for formulas.

    ``size_ratio`` is required by the two rules that rescale the within
    component; callers working from a dataset should pass
    ``n_intervention / n_outcomes``.
    """
    w, b, m = pooled.within_var, pooled.between_var, pooled.m
    if rule in _NEEDS_RATIO:
        if size_ratio is None:
            raise ValueError(f"{rule.value} needs size_ratio (imputed rows / donor rows)")
        if size_ratio <= 0:
            raise ValueError(f"size_ratio must be positive, got {size_ratio}")
    if rule is CombiningRule.MI:
        total = w + (1.0 + 1.0 / m) * b
    elif rule is CombiningRule.SYNTHETIC:
        total = (1.0 + 1.0 / m) * b - w
    elif rule is CombiningRule.POSTERIOR_PREDICTIVE:
        total = (size_ratio + (1.0 + size_ratio) / m) * w
    elif rule is CombiningRule.SYNTHETIC_SIMPLE:
        total = (size_ratio + 1.0 / m) * w
    else:  # PARTIAL
        total = w + b / m
    negative = total < 0.0
    interval = None if negative else confidence_interval(pooled.estimate, total, gamma)
    return VarianceReport(
        rule=rule,
        parameter=pooled.parameter,
        estimate=pooled.estimate,
        variance=float(total),
        negative=negative,
        interval=interval,
    )


# ---------------------------------------------------------------------------
# replication schemes


@dataclass(frozen=True)
class ReplicateSet:
    """Per-replicate estimates, columns ordered (intercept, effect)."""

    scheme: str
    estimates: np.ndarray  # (n_replicates, 2)
    m: int


@dataclass(frozen=True)
class ReplicationResult:
    scheme: str
    intercept: float
    effect: float
    var_intercept: float
    var_effect: float
    replicates: ReplicateSet
    n_rejected: int = 0

    def parameter(self, name: str) -> tuple[float, float]:
        if name == "intercept":
            return self.intercept, self.var_intercept
        if name == "effect":
            return self.effect, self.var_effect
        raise ValueError(f"unknown parameter {name!r}")


def partition_groups(data: FusedDataset, n_groups: int, seed) -> np.ndarray:
    """Random group label per row, stratified by source.

    Within each source the rows are randomly permuted and dealt
    round-robin, so group sizes within a source differ by at most one and
    every group keeps both sources represented.
    """
    if n_groups < 2:
        raise ValueError(f"need at least 2 groups, got {n_groups}")
    smallest = min(data.n_outcomes, data.n_intervention)
    if n_groups > smallest:
        raise DataError(
            f"{n_groups} groups but the smaller source has only {smallest} rows"
        )
    rng = generator(seed)
    labels = np.empty(data.n_rows, dtype=np.int64)
    for tag in (SourceTag.OUTCOMES, SourceTag.INTERVENTION):
        idx = np.flatnonzero(data.source_rows(tag))
        perm = rng.permutation(idx.size)
        labels[idx[perm]] = np.arange(idx.size) % n_groups
    return labels


def jackknife(
    data: FusedDataset,
    specs,
    n_groups: int,
    m: int,
    seed,
    outcome: str | None = None,
) -> ReplicationResult:
    """Delete-a-group jackknife with a full pipeline refit per group.

    Child seed 0 drives the partition; child 1 + g drives group g's
    imputations.  The reported point estimate is the mean of the G
    leave-one-out estimates; the variance is ``(G - 1) / G`` times their
    sum of squared deviations from that mean, per parameter.
    """
    root = seed_sequence(seed)
    labels = partition_groups(data, n_groups, child(root, 0))
    theta = np.empty((n_groups, 2))
    for g in range(n_groups):
        sub = data.take_rows(labels != g)
        model = fit(sub, specs)
        ests = imputation_estimates(sub, model, m, child(root, 1 + g), outcome)
        theta[g] = ests[:, :2].mean(axis=0)
    point = theta.mean(axis=0)
    dev = theta - point
    var = (n_groups - 1) / n_groups * (dev**2).sum(axis=0)
    return ReplicationResult(
        scheme="jackknife",
        intercept=float(point[0]),
        effect=float(point[1]),
        var_intercept=float(var[0]),
        var_effect=float(var[1]),
        replicates=ReplicateSet(scheme="jackknife", estimates=theta, m=m),
    )


def pseudovalues(result: ReplicationResult) -> np.ndarray:
    """Jackknife pseudovalues, (G, 2): G * mean - (G - 1) * leave-one-out.

    Their mean reproduces the jackknife point estimate exactly, and their
    sample variance divided by G reproduces the jackknife variance exactly.
    """
    if result.replicates.scheme != "jackknife":
        raise ValueError("pseudovalues are defined for jackknife replicates only")
    theta = result.replicates.estimates
    g = theta.shape[0]
    point = np.array([result.intercept, result.effect])
    return g * point - (g - 1) * theta


def bootstrap(
    data: FusedDataset,
    specs,
    n_resamples: int,
    m: int,
    seed,
    outcome: str | None = None,
    max_consecutive_rejects: int = 100,
) -> ReplicationResult:
    """Row bootstrap of the stacked file with a pipeline refit per resample.

    Resampling is not stratified: each resample draws n rows with
    replacement from the whole file, so source block sizes vary.  Resamples
    that lose a source entirely, lose a treatment arm, or leave any
    conditional without enough complete rows are rejected and redrawn;
    more than ``max_consecutive_rejects`` rejections in a row abort.
    """
    if n_resamples < 2:
        raise ValueError(f"need at least 2 resamples, got {n_resamples}")
    root = seed_sequence(seed)
    n = data.n_rows
    int_rows = data.source_rows(SourceTag.INTERVENTION)
    z_full = data.values_of(data.treatment_name)
    specs = tuple(specs)

    # complete-case eligibility per spec, on the original rows
    eligible = []
    min_rows = []
    for spec in specs:
        ok = ~data.missing_of(spec.target)
        for pname in spec.predictors:
            ok = ok & ~data.missing_of(pname)
        eligible.append(ok)
        min_rows.append(spec.n_params + 10)

    theta = np.empty((n_resamples, 2))
    rejected = 0
    for b in range(n_resamples):
        draw_rng = generator(child(root, b, 0))
        for attempt in range(max_consecutive_rejects + 1):
            idx = draw_rng.integers(0, n, size=n)
            take_int = int_rows[idx]
            n_int = int(take_int.sum())
            if n_int == 0 or n_int == n:
                rejected += 1
                continue
            z_take = z_full[idx][take_int]
            if z_take.min() == z_take.max():
                rejected += 1
                continue
            if any(int(e[idx].sum()) < r for e, r in zip(eligible, min_rows)):
                rejected += 1
                continue
            break
        else:
            raise EstimationError(
                f"bootstrap resample {b}: more than {max_consecutive_rejects} "
                "degenerate draws in a row"
            )
        sub = data.take_rows(idx)
        model = fit(sub, specs)
        ests = imputation_estimates(sub, model, m, child(root, b, 1), outcome)
        theta[b] = ests[:, :2].mean(axis=0)
    point = theta.mean(axis=0)
    var = theta.var(axis=0, ddof=1)
    return ReplicationResult(
        scheme="bootstrap",
        intercept=float(point[0]),
        effect=float(point[1]),
        var_intercept=float(var[0]),
        var_effect=float(var[1]),
        replicates=ReplicateSet(scheme="bootstrap", estimates=theta, m=m),
        n_rejected=rejected,
    )
