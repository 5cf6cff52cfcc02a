"""Multiple imputation of missing cells via sequential Gaussian conditionals.

Model
-----
Each column that can be missing gets a :class:`ConditionalModelSpec` naming
its predictors.  Fitting proceeds on normal-score scale (see
:mod:`longfuse.transforms`): for a spec with target t and predictors
x_1..x_p, ordinary least squares of T_t(t) on [1, T_1(x_1), .., T_p(x_p)]
over the rows where target and predictors are all observed gives the
sufficient statistics (coefficient solution, residual sum of squares,
degrees of freedom, Gram factor).

Imputation is *proper*: each imputation first draws the residual variance
from its scaled inverse chi-square posterior, sigma^2 = RSS / chisq(dof),
then coefficients from N(beta_hat, sigma^2 (X'X)^{-1}), then fills every
missing target cell with the inverse-transformed value of
x'beta + sigma * N(0, 1).  Flat priors on (beta, log sigma) are used
throughout, so between-imputation spread reflects estimation uncertainty
in the conditional model as well as residual noise.

Specs are processed in order; a later spec may use an earlier target as a
predictor (sequential factorization of the joint), in which case the
freshly imputed values feed its design row.  The treatment indicator is
banned from every spec, as target and as predictor, so that imputations
are identical in law across arms given the shared predictors.

Determinism
-----------
``impute_once`` consumes randomness in a fixed order: first the parameter
draws of every conditional (chi-square deviate, then coefficient normals,
in spec order), then one standard normal per missing target cell, again in
spec order.  ``impute_m`` derives one child seed per imputation, so
imputation k is reproducible in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import FusedDataset, VariableRole
from .errors import DataError, EstimationError, SchemaError
from .rng import generator, seed_sequence
from .transforms import fit_transform

__all__ = [
    "ConditionalModelSpec",
    "FittedConditional",
    "ImputationModel",
    "PosteriorDraw",
    "fit",
    "draw_parameters",
    "impute_once",
    "impute_m",
    "default_specs",
]

_MIN_EXTRA_ROWS = 10  # fit rows required beyond the parameter count


@dataclass(frozen=True)
class ConditionalModelSpec:
    """One conditional: impute ``target`` from ``predictors``."""

    target: str
    predictors: tuple[str, ...]
    intercept: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "predictors", tuple(self.predictors))
        if self.target in self.predictors:
            raise SchemaError(f"{self.target!r} cannot predict itself")
        if len(set(self.predictors)) != len(self.predictors):
            raise SchemaError(f"duplicate predictors for target {self.target!r}")

    @property
    def n_params(self) -> int:
        return len(self.predictors) + (1 if self.intercept else 0)


@dataclass(frozen=True)
class FittedConditional:
    """Least-squares summary of one conditional on the score scale."""

    spec: ConditionalModelSpec
    coefficients: np.ndarray  # OLS solution, intercept first when present
    rss: float
    dof: int
    n_fit: int
    coef_noise_map: np.ndarray  # M with M @ N(0, I) ~ N(0, (X'X)^{-1})


@dataclass(frozen=True)
class ImputationModel:
    """Fitted transforms plus fitted conditionals, in imputation order."""

    specs: tuple[ConditionalModelSpec, ...]
    conditionals: tuple[FittedConditional, ...]
    transforms: dict  # column name -> transform


@dataclass(frozen=True)
class PosteriorDraw:
    target: str
    coefficients: np.ndarray
    residual_variance: float


# ---------------------------------------------------------------------------
# fitting


def _diagnose_rank(design: np.ndarray, names: list[str], target: str) -> None:
    """Raise an EstimationError naming the columns behind a rank deficiency."""
    from scipy.linalg import qr

    _, r, piv = qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max(initial=0.0) * max(design.shape) * np.finfo(float).eps
    rank = int((diag > tol).sum())
    offenders = [names[j] for j in piv[rank:]]
    raise EstimationError(
        f"design for target {target!r} is rank deficient; "
        f"dependent columns: {', '.join(offenders) or 'unknown'}"
    )


def fit(data: FusedDataset, specs) -> ImputationModel:
    """Fit every conditional once on the complete-case rows of ``data``.

    Transforms are built from all observed values of each referenced
    column (both sources pooled).  Raises :class:`SchemaError` for
    structural problems, :class:`DataError` for insufficient or degenerate
    data, :class:`EstimationError` for rank-deficient designs.
    """
    specs = tuple(specs)
    if not specs:
        raise SchemaError("need at least one conditional model spec")
    treatment = data.treatment_name
    seen_targets: set[str] = set()
    used_cols: list[str] = []
    for spec in specs:
        if spec.target == treatment:
            raise SchemaError("the treatment indicator is never imputed")
        if treatment in spec.predictors:
            raise SchemaError(
                f"target {spec.target!r}: the treatment indicator cannot be a "
                "predictor; imputations must not condition on treatment"
            )
        if spec.target in seen_targets:
            raise SchemaError(f"duplicate spec for target {spec.target!r}")
        seen_targets.add(spec.target)
        for name in (spec.target, *spec.predictors):
            data.column_index(name)  # raises SchemaError if unknown
            if name not in used_cols:
                used_cols.append(name)

    transforms = {}
    for name in used_cols:
        observed = data.values_of(name)[~data.missing_of(name)]
        if observed.size == 0:
            raise DataError(f"column {name!r} has no observed values to learn from")
        transforms[name] = fit_transform(observed, data.column_schema(name).kind)

    conditionals = []
    for spec in specs:
        tj = data.column_index(spec.target)
        fit_mask = ~data.missing[:, tj]
        for pname in spec.predictors:
            fit_mask &= ~data.missing_of(pname)
        n_fit = int(fit_mask.sum())
        if n_fit < spec.n_params + _MIN_EXTRA_ROWS:
            raise DataError(
                f"target {spec.target!r}: only {n_fit} complete rows for "
                f"{spec.n_params} parameters (need at least {spec.n_params + _MIN_EXTRA_ROWS})"
            )
        t_obs = data.values[fit_mask, tj]
        if np.unique(t_obs).size < 2:
            raise DataError(f"target {spec.target!r} has no variation among fit rows")

        names = (["(intercept)"] if spec.intercept else []) + list(spec.predictors)
        design = np.empty((n_fit, spec.n_params))
        c0 = 0
        if spec.intercept:
            design[:, 0] = 1.0
            c0 = 1
        for k, pname in enumerate(spec.predictors):
            design[:, c0 + k] = transforms[pname].forward(data.values[fit_mask, data.column_index(pname)])
        t = transforms[spec.target].forward(t_obs)

        gram = design.T @ design
        if not np.isfinite(gram).all() or np.linalg.cond(gram) > 1e12:
            _diagnose_rank(design, names, spec.target)
        chol = np.linalg.cholesky(gram)
        coef = np.linalg.solve(gram, design.T @ t)
        resid = t - design @ coef
        rss = float(resid @ resid)
        dof = n_fit - spec.n_params
        conditionals.append(
            FittedConditional(
                spec=spec,
                coefficients=coef,
                rss=rss,
                dof=dof,
                n_fit=n_fit,
                coef_noise_map=np.linalg.inv(chol).T,
            )
        )
    return ImputationModel(specs=specs, conditionals=tuple(conditionals), transforms=transforms)


# ---------------------------------------------------------------------------
# posterior draws


def _param_draw(cond: FittedConditional, rng: np.random.Generator):
    """Residual variance then coefficients; fixed consumption order."""
    sigma2 = cond.rss / rng.chisquare(cond.dof)
    z = rng.standard_normal(cond.coefficients.size)
    beta = cond.coefficients + np.sqrt(sigma2) * (cond.coef_noise_map @ z)
    return sigma2, beta


def draw_parameters(model: ImputationModel, seed) -> list[PosteriorDraw]:
    """Draw one posterior parameter set per conditional, in spec order.

    This consumes randomness exactly as the first phase of
    :func:`impute_once` with the same seed does, so parameter draws can be
    audited in isolation.
    """
    rng = generator(seed)
    out = []
    for cond in model.conditionals:
        sigma2, beta = _param_draw(cond, rng)
        out.append(
            PosteriorDraw(target=cond.spec.target, coefficients=beta, residual_variance=sigma2)
        )
    return out


# ---------------------------------------------------------------------------
# imputation plans (shared by the materializing and streaming paths)


@dataclass
class _PlanStep:
    cond: FittedConditional
    target_index: int
    rows: np.ndarray      # global indices of rows with the target missing
    design: np.ndarray    # transformed predictors at those rows; holes undefined
    holes: tuple          # (design col, donor step, positions here, positions in donor)
    needs_scores: bool    # some later step reads this step's imputed scores


@dataclass
class _Plan:
    steps: list


def _build_plan(data: FusedDataset, model: ImputationModel) -> _Plan:
    target_order = {s.target: i for i, s in enumerate(model.specs)}
    for j, col in enumerate(data.schema):
        if data.missing[:, j].any() and col.name not in target_order:
            raise DataError(
                f"column {col.name!r} has missing cells but no imputation rule covers it"
            )

    steps: list[_PlanStep] = []
    for si, cond in enumerate(model.conditionals):
        spec = cond.spec
        tj = data.column_index(spec.target)
        rows = np.flatnonzero(data.missing[:, tj])
        design = np.empty((rows.size, spec.n_params))
        c0 = 0
        if spec.intercept:
            design[:, 0] = 1.0
            c0 = 1
        holes = []
        for k, pname in enumerate(spec.predictors):
            pj = data.column_index(pname)
            design[:, c0 + k] = model.transforms[pname].forward(data.values[rows, pj])
            miss = data.missing[rows, pj]
            if miss.any():
                donor = target_order.get(pname)
                if donor is None or donor >= si:
                    raise DataError(
                        f"predictor {pname!r} of target {spec.target!r} has missing "
                        "cells that are not imputed by an earlier conditional"
                    )
                pos = np.flatnonzero(miss)
                donor_pos = np.searchsorted(steps[donor].rows, rows[pos])
                steps[donor].needs_scores = True
                holes.append((c0 + k, donor, pos, donor_pos))
        steps.append(
            _PlanStep(
                cond=cond,
                target_index=tj,
                rows=rows,
                design=design,
                holes=tuple(holes),
                needs_scores=False,
            )
        )
    return _Plan(steps=steps)


def _draw_fill(model: ImputationModel, plan: _Plan, rng: np.random.Generator) -> dict:
    """One imputation pass: target name -> (row indices, imputed values)."""
    params = [_param_draw(cond, rng) for cond in model.conditionals]
    values: list[np.ndarray] = []
    scores: list = []
    for si, step in enumerate(plan.steps):
        sigma2, beta = params[si]
        design = step.design
        if step.holes:
            design = design.copy()
            for col, donor, pos, donor_pos in step.holes:
                design[pos, col] = scores[donor][donor_pos]
        latent = design @ beta
        latent += np.sqrt(sigma2) * rng.standard_normal(step.rows.size)
        tr = model.transforms[step.cond.spec.target]
        vals = tr.inverse(latent)
        values.append(vals)
        scores.append(tr.forward(vals) if step.needs_scores else None)
    return {
        model.specs[i].target: (plan.steps[i].rows, values[i]) for i in range(len(plan.steps))
    }


# ---------------------------------------------------------------------------
# public imputation API


def impute_once(data: FusedDataset, model: ImputationModel, seed) -> FusedDataset:
    """Return a completed copy of ``data`` (no missing cells remain)."""
    plan = _build_plan(data, model)
    fills = _draw_fill(model, plan, generator(seed))
    return data.with_filled(fills)


def impute_m(data: FusedDataset, model: ImputationModel, m: int, seed) -> list[FusedDataset]:
    """m completed copies, one child seed per imputation.

    ``impute_m(data, model, m, s)[k]`` is bitwise identical to
    ``impute_once(data, model, child)`` for the k-th spawned child of s.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    plan = _build_plan(data, model)
    out = []
    for child_seed in seed_sequence(seed).spawn(m):
        fills = _draw_fill(model, plan, generator(child_seed))
        out.append(data.with_filled(fills))
    return out


def default_specs(data: FusedDataset) -> tuple[ConditionalModelSpec, ...]:
    """Construct conditionals covering every column with missing cells.

    Targets are ordered by ascending missingness rate (ties broken by
    schema order), so better-observed columns are completed first.  Each
    target's predictors are all non-treatment columns that are either
    fully observed or imputed earlier.
    """
    treatment = data.treatment_name
    rates = {}
    for col in data.schema:
        if col.name == treatment:
            continue
        rate = float(data.missing_of(col.name).mean())
        rates[col.name] = rate
    targets = sorted(
        (n for n, r in rates.items() if r > 0),
        key=lambda n: (rates[n], data.column_index(n)),
    )
    if not targets:
        raise DataError("no column has missing cells; nothing to impute")
    specs = []
    for k, tname in enumerate(targets):
        done = set(targets[:k])
        preds = tuple(
            n for n in rates if n != tname and (rates[n] == 0.0 or n in done)
        )
        specs.append(ConditionalModelSpec(target=tname, predictors=preds))
    return tuple(specs)
