"""Report rendering: machine-readable lines plus a readable summary table.

A report is plain text in three parts.  The first line names the format.
Then comes one JSON object per line, each tagged with a ``record`` key,
carrying full-precision numbers for downstream tooling.  After a
``== summary ==`` delimiter the same results appear as a fixed-width
table rounded to four decimals for people.

Values that JSON cannot carry are mapped before serialization: NaN
becomes null, infinities become the strings "inf" / "-inf".  In the
table both render as ``---`` and ``inf`` respectively.

Reports are deliberately free of timestamps and timing so that repeated
runs with the same seed produce byte-identical output.
"""

from __future__ import annotations

import json
import math
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .dataset import Diagnostic, FusedDataset
from .effects import confidence_interval
from .pathways import PathwayAnalysis, PathwayParams
from .replication import PooledMI, ReplicationResult, VarianceReport
from .simlab import PathwayMonteCarlo, ScenarioSpec, StudyResult

__all__ = [
    "HEADER",
    "TABLE_DELIMITER",
    "record_line",
    "format_value",
    "render_table",
    "fuse_report",
    "simulate_report",
    "pathway_report",
]

HEADER = "# longfuse report 1"
TABLE_DELIMITER = "== summary =="


def _json_safe(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    return value


def record_line(record: Mapping[str, Any]) -> str:
    """One machine-readable report line (insertion-ordered JSON)."""
    return json.dumps(_json_safe(dict(record)), allow_nan=False)


def format_value(value: Any, digits: int = 4) -> str:
    """Render one table cell; ``---`` stands for not-available."""
    if value is None:
        return "---"
    if isinstance(value, str):
        return value
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, int):
        return str(value)
    if math.isnan(value):
        return "---"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{digits}f}"


def render_table(headers: Sequence[str], rows: Iterable[Sequence[Any]]) -> list[str]:
    """Fixed-width table lines: first column left-aligned, rest right."""
    cells = [[format_value(v) for v in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in cells:
        for j, cell in enumerate(row):
            widths[j] = max(widths[j], len(cell))
    def fmt(row: Sequence[str]) -> str:
        parts = [row[0].ljust(widths[0])]
        parts += [row[j].rjust(widths[j]) for j in range(1, len(widths))]
        return "  ".join(parts).rstrip()
    lines = [fmt(list(headers)), fmt(["-" * w for w in widths])]
    lines.extend(fmt(row) for row in cells)
    return lines


def _assemble(records: Iterable[Mapping[str, Any]],
              headers: Sequence[str],
              rows: Iterable[Sequence[Any]]) -> str:
    lines = [HEADER]
    lines.extend(record_line(r) for r in records)
    lines.append(TABLE_DELIMITER)
    lines.extend(render_table(headers, rows))
    return "\n".join(lines) + "\n"


def _interval_fields(interval: tuple[float, float] | None) -> dict[str, float | None]:
    if interval is None:
        return {"ci_low": None, "ci_high": None}
    return {"ci_low": interval[0], "ci_high": interval[1]}


def _level_pct(gamma: float) -> str:
    return f"{100.0 * (1.0 - gamma):g}%"


def fuse_report(
    *,
    version: str,
    seed: int,
    gamma: float,
    data: FusedDataset,
    outcome: str,
    diagnostics: Sequence[Diagnostic],
    rule_reports: Sequence[VarianceReport],
    pooled: Mapping[str, PooledMI],
    replications: Sequence[tuple[str, ReplicationResult]],
) -> str:
    """Report for one fusion analysis of a concrete dataset pair."""
    records: list[dict[str, Any]] = [
        {
            "record": "meta",
            "tool": "longfuse",
            "version": version,
            "mode": "fuse",
            "seed": seed,
            "gamma": gamma,
        },
        {
            "record": "data",
            "n_rows": data.n_rows,
            "n_outcomes": data.n_outcomes,
            "n_intervention": data.n_intervention,
            "outcome": outcome,
            "columns": list(data.column_names),
        },
    ]
    records.extend({"record": "note", "text": note} for note in data.notes)
    records.extend(
        {"record": "diagnostic", "column": d.column, "message": d.message}
        for d in diagnostics
    )
    for parameter, p in pooled.items():
        records.append(
            {
                "record": "pooled",
                "parameter": parameter,
                "m": p.m,
                "estimate": p.estimate,
                "within_var": p.within_var,
                "between_var": p.between_var,
            }
        )
    rows: list[list[Any]] = []
    for rep in rule_reports:
        records.append(
            {
                "record": "estimate",
                "method": f"rules_m{pooled[rep.parameter].m}",
                "rule": rep.rule.value,
                "parameter": rep.parameter,
                "estimate": rep.estimate,
                "variance": rep.variance,
                "negative_variance": rep.negative,
                **_interval_fields(rep.interval),
            }
        )
        low, high = rep.interval if rep.interval is not None else (None, None)
        rows.append(
            [
                f"{rep.rule.value}(m={pooled[rep.parameter].m})",
                rep.parameter,
                rep.estimate,
                None if rep.negative else rep.variance,
                low,
                high,
            ]
        )
    for label, result in replications:
        extra: dict[str, Any] = {}
        if result.scheme == "jackknife":
            extra["groups"] = result.replicates.estimates.shape[0]
        else:
            extra["resamples"] = result.replicates.estimates.shape[0]
            extra["n_rejected"] = result.n_rejected
        for parameter in ("intercept", "effect"):
            estimate, variance = result.parameter(parameter)
            interval = confidence_interval(estimate, variance, gamma)
            records.append(
                {
                    "record": "estimate",
                    "method": label,
                    "rule": None,
                    "parameter": parameter,
                    "estimate": estimate,
                    "variance": variance,
                    "m": result.replicates.m,
                    **extra,
                    **_interval_fields(interval),
                }
            )
            rows.append([label, parameter, estimate, variance, interval[0], interval[1]])
    pct = _level_pct(gamma)
    headers = ["method", "parameter", "estimate", "variance", f"{pct} low", f"{pct} high"]
    return _assemble(records, headers, rows)


def simulate_report(
    *,
    version: str,
    seed: int,
    spec: ScenarioSpec,
    result: StudyResult,
) -> str:
    """Report for a repeated-sampling study of one scenario."""
    records: list[dict[str, Any]] = [
        {
            "record": "meta",
            "tool": "longfuse",
            "version": version,
            "mode": "simulate",
            "seed": seed,
            "gamma": spec.gamma,
        },
        {
            "record": "study",
            "scenario": spec.scenario,
            "replications": spec.replications,
            "n_failed": result.n_failed,
            "n_outcomes": spec.n_outcomes,
            "n_intervention_base": spec.n_intervention_base,
            "truncate_at": spec.truncate_at,
            "reduced_direction": spec.reduced_direction
            if spec.scenario == "reduced_outcomes"
            else None,
        },
        {
            "record": "truth",
            "intercept": result.truth.intercept,
            "effect": result.truth.effect,
        },
    ]
    rows: list[list[Any]] = []
    for method in result.methods:
        for parameter in ("intercept", "effect"):
            metrics = getattr(method, parameter)
            records.append(
                {
                    "record": "metrics",
                    "method": method.label,
                    "parameter": parameter,
                    "bias": metrics.bias,
                    "rmse": metrics.rmse,
                    "coverage": metrics.coverage,
                    "mean_variance": metrics.mean_variance,
                    "n_estimates": metrics.n_estimates,
                    "n_intervals": metrics.n_intervals,
                    "n_negative_variance": method.n_negative_variance,
                    "n_rejected_resamples": method.n_rejected_resamples,
                }
            )
            rows.append(
                [
                    method.label,
                    parameter,
                    metrics.bias,
                    metrics.rmse,
                    metrics.coverage,
                    metrics.mean_variance,
                    metrics.n_intervals,
                ]
            )
    headers = ["method", "parameter", "bias", "rmse", "coverage", "mean_var", "intervals"]
    return _assemble(records, headers, rows)


def _set_params(params: PathwayParams) -> dict[str, float]:
    out = {}
    for name in type(params).__dataclass_fields__:
        if name == "example":
            continue
        value = getattr(params, name)
        if value is not None:
            out[name] = value
    return out


def pathway_report(
    *,
    version: str,
    seed: int | None,
    params: PathwayParams,
    analysis: PathwayAnalysis,
    monte_carlo: PathwayMonteCarlo | None = None,
) -> str:
    """Report comparing the closed-form slopes, optionally against simulation."""
    records: list[dict[str, Any]] = [
        {
            "record": "meta",
            "tool": "longfuse",
            "version": version,
            "mode": "pathway",
            "seed": seed,
        },
        {
            "record": "pathway",
            "example": params.example,
            "params": _set_params(params),
        },
        {
            "record": "closed_form",
            "true_slope": analysis.true_slope,
            "fused_slope": analysis.fused_slope,
            "raw_gap": analysis.raw_gap,
            "scaled_bias": analysis.scaled_bias,
            "portion": analysis.portion,
            "latent_recovery_slope": analysis.latent_recovery_slope,
            "surrogate_outcome_slope": analysis.surrogate_outcome_slope,
            "dropped_treatment_coef": analysis.dropped_treatment_coef,
            "treatment_surrogate_slope": analysis.treatment_surrogate_slope,
        },
    ]
    mc: dict[str, Any] = {}
    if monte_carlo is not None:
        records.append(
            {
                "record": "monte_carlo",
                "n": monte_carlo.n,
                "true_slope": monte_carlo.true_slope,
                "true_se": monte_carlo.true_se,
                "fused_slope": monte_carlo.fused_slope,
                "fused_se": monte_carlo.fused_se,
            }
        )
        mc = {
            "true_slope": monte_carlo.true_slope,
            "fused_slope": monte_carlo.fused_slope,
            "raw_gap": monte_carlo.fused_slope - monte_carlo.true_slope,
        }
    rows: list[list[Any]] = []
    for name in ("true_slope", "fused_slope", "raw_gap", "scaled_bias", "portion"):
        rows.append([name, getattr(analysis, name), mc.get(name)])
    for name in (
        "latent_recovery_slope",
        "surrogate_outcome_slope",
        "dropped_treatment_coef",
        "treatment_surrogate_slope",
    ):
        value = getattr(analysis, name)
        if value is not None:
            rows.append([name, value, None])
    if monte_carlo is not None:
        rows.append(["true_slope_se", None, monte_carlo.true_se])
        rows.append(["fused_slope_se", None, monte_carlo.fused_se])
    headers = ["quantity", "closed_form", "monte_carlo"]
    return _assemble(records, headers, rows)
