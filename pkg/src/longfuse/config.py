"""YAML run configuration for the command line.

Each config file declares exactly one ``mode`` (``fuse``, ``simulate`` or
``pathway``) plus the inputs that mode needs.  Parsing is strict: unknown
keys, wrong types and missing required keys all raise
:class:`~longfuse.errors.SchemaError` with the offending location spelled
out, so a typo fails fast instead of silently running with a default.

A minimal fuse config::

    mode: fuse
    seed: 20260816
    outcomes: outcomes.csv
    intervention: intervention.csv
    columns:
      - {name: Z, role: treatment, kind: binary}
      - {name: X1, role: covariate, kind: continuous}
      - {name: Y, role: outcome, kind: continuous}
    methods:
      rules: {m: 30}
      jackknife:
        - {groups: 25, m: 20}

See the README for the full key reference of all three modes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

import yaml

from .dataset import ColumnKind, ColumnSchema, RowFilter, SourceTag, VariableRole
from .errors import SchemaError
from .imputation import ConditionalModelSpec
from .pathways import PathwayParams
from .simlab import SCENARIOS, MethodPlan, ScenarioSpec

__all__ = [
    "FuseConfig",
    "SimulateConfig",
    "PathwayConfig",
    "parse_config",
]

_MODES = ("fuse", "simulate", "pathway")

_ROLES = {r.value: r for r in VariableRole}
_KINDS = {k.value: k for k in ColumnKind}
_SOURCES = {"outcomes": SourceTag.OUTCOMES, "intervention": SourceTag.INTERVENTION}


@dataclass(frozen=True)
class FuseConfig:
    """Inputs for one fusion analysis of a CSV pair."""

    seed: int | None
    outcomes_path: str
    intervention_path: str
    schema: tuple[ColumnSchema, ...]
    methods: MethodPlan
    outcome: str | None = None
    filters: tuple[RowFilter, ...] = ()
    conditionals: tuple[ConditionalModelSpec, ...] | None = None
    gamma: float = 0.05

    mode = "fuse"


@dataclass(frozen=True)
class PathwayConfig:
    """A structural pathway scenario, optionally with a simulation check."""

    params: PathwayParams
    seed: int | None = None
    mc_n: int | None = None
    treat_prob: float = 0.5

    mode = "pathway"


@dataclass(frozen=True)
class SimulateConfig:
    """A repeated-sampling study; either a data-fusion scenario or a pathway."""

    seed: int | None
    study: ScenarioSpec | None = None
    pathway: PathwayConfig | None = None

    mode = "simulate"

    def __post_init__(self) -> None:
        if (self.study is None) == (self.pathway is None):
            raise SchemaError("simulate config needs exactly one of study/pathway")


def _require_mapping(value: Any, where: str) -> dict:
    if not isinstance(value, Mapping):
        raise SchemaError(f"{where} must be a mapping, got {type(value).__name__}")
    return dict(value)


def _require_list(value: Any, where: str) -> list:
    if not isinstance(value, list):
        raise SchemaError(f"{where} must be a list, got {type(value).__name__}")
    return value


def _reject_unknown(mapping: Mapping[str, Any], allowed: tuple[str, ...], where: str) -> None:
    extra = sorted(set(mapping) - set(allowed))
    if extra:
        raise SchemaError(f"{where}: unknown key(s) {', '.join(map(repr, extra))}")


def _get(mapping: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in mapping:
        raise SchemaError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _as_int(value: Any, where: str) -> int:
    if type(value) is not int:
        raise SchemaError(f"{where} must be an integer, got {value!r}")
    return value


def _as_float(value: Any, where: str) -> float:
    if type(value) is bool or not isinstance(value, (int, float)):
        raise SchemaError(f"{where} must be a number, got {value!r}")
    return float(value)


def _as_str(value: Any, where: str) -> str:
    if not isinstance(value, str) or not value:
        raise SchemaError(f"{where} must be a non-empty string, got {value!r}")
    return value


def _parse_methods(raw: Any, where: str) -> MethodPlan:
    block = _require_mapping(raw, where)
    _reject_unknown(block, ("rules", "jackknife", "bootstrap"), where)
    pooled_m = 0
    size_ratio = None
    if "rules" in block:
        rules = _require_mapping(block["rules"], f"{where}.rules")
        _reject_unknown(rules, ("m", "size_ratio"), f"{where}.rules")
        pooled_m = _as_int(_get(rules, "m", f"{where}.rules"), f"{where}.rules.m")
        if rules.get("size_ratio") is not None:
            size_ratio = _as_float(rules["size_ratio"], f"{where}.rules.size_ratio")
    jackknife = []
    for i, entry in enumerate(_require_list(block.get("jackknife", []), f"{where}.jackknife")):
        spot = f"{where}.jackknife[{i}]"
        entry = _require_mapping(entry, spot)
        _reject_unknown(entry, ("groups", "m"), spot)
        jackknife.append(
            (
                _as_int(_get(entry, "groups", spot), f"{spot}.groups"),
                _as_int(_get(entry, "m", spot), f"{spot}.m"),
            )
        )
    bootstrap = []
    for i, entry in enumerate(_require_list(block.get("bootstrap", []), f"{where}.bootstrap")):
        spot = f"{where}.bootstrap[{i}]"
        entry = _require_mapping(entry, spot)
        _reject_unknown(entry, ("resamples", "m"), spot)
        bootstrap.append(
            (
                _as_int(_get(entry, "resamples", spot), f"{spot}.resamples"),
                _as_int(_get(entry, "m", spot), f"{spot}.m"),
            )
        )
    return MethodPlan(
        pooled_m=pooled_m,
        size_ratio=size_ratio,
        jackknife=tuple(jackknife),
        bootstrap=tuple(bootstrap),
    )


def _parse_columns(raw: Any, where: str) -> tuple[ColumnSchema, ...]:
    entries = _require_list(raw, where)
    out = []
    for i, entry in enumerate(entries):
        spot = f"{where}[{i}]"
        entry = _require_mapping(entry, spot)
        _reject_unknown(entry, ("name", "role", "kind", "levels"), spot)
        role_key = _as_str(_get(entry, "role", spot), f"{spot}.role")
        kind_key = _as_str(_get(entry, "kind", spot), f"{spot}.kind")
        if role_key not in _ROLES:
            raise SchemaError(f"{spot}.role: {role_key!r} is not one of {sorted(_ROLES)}")
        if kind_key not in _KINDS:
            raise SchemaError(f"{spot}.kind: {kind_key!r} is not one of {sorted(_KINDS)}")
        levels = None
        if entry.get("levels") is not None:
            levels = _as_int(entry["levels"], f"{spot}.levels")
        out.append(
            ColumnSchema(
                name=_as_str(_get(entry, "name", spot), f"{spot}.name"),
                role=_ROLES[role_key],
                kind=_KINDS[kind_key],
                levels=levels,
            )
        )
    return tuple(out)


def _parse_filters(raw: Any, where: str) -> tuple[RowFilter, ...]:
    entries = _require_list(raw, where)
    out = []
    for i, entry in enumerate(entries):
        spot = f"{where}[{i}]"
        entry = _require_mapping(entry, spot)
        _reject_unknown(entry, ("column", "op", "value", "source"), spot)
        source = None
        if entry.get("source") is not None:
            key = _as_str(entry["source"], f"{spot}.source")
            if key not in _SOURCES:
                raise SchemaError(f"{spot}.source: {key!r} is not one of {sorted(_SOURCES)}")
            source = _SOURCES[key]
        out.append(
            RowFilter(
                column=_as_str(_get(entry, "column", spot), f"{spot}.column"),
                op=_as_str(_get(entry, "op", spot), f"{spot}.op"),
                value=_as_float(_get(entry, "value", spot), f"{spot}.value"),
                source=source,
            )
        )
    return tuple(out)


def _parse_conditionals(raw: Any, where: str) -> tuple[ConditionalModelSpec, ...]:
    entries = _require_list(raw, where)
    out = []
    for i, entry in enumerate(entries):
        spot = f"{where}[{i}]"
        entry = _require_mapping(entry, spot)
        _reject_unknown(entry, ("target", "predictors", "intercept"), spot)
        predictors = _require_list(_get(entry, "predictors", spot), f"{spot}.predictors")
        intercept = entry.get("intercept", True)
        if type(intercept) is not bool:
            raise SchemaError(f"{spot}.intercept must be true or false")
        out.append(
            ConditionalModelSpec(
                target=_as_str(_get(entry, "target", spot), f"{spot}.target"),
                predictors=tuple(
                    _as_str(p, f"{spot}.predictors[{j}]") for j, p in enumerate(predictors)
                ),
                intercept=intercept,
            )
        )
    return tuple(out)


_PATHWAY_FIELDS = tuple(
    name for name in PathwayParams.__dataclass_fields__ if name != "example"
)


def _parse_pathway_params(block: Mapping[str, Any], where: str) -> PathwayParams:
    example = _as_int(_get(block, "example", where), f"{where}.example")
    params = _require_mapping(_get(block, "params", where), f"{where}.params")
    _reject_unknown(params, _PATHWAY_FIELDS, f"{where}.params")
    values = {k: _as_float(v, f"{where}.params.{k}") for k, v in params.items()}
    return PathwayParams(example=example, **values)


def _seed_of(block: Mapping[str, Any], where: str) -> int | None:
    if block.get("seed") is None:
        return None
    return _as_int(block["seed"], f"{where}.seed")


def _parse_fuse(block: dict, where: str) -> FuseConfig:
    _reject_unknown(
        block,
        (
            "mode",
            "seed",
            "outcomes",
            "intervention",
            "columns",
            "outcome",
            "filters",
            "imputation",
            "methods",
            "gamma",
        ),
        where,
    )
    outcome = None
    if block.get("outcome") is not None:
        outcome = _as_str(block["outcome"], f"{where}.outcome")
    conditionals = None
    if block.get("imputation") is not None:
        conditionals = _parse_conditionals(block["imputation"], f"{where}.imputation")
    gamma = 0.05
    if block.get("gamma") is not None:
        gamma = _as_float(block["gamma"], f"{where}.gamma")
        if not 0.0 < gamma < 1.0:
            raise SchemaError(f"{where}.gamma must be in (0, 1)")
    return FuseConfig(
        seed=_seed_of(block, where),
        outcomes_path=_as_str(_get(block, "outcomes", where), f"{where}.outcomes"),
        intervention_path=_as_str(
            _get(block, "intervention", where), f"{where}.intervention"
        ),
        schema=_parse_columns(_get(block, "columns", where), f"{where}.columns"),
        methods=_parse_methods(_get(block, "methods", where), f"{where}.methods"),
        outcome=outcome,
        filters=_parse_filters(block.get("filters", []), f"{where}.filters"),
        conditionals=conditionals,
        gamma=gamma,
    )


def _parse_pathway(block: dict, where: str) -> PathwayConfig:
    _reject_unknown(
        block, ("mode", "seed", "example", "params", "monte_carlo"), where
    )
    mc_n = None
    treat_prob = 0.5
    if block.get("monte_carlo") is not None:
        mc = _require_mapping(block["monte_carlo"], f"{where}.monte_carlo")
        _reject_unknown(mc, ("n", "treat_prob"), f"{where}.monte_carlo")
        mc_n = _as_int(_get(mc, "n", f"{where}.monte_carlo"), f"{where}.monte_carlo.n")
        if mc_n < 100:
            raise SchemaError(f"{where}.monte_carlo.n must be at least 100")
        if mc.get("treat_prob") is not None:
            treat_prob = _as_float(mc["treat_prob"], f"{where}.monte_carlo.treat_prob")
            if not 0.0 < treat_prob < 1.0:
                raise SchemaError(f"{where}.monte_carlo.treat_prob must be in (0, 1)")
    return PathwayConfig(
        params=_parse_pathway_params(block, where),
        seed=_seed_of(block, where),
        mc_n=mc_n,
        treat_prob=treat_prob,
    )


def _parse_simulate(block: dict, where: str) -> SimulateConfig:
    scenario = _as_str(_get(block, "scenario", where), f"{where}.scenario")
    if scenario == "pathway":
        _reject_unknown(
            block, ("mode", "seed", "scenario", "example", "params", "n", "treat_prob"), where
        )
        n = _as_int(_get(block, "n", where), f"{where}.n")
        if n < 100:
            raise SchemaError(f"{where}.n must be at least 100")
        treat_prob = 0.5
        if block.get("treat_prob") is not None:
            treat_prob = _as_float(block["treat_prob"], f"{where}.treat_prob")
            if not 0.0 < treat_prob < 1.0:
                raise SchemaError(f"{where}.treat_prob must be in (0, 1)")
        return SimulateConfig(
            seed=_seed_of(block, where),
            pathway=PathwayConfig(
                params=_parse_pathway_params(block, where),
                seed=_seed_of(block, where),
                mc_n=n,
                treat_prob=treat_prob,
            ),
        )
    if scenario not in SCENARIOS:
        raise SchemaError(
            f"{where}.scenario: {scenario!r} is not 'pathway' or one of {SCENARIOS}"
        )
    _reject_unknown(
        block,
        (
            "mode",
            "seed",
            "scenario",
            "replications",
            "methods",
            "n_outcomes",
            "n_intervention_base",
            "treat_prob",
            "truncate_at",
            "reduced_direction",
            "gamma",
        ),
        where,
    )
    kwargs: dict[str, Any] = {}
    if block.get("n_outcomes") is not None:
        kwargs["n_outcomes"] = _as_int(block["n_outcomes"], f"{where}.n_outcomes")
    if block.get("n_intervention_base") is not None:
        kwargs["n_intervention_base"] = _as_int(
            block["n_intervention_base"], f"{where}.n_intervention_base"
        )
    if block.get("treat_prob") is not None:
        kwargs["treat_prob"] = _as_float(block["treat_prob"], f"{where}.treat_prob")
    if "truncate_at" in block:
        kwargs["truncate_at"] = (
            None
            if block["truncate_at"] is None
            else _as_float(block["truncate_at"], f"{where}.truncate_at")
        )
    if block.get("reduced_direction") is not None:
        kwargs["reduced_direction"] = _as_str(
            block["reduced_direction"], f"{where}.reduced_direction"
        )
    if block.get("gamma") is not None:
        kwargs["gamma"] = _as_float(block["gamma"], f"{where}.gamma")
    spec = ScenarioSpec(
        scenario=scenario,
        replications=_as_int(_get(block, "replications", where), f"{where}.replications"),
        methods=_parse_methods(_get(block, "methods", where), f"{where}.methods"),
        **kwargs,
    )
    return SimulateConfig(seed=_seed_of(block, where), study=spec)


def parse_config(
    path: str, expected_mode: str | None = None
) -> FuseConfig | SimulateConfig | PathwayConfig:
    """Load and validate a YAML config file.

    ``expected_mode`` (when given) must match the file's ``mode`` key;
    the CLI passes the subcommand name here so that running a simulate
    config through ``longfuse fuse`` fails loudly.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
    except OSError as exc:
        raise SchemaError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise SchemaError(f"{path}: invalid YAML: {exc}") from exc
    block = _require_mapping(raw, path)
    mode = _as_str(_get(block, "mode", path), f"{path}.mode")
    if mode not in _MODES:
        raise SchemaError(f"{path}.mode: {mode!r} is not one of {_MODES}")
    if expected_mode is not None and mode != expected_mode:
        raise SchemaError(
            f"{path}: config declares mode {mode!r} but was run as {expected_mode!r}"
        )
    if mode == "fuse":
        return _parse_fuse(block, path)
    if mode == "pathway":
        return _parse_pathway(block, path)
    return _parse_simulate(block, path)
