"""Two-source concatenated datasets for outcome fusion.

This module builds the stacked analysis file used everywhere else in the
package.  Two inputs are combined:

* an *outcomes* table: rows carrying the long-term outcome together with
  the shared predictors (no treatment indicator, or one that is ignored),
* an *intervention* table: rows from the randomized study carrying the
  treatment indicator and the shared predictors, but not the long-term
  outcome.

Concatenation stacks outcomes rows above intervention rows, records a
per-row source tag, sets the treatment indicator to 0 on outcomes rows,
and marks every intervention-row outcome cell missing.  Downstream code
fills those cells by drawing from an outcome model fit on the outcomes
rows; validity rests on two conditions that the tooling here helps audit
but cannot prove:

1. the outcome model never conditions on treatment (enforced structurally
   by the imputation layer), and
2. the conditional law of the outcome given the shared predictors is the
   same in both sources, and intervention-row predictor values stay inside
   the region where the outcomes rows carry information
   (``validate_for_fusion`` screens the support part of this).

Cells are stored in a dense float matrix plus an explicit boolean missing
mask; masked cells hold 0.0 and must never be read.  Datasets are
immutable: every operation returns a new instance and the underlying
arrays are marked read-only.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError, SchemaError

__all__ = [
    "VariableRole",
    "ColumnKind",
    "ColumnSchema",
    "SourceTag",
    "FusedDataset",
    "RowFilter",
    "Diagnostic",
    "concatenate",
    "filter_rows",
    "validate_for_fusion",
]


class VariableRole(Enum):
    """What a column means to the analysis."""

    TREATMENT = "treatment"
    OUTCOME = "outcome"
    INTERMEDIATE = "intermediate"  # measured in both sources, affected by treatment
    COVARIATE = "covariate"        # measured in both sources, unaffected by treatment


class ColumnKind(Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    ORDINAL = "ordinal"


@dataclass(frozen=True)
class ColumnSchema:
    """Declared name, role and measurement kind of one column.

    ``levels`` is the number of ordered categories and is required for
    (and only for) ordinal columns.
    """

    name: str
    role: VariableRole
    kind: ColumnKind
    levels: int | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise SchemaError("column name must be non-empty")
        # accept the enum values ("treatment", "ordinal", ...) as plain strings
        try:
            object.__setattr__(self, "role", VariableRole(self.role))
        except ValueError:
            raise SchemaError(
                f"column {self.name!r}: unknown role {self.role!r}"
            ) from None
        try:
            object.__setattr__(self, "kind", ColumnKind(self.kind))
        except ValueError:
            raise SchemaError(
                f"column {self.name!r}: unknown kind {self.kind!r}"
            ) from None
        if self.kind is ColumnKind.ORDINAL:
            if self.levels is None or self.levels < 2:
                raise SchemaError(
                    f"ordinal column {self.name!r} needs levels >= 2, got {self.levels}"
                )
        elif self.levels is not None:
            raise SchemaError(
                f"column {self.name!r}: levels only applies to ordinal columns"
            )
        if self.role is VariableRole.TREATMENT and self.kind is not ColumnKind.BINARY:
            raise SchemaError(f"treatment column {self.name!r} must be binary")


class SourceTag(Enum):
    OUTCOMES = 0
    INTERVENTION = 1


@dataclass(frozen=True)
class Diagnostic:
    """A non-fatal finding from a validation pass."""

    column: str
    message: str


@dataclass(frozen=True)
class RowFilter:
    """A single row-level condition, optionally restricted to one source.

    Rows whose filter-column cell is missing cannot be evaluated and are
    dropped.  Rows outside ``source`` (when given) are kept untouched.
    """

    column: str
    op: str
    value: float
    source: SourceTag | None = None

    _OPS = {
        ">=": operator.ge,
        ">": operator.gt,
        "<=": operator.le,
        "<": operator.lt,
        "==": operator.eq,
        "!=": operator.ne,
    }

    def __post_init__(self) -> None:
        if self.op not in self._OPS:
            raise SchemaError(f"unknown filter operator {self.op!r}")


@dataclass(frozen=True)
class FusedDataset:
    """Immutable stacked two-source dataset.

    ``values`` is (n_rows, n_cols) float64; ``missing`` is a boolean mask of
    the same shape (True = cell unobserved; the cell value is then 0.0 and
    meaningless).  ``source`` holds ``SourceTag`` codes per row; outcomes
    rows always precede intervention rows.  ``notes`` records non-fatal
    events from construction (dropped rows, discarded columns).
    """

    schema: tuple[ColumnSchema, ...]
    values: np.ndarray
    missing: np.ndarray
    source: np.ndarray
    notes: tuple[str, ...] = field(default=())

    # -- basic accessors ---------------------------------------------------

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_outcomes(self) -> int:
        return int(np.sum(self.source == SourceTag.OUTCOMES.value))

    @property
    def n_intervention(self) -> int:
        return int(np.sum(self.source == SourceTag.INTERVENTION.value))

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.schema)

    def column_index(self, name: str) -> int:
        for i, col in enumerate(self.schema):
            if col.name == name:
                return i
        raise SchemaError(f"unknown column {name!r}")

    def column_schema(self, name: str) -> ColumnSchema:
        return self.schema[self.column_index(name)]

    def values_of(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index(name)]

    def missing_of(self, name: str) -> np.ndarray:
        return self.missing[:, self.column_index(name)]

    def source_rows(self, tag: SourceTag) -> np.ndarray:
        """Boolean row mask for one source."""
        return self.source == tag.value

    @property
    def treatment_name(self) -> str:
        return next(c.name for c in self.schema if c.role is VariableRole.TREATMENT)

    @property
    def outcome_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.schema if c.role is VariableRole.OUTCOME)

    @property
    def predictor_names(self) -> tuple[str, ...]:
        """Columns shared by both sources: intermediates and covariates."""
        return tuple(
            c.name
            for c in self.schema
            if c.role in (VariableRole.INTERMEDIATE, VariableRole.COVARIATE)
        )

    # -- derived datasets --------------------------------------------------

    def take_rows(self, row_mask: np.ndarray, note: str | None = None) -> "FusedDataset":
        """New dataset keeping rows where ``row_mask`` is True."""
        notes = self.notes if note is None else self.notes + (note,)
        return FusedDataset(
            schema=self.schema,
            values=_frozen(self.values[row_mask]),
            missing=_frozen(self.missing[row_mask]),
            source=_frozen(self.source[row_mask]),
            notes=notes,
        )

    def with_filled(self, filled: Mapping[str, tuple[np.ndarray, np.ndarray]]) -> "FusedDataset":
        """New dataset with imputed cells written in.

        ``filled`` maps a column name to ``(row_indices, values)``; every
        indexed cell must currently be missing.  The returned dataset has
        those cells observed.
        """
        values = self.values.copy()
        missing = self.missing.copy()
        for name, (rows, vals) in filled.items():
            j = self.column_index(name)
            if not missing[rows, j].all():
                raise DataError(f"refusing to overwrite observed cells in {name!r}")
            values[rows, j] = vals
            missing[rows, j] = False
        return FusedDataset(
            schema=self.schema,
            values=_frozen(values),
            missing=_frozen(missing),
            source=self.source,
            notes=self.notes,
        )


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# construction


def _as_columns(table, label: str) -> dict[str, np.ndarray]:
    """Accept a mapping of name -> array-like, or a DataFrame-like object."""
    if hasattr(table, "items"):
        items = list(table.items())
    elif hasattr(table, "columns"):
        items = [(str(c), table[c]) for c in table.columns]
    else:
        raise SchemaError(f"{label} table must be a mapping of column name to values")
    out: dict[str, np.ndarray] = {}
    for name, col in items:
        arr = np.asarray(col, dtype=float)
        if arr.ndim != 1:
            raise DataError(f"{label} column {name!r} must be one-dimensional")
        out[str(name)] = arr
    if not out:
        raise DataError(f"{label} table has no columns")
    lengths = {a.shape[0] for a in out.values()}
    if len(lengths) != 1:
        raise DataError(f"{label} table columns have unequal lengths: {sorted(lengths)}")
    if lengths.pop() == 0:
        raise DataError(f"{label} table has zero rows")
    return out


def validate_schema(schema: Iterable[ColumnSchema]) -> tuple[ColumnSchema, ...]:
    cols = tuple(schema)
    names = [c.name for c in cols]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate column names in schema")
    n_treat = sum(c.role is VariableRole.TREATMENT for c in cols)
    n_out = sum(c.role is VariableRole.OUTCOME for c in cols)
    n_shared = sum(
        c.role in (VariableRole.INTERMEDIATE, VariableRole.COVARIATE) for c in cols
    )
    if n_treat != 1:
        raise SchemaError(f"schema needs exactly one treatment column, got {n_treat}")
    if n_out < 1:
        raise SchemaError("schema needs at least one outcome column")
    if n_shared < 1:
        raise SchemaError("schema needs at least one intermediate or covariate column")
    return cols


def _check_domain(name: str, col: ColumnSchema, observed: np.ndarray, label: str) -> None:
    """Domain checks for observed (non-missing) values of one column."""
    if observed.size == 0:
        return
    if col.kind is ColumnKind.BINARY:
        bad = ~np.isin(observed, (0.0, 1.0))
        if bad.any():
            raise DataError(
                f"{label} column {name!r} is binary but has values "
                f"{sorted(set(observed[bad].tolist()))[:5]}"
            )
    elif col.kind is ColumnKind.ORDINAL:
        if not np.all(observed == np.round(observed)):
            raise DataError(f"{label} column {name!r} is ordinal but has non-integer values")
        distinct = np.unique(observed)
        if distinct.size > col.levels:
            raise DataError(
                f"{label} column {name!r} has {distinct.size} distinct values, "
                f"more than its {col.levels} declared levels"
            )


def concatenate(outcomes, intervention, schema: Iterable[ColumnSchema]) -> FusedDataset:
    """Stack an outcomes table above an intervention table.

    Contract per source:

    * outcomes must supply every non-treatment column; a treatment column,
      if present, is ignored (the stacked file stores 0 there);
    * intervention must supply the treatment and every intermediate or
      covariate column; outcome columns, if present, are discarded and the
      stacked cells marked missing;
    * intervention rows with a missing treatment value are dropped (the
      treatment is never imputed) and noted;
    * ``NaN`` encodes a missing cell in either input.

    Raises :class:`SchemaError` for missing/unknown structure and
    :class:`DataError` for domain violations or empty sources.
    """
    cols = validate_schema(schema)
    out_tab = _as_columns(outcomes, "outcomes")
    int_tab = _as_columns(intervention, "intervention")
    notes: list[str] = []

    treatment = next(c for c in cols if c.role is VariableRole.TREATMENT)
    for c in cols:
        if c.role is not VariableRole.TREATMENT and c.name not in out_tab:
            raise SchemaError(f"outcomes table lacks required column {c.name!r}")
        if c.role is not VariableRole.OUTCOME and c.name not in int_tab:
            raise SchemaError(f"intervention table lacks required column {c.name!r}")

    schema_names = {c.name for c in cols}
    for label, tab in (("outcomes", out_tab), ("intervention", int_tab)):
        extra = sorted(set(tab) - schema_names)
        if extra:
            notes.append(f"{label}: ignored columns not in schema: {', '.join(extra)}")

    if treatment.name in out_tab:
        notes.append("outcomes: treatment column ignored; stored as 0")
    for c in cols:
        if c.role is VariableRole.OUTCOME and c.name in int_tab:
            notes.append(f"intervention: outcome column {c.name!r} discarded; stored as missing")

    n_out = next(iter(out_tab.values())).shape[0]
    n_int = next(iter(int_tab.values())).shape[0]

    # Drop intervention rows whose treatment cell is missing: the treatment
    # is a design variable and is never imputed.
    z_raw = int_tab[treatment.name]
    z_missing = np.isnan(z_raw)
    if z_missing.any():
        notes.append(f"intervention: dropped {int(z_missing.sum())} rows with missing treatment")
    keep_int = ~z_missing
    n_int_kept = int(keep_int.sum())
    if n_int_kept == 0:
        raise DataError("intervention table has no rows with an observed treatment value")
    z = z_raw[keep_int]
    arms = np.unique(z)
    if not np.isin(arms, (0.0, 1.0)).all():
        raise DataError(
            f"treatment column {treatment.name!r} must be 0/1, got values "
            f"{sorted(set(arms.tolist()))[:5]}"
        )

    n = n_out + n_int_kept
    p = len(cols)
    values = np.zeros((n, p))
    missing = np.zeros((n, p), dtype=bool)

    for j, c in enumerate(cols):
        # outcomes block
        if c.role is VariableRole.TREATMENT:
            pass  # zeros, observed
        else:
            v = out_tab[c.name]
            m = np.isnan(v)
            values[:n_out, j] = np.where(m, 0.0, v)
            missing[:n_out, j] = m
            _check_domain(c.name, c, v[~m], "outcomes")
        # intervention block
        if c.role is VariableRole.OUTCOME:
            missing[n_out:, j] = True
        elif c.role is VariableRole.TREATMENT:
            values[n_out:, j] = z
        else:
            v = int_tab[c.name][keep_int]
            m = np.isnan(v)
            values[n_out:, j] = np.where(m, 0.0, v)
            missing[n_out:, j] = m
            _check_domain(c.name, c, v[~m], "intervention")

    source = np.concatenate(
        [
            np.full(n_out, SourceTag.OUTCOMES.value, dtype=np.int8),
            np.full(n_int_kept, SourceTag.INTERVENTION.value, dtype=np.int8),
        ]
    )
    return FusedDataset(
        schema=cols,
        values=_frozen(values),
        missing=_frozen(missing),
        source=_frozen(source),
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# row filtering


def filter_rows(data: FusedDataset, where: RowFilter) -> FusedDataset:
    """Keep rows satisfying a condition; see :class:`RowFilter`.

    Filtering that empties either source raises :class:`DataError`, since
    every downstream operation needs both sources populated.
    """
    j = data.column_index(where.column)
    cmp = RowFilter._OPS[where.op]
    ok = cmp(data.values[:, j], where.value) & ~data.missing[:, j]
    if where.source is not None:
        in_scope = data.source_rows(where.source)
        ok = ok | ~in_scope
    result = data.take_rows(
        ok, note=f"filter: {where.column} {where.op} {where.value} kept {int(ok.sum())} rows"
    )
    if result.n_outcomes == 0 or result.n_intervention == 0:
        raise DataError(
            f"filter {where.column} {where.op} {where.value} left an empty source "
            f"({result.n_outcomes} outcomes rows, {result.n_intervention} intervention rows)"
        )
    return result


# ---------------------------------------------------------------------------
# support screening


def validate_for_fusion(data: FusedDataset) -> list[Diagnostic]:
    """Screen shared predictors for outcomes-source support.

    Imputation extrapolates wherever intervention rows sit outside the
    predictor region covered by outcomes rows.  This is a coarse screen,
    not a test: for continuous columns it compares the central 1%..99%
    quantile band with a slack of a quarter of the outcomes-side band
    width, so that ordinary sampling noise in the extremes does not trip
    it; for binary/ordinal columns it requires every intervention-side
    level to have been observed on the outcomes side.  It never raises.
    """
    findings: list[Diagnostic] = []
    out_rows = data.source_rows(SourceTag.OUTCOMES)
    int_rows = data.source_rows(SourceTag.INTERVENTION)
    for col in data.schema:
        if col.role not in (VariableRole.INTERMEDIATE, VariableRole.COVARIATE):
            continue
        j = data.column_index(col.name)
        obs = ~data.missing[:, j]
        v_out = data.values[out_rows & obs, j]
        v_int = data.values[int_rows & obs, j]
        if v_out.size == 0:
            findings.append(
                Diagnostic(col.name, "no observed outcomes-source values; cannot assess support")
            )
            continue
        if v_int.size == 0:
            continue
        if col.kind is ColumnKind.CONTINUOUS:
            lo_out, hi_out = np.quantile(v_out, (0.01, 0.99))
            lo_int, hi_int = np.quantile(v_int, (0.01, 0.99))
            slack = 0.25 * (hi_out - lo_out)
            if lo_int < lo_out - slack or hi_int > hi_out + slack:
                findings.append(
                    Diagnostic(
                        col.name,
                        f"intervention band [{lo_int:.4g}, {hi_int:.4g}] extends beyond "
                        f"outcomes band [{lo_out:.4g}, {hi_out:.4g}] plus slack {slack:.4g}",
                    )
                )
        else:
            lev_out = set(np.unique(v_out).tolist())
            lev_int = set(np.unique(v_int).tolist())
            unseen = sorted(lev_int - lev_out)
            if unseen:
                findings.append(
                    Diagnostic(
                        col.name,
                        f"intervention levels {unseen} never observed on the outcomes side",
                    )
                )
    return findings
