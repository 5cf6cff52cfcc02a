"""Long-term treatment effects from fused experimental and auxiliary data.

The workflow: declare a column schema, stack an outcomes table above an
intervention table with :func:`concatenate`, fit conditional imputation
models with :func:`fit`, draw completed datasets with :func:`impute_m`,
estimate the effect regression per completion with
:func:`estimate_effect`, and attach uncertainty with either the
closed-form combining rules (:func:`pool` / :func:`combine`) or the
replication schemes (:func:`jackknife`, :func:`bootstrap`).  The
:mod:`longfuse.simlab` module runs calibration studies of the whole
pipeline and :mod:`longfuse.pathways` provides closed-form bias
calculators for structural failure scenarios.
"""

from .config import FuseConfig, PathwayConfig, SimulateConfig, parse_config
from .dataset import (
    ColumnKind,
    ColumnSchema,
    Diagnostic,
    FusedDataset,
    RowFilter,
    SourceTag,
    VariableRole,
    concatenate,
    filter_rows,
    validate_for_fusion,
)
from .effects import EffectEstimate, confidence_interval, estimate_effect
from .errors import DataError, EstimationError, LongfuseError, SchemaError
from .imputation import (
    ConditionalModelSpec,
    FittedConditional,
    ImputationModel,
    PosteriorDraw,
    default_specs,
    draw_parameters,
    fit,
    impute_m,
    impute_once,
)
from .io import read_table_csv, write_table_csv
from .pathways import PathwayAnalysis, PathwayParams, analyze_pathway, product_of_estimates
from .replication import (
    CombiningRule,
    PooledMI,
    ReplicateSet,
    ReplicationResult,
    VarianceReport,
    bootstrap,
    combine,
    imputation_estimates,
    jackknife,
    partition_groups,
    pool,
    pseudovalues,
)
from .simlab import (
    MethodPlan,
    PathwayMonteCarlo,
    ScenarioSpec,
    StudyResult,
    TruthValues,
    generate_fused,
    generate_pair,
    run_study,
    simulate_pathway,
    summarize,
    truth,
)

__version__ = "0.1.0"

__all__ = [
    "ColumnKind",
    "ColumnSchema",
    "CombiningRule",
    "ConditionalModelSpec",
    "DataError",
    "Diagnostic",
    "EffectEstimate",
    "EstimationError",
    "FittedConditional",
    "FuseConfig",
    "FusedDataset",
    "ImputationModel",
    "LongfuseError",
    "MethodPlan",
    "PathwayAnalysis",
    "PathwayConfig",
    "PathwayMonteCarlo",
    "PathwayParams",
    "PooledMI",
    "PosteriorDraw",
    "ReplicateSet",
    "ReplicationResult",
    "RowFilter",
    "ScenarioSpec",
    "SchemaError",
    "SimulateConfig",
    "SourceTag",
    "StudyResult",
    "TruthValues",
    "VarianceReport",
    "VariableRole",
    "analyze_pathway",
    "bootstrap",
    "combine",
    "concatenate",
    "confidence_interval",
    "default_specs",
    "draw_parameters",
    "estimate_effect",
    "filter_rows",
    "fit",
    "generate_fused",
    "generate_pair",
    "imputation_estimates",
    "impute_m",
    "impute_once",
    "jackknife",
    "parse_config",
    "partition_groups",
    "pool",
    "product_of_estimates",
    "pseudovalues",
    "read_table_csv",
    "run_study",
    "simulate_pathway",
    "summarize",
    "truth",
    "validate_for_fusion",
    "write_table_csv",
]
