"""sdmbench: benchmark engine and baselines for predicting multi-label
species composition from environmental predictors, with a synthetic
ground-truth world for end-to-end verification."""

from .core import (
    ConfigError,
    DataError,
    Location,
    PASurvey,
    PORecord,
    PredictionSet,
    SchemaError,
    SpeciesIndex,
    build_species_index,
)
from .metrics import (
    MetricsReport,
    SetSizeReport,
    evaluate_predictions,
    macro_species_f1,
    micro_f1,
    per_stratum_micro_f1,
    presence_count_comparison,
    set_size_errors,
    species_accumulation,
)
from .assemblage import AssemblageRule, assemble, calibrate_constant_k, ensemble_average
from .split import block_id, spatial_block_split
from .synth import WorldConfig, generate_world, sample_pa, sample_po

__version__ = "0.1.0"

__all__ = [
    "AssemblageRule",
    "ConfigError",
    "DataError",
    "Location",
    "MetricsReport",
    "PASurvey",
    "PORecord",
    "PredictionSet",
    "SchemaError",
    "SetSizeReport",
    "SpeciesIndex",
    "WorldConfig",
    "assemble",
    "block_id",
    "build_species_index",
    "calibrate_constant_k",
    "ensemble_average",
    "evaluate_predictions",
    "generate_world",
    "macro_species_f1",
    "micro_f1",
    "per_stratum_micro_f1",
    "presence_count_comparison",
    "sample_pa",
    "sample_po",
    "set_size_errors",
    "spatial_block_split",
    "species_accumulation",
]
