"""Canonical experiment presets: the default desk-scale benchmark manifest
and the world configurations the acceptance suite runs against."""
from __future__ import annotations

from .synth import WorldConfig

DEFAULT_WORLD_SEED = 7
DEFAULT_N_PA = 2500
DEFAULT_N_PO = 20000


def default_world_config() -> WorldConfig:
    """Detection- and effort-biased desk-scale world."""
    return WorldConfig()


def control_world_config() -> WorldConfig:
    """Same world family with uniform detection and uniform effort."""
    return WorldConfig(detection_weight_range=(1.0, 1.0), effort_roughness=0.0)


def rare_world_config() -> WorldConfig:
    """World holding 30 rare species used by the filtering experiments."""
    return WorldConfig(
        n_species=40,
        rare_species=30,
        prevalence_range=(0.08, 0.25),
        rare_prevalence_range=(0.010, 0.016),
    )


def default_manifest_dict(world_dir: str, output_dir: str, seed: int = 1234) -> dict:
    """The seven-method benchmark mirroring the documented baseline suite."""
    return {
        "seed": seed,
        "data": {"synthetic_dir": str(world_dir)},
        "split": {"block_size": 8.0, "test_fraction": 0.8},
        "report": {"radius": 2.0},
        "methods": [
            {
                "name": "staged",
                "label": "staged_pa_po_pa",
                "params": {
                    "schedule": ["pa", "po", "pa"],
                    "features": {"source": "env", "expansion": "full"},
                    "epochs": 60,
                    "lr": 0.1,
                },
            },
            {"name": "maxent", "params": {"filter": True}},
            {"name": "knn_pa", "params": {"k": 25}},
            {
                "name": "forest",
                "label": "forest_env",
                "params": {"n_trees": 40, "max_depth": 8, "min_leaf": 5},
            },
            {"name": "cooccurrence", "params": {"radius": 2.0}},
            {"name": "constant", "params": {"k_max": 50}},
            {"name": "knn_po", "params": {"k": 100}},
        ],
        "output_dir": str(output_dir),
    }
