"""Experiment orchestration: run manifests, the method registry, leaderboard
generation, and the diagnostics bundle (per-stratum scores, set-size table,
accumulation curves, occurrence-vs-survey count comparison) with figures.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import plots
from .assemblage import (
    AssemblageRule,
    assemble,
    assemble_all,
    calibrate_constant_k,
    ensemble_average,
    read_submission,
    write_submission,
)
from .baselines import (
    CooccurrencePredictor,
    KnnPaPredictor,
    KnnPoPredictor,
    build_cooccurrence,
    constant_predictor,
)
from .core import (
    ConfigError,
    DataError,
    Location,
    PASurvey,
    PORecord,
    PredictionSet,
    SpeciesIndex,
    PLANAR,
)
from .features import FeatureAssembler, FeatureExpansion, expand_features
from .ingest import (
    load_pa_csv,
    load_po_csv,
    pa_columns_from_config,
    po_columns_from_config,
    save_pa_csv,
)
from .metrics import (
    evaluate_predictions,
    per_stratum_micro_f1,
    presence_count_comparison,
    set_size_errors,
    species_accumulation,
)
from .rasters import read_ascii_grid
from .sdm import SpeciesModelBank, fit_forest_bank, fit_glm_bank, filter_species_models, sub_split
from .split import SplitAssignment, default_block_size, save_split_csv, spatial_block_split
from .staged import LinearMultiLabelModel, multi_hot, schedule_from_config, train
from .synth import load_world

log = logging.getLogger(__name__)

ENV_OUTPUT_DIR = "SDMBENCH_OUTPUT_DIR"
ENV_WORKERS = "SDMBENCH_WORKERS"


@dataclass
class MethodSpec:
    name: str
    label: str
    params: dict = field(default_factory=dict)
    assemblage: dict | None = None

    @classmethod
    def from_config(cls, cfg: dict) -> "MethodSpec":
        if "name" not in cfg:
            raise ConfigError("method entry missing 'name'")
        return cls(
            name=cfg["name"],
            label=cfg.get("label", cfg["name"]),
            params=dict(cfg.get("params", {})),
            assemblage=cfg.get("assemblage"),
        )


@dataclass
class RunManifest:
    seed: int
    data: dict
    methods: list[MethodSpec]
    output_dir: str
    split: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)
    workers: int = 1
    raw: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        # identifies the experimental configuration: where outputs land and
        # how many workers ran must not change the hash
        core = {k: v for k, v in self.raw.items() if k not in ("output_dir", "workers")}
        blob = json.dumps(core, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def load_manifest(path: str | Path) -> RunManifest:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"manifest not found: {path}")
    with path.open(encoding="utf-8") as fh:
        raw = json.load(fh)
    return manifest_from_dict(raw)


def manifest_from_dict(raw: dict) -> RunManifest:
    if "seed" not in raw:
        raise ConfigError("manifest requires a seed")
    if "data" not in raw:
        raise ConfigError("manifest requires a data block")
    if "methods" not in raw or not raw["methods"]:
        raise ConfigError("manifest requires a non-empty methods list")
    if "output_dir" not in raw:
        raise ConfigError("manifest requires output_dir")
    methods = [MethodSpec.from_config(m) for m in raw["methods"]]
    labels = [m.label for m in methods]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate method labels: {labels}")
    for m in methods:
        if m.name not in REGISTRY:
            raise ConfigError(f"unknown method {m.name!r}; known: {sorted(REGISTRY)}")
    return RunManifest(
        seed=int(raw["seed"]),
        data=dict(raw["data"]),
        methods=methods,
        output_dir=raw["output_dir"],
        split=dict(raw.get("split", {})),
        report=dict(raw.get("report", {})),
        workers=int(raw.get("workers", 1)),
        raw=raw,
    )


class FeaturePack:
    """A fitted feature pipeline (sampling + standardization + expansion)
    that can be serialized and rebuilt in a later process."""

    def __init__(self, assembler: FeatureAssembler, expansion: FeatureExpansion | None, config: dict):
        self.assembler = assembler
        self.expansion = expansion
        self.config = config

    def transform(self, locs: list[Location]) -> np.ndarray:
        X = self.assembler.transform(locs).values
        if self.expansion is not None:
            return expand_features(X, self.expansion)
        return X

    @property
    def linear_mask(self) -> np.ndarray:
        n_vars = self.assembler.n_features
        if self.expansion is None:
            return np.ones(n_vars, dtype=bool)
        return self.expansion.linear_column_mask(n_vars)

    def state(self) -> dict:
        return {
            "config": self.config,
            "assembler": self.assembler.stats_to_dict(),
            "expansion": None if self.expansion is None else self.expansion.to_dict(),
        }


class RunContext:
    """Loaded data plus caches shared by every method in one run."""

    def __init__(
        self,
        index: SpeciesIndex,
        po_records: list[PORecord],
        pa_train: list[PASurvey],
        pa_test: list[PASurvey],
        grids: list,
        seed: int,
        workers: int = 1,
        split: SplitAssignment | None = None,
    ):
        self.index = index
        self.po_records = po_records
        self.pa_train = pa_train
        self.pa_test = pa_test
        self.grids = grids
        self.seed = seed
        self.workers = workers
        self.split = split
        self.all_pa: list[PASurvey] = pa_train + pa_test
        self._packs: dict[str, FeaturePack] = {}
        self._train_X: dict[str, np.ndarray] = {}

    @property
    def n_species(self) -> int:
        return len(self.index)

    def _grid_subset(self, source: str):
        if source == "env":
            return self.grids, False
        if source == "coords":
            return [], True
        if source == "env+coords":
            return self.grids, True
        raise ConfigError(f"unknown feature source {source!r}")

    def features(self, source: str = "env", expansion: str = "none") -> FeaturePack:
        """Fit (once) and return the feature pipeline for a config; fitting
        uses the training surveys' locations."""
        key = f"{source}|{expansion}"
        if key in self._packs:
            return self._packs[key]
        grids, include_coords = self._grid_subset(source)
        if not grids and not include_coords:
            raise ConfigError("feature source selects nothing")
        assembler = FeatureAssembler(grids, include_coords=include_coords)
        train_locs = [s.location for s in self.pa_train]
        base = assembler.fit(train_locs).transform(train_locs).values
        expansion_obj: FeatureExpansion | None = None
        if expansion == "quadratic":
            expansion_obj = FeatureExpansion(use_linear=True, use_quadratic=True)
        elif expansion == "full":
            expansion_obj = FeatureExpansion(use_linear=True, use_quadratic=True).fit_hinges(base)
        elif expansion != "none":
            raise ConfigError(f"unknown expansion {expansion!r}")
        pack = FeaturePack(assembler, expansion_obj, {"source": source, "expansion": expansion})
        self._packs[key] = pack
        self._train_X[key] = pack.transform(train_locs)
        return pack

    def train_matrix(self, source: str, expansion: str) -> np.ndarray:
        self.features(source, expansion)
        return self._train_X[f"{source}|{expansion}"]

    def rebuild_pack(self, state: dict) -> FeaturePack:
        cfg = state["config"]
        grids, include_coords = self._grid_subset(cfg["source"])
        assembler = FeatureAssembler(grids, include_coords=include_coords)
        assembler.stats_from_dict(state["assembler"])
        expansion = (
            None if state["expansion"] is None else FeatureExpansion.from_dict(state["expansion"])
        )
        return FeaturePack(assembler, expansion, cfg)

    def train_truth_sets(self) -> list[frozenset[int]]:
        return [s.present for s in self.pa_train]

    def test_locations(self) -> list[Location]:
        return [s.location for s in self.pa_test]

    def test_ids(self) -> list[str]:
        return [s.survey_id for s in self.pa_test]


def build_context(manifest: RunManifest, workers: int | None = None) -> RunContext:
    data = manifest.data
    workers = workers if workers is not None else manifest.workers
    env_workers = os.environ.get(ENV_WORKERS)
    if env_workers:
        workers = int(env_workers)

    if "synthetic_dir" in data:
        world_dir = Path(data["synthetic_dir"])
        world = load_world(world_dir)
        index = world.species_index
        crs = PLANAR
        po = load_po_csv(world_dir / "po.csv", index=index, crs=crs).records
        pa = load_pa_csv(world_dir / "pa.csv", index=index, crs=crs).surveys
        grids = world.grids
    elif "po_csv" in data and "pa_csv" in data:
        crs = data.get("crs", "lonlat")
        po_cols = po_columns_from_config(data.get("po_columns", {}))
        pa_cols = pa_columns_from_config(data.get("pa_columns", {}))
        po_res = load_po_csv(data["po_csv"], columns=po_cols, crs=crs)
        pa_res = load_pa_csv(data["pa_csv"], columns=pa_cols, crs=crs)
        ids = sorted(set(po_res.index.ids) | set(pa_res.index.ids))
        index = SpeciesIndex(ids)
        po = load_po_csv(data["po_csv"], columns=po_cols, index=index, crs=crs).records
        pa = load_pa_csv(data["pa_csv"], columns=pa_cols, index=index, crs=crs).surveys
        raster_dir = data.get("raster_dir")
        grids = []
        if raster_dir:
            for p in sorted(Path(raster_dir).glob("*.asc")):
                grids.append(read_ascii_grid(p))
    else:
        raise ConfigError("data block needs synthetic_dir or po_csv+pa_csv")

    if not pa:
        raise DataError("no surveys loaded")
    split_cfg = manifest.split
    block_size = split_cfg.get("block_size", default_block_size(crs))
    origin = tuple(split_cfg["origin"]) if "origin" in split_cfg else None
    split = spatial_block_split(
        pa,
        block_size=block_size,
        test_fraction=split_cfg.get("test_fraction", 0.8),
        seed=split_cfg.get("seed", manifest.seed),
        origin=origin,
    )
    pa_train = split.surveys_on(pa, "train")
    pa_test = split.surveys_on(pa, "test")
    if not pa_train or not pa_test:
        raise DataError("split produced an empty side")
    ctx = RunContext(index, po, pa_train, pa_test, grids, manifest.seed, workers, split)
    ctx.all_pa = pa
    return ctx


# ---------------------------------------------------------------------------
# methods


_SOURCE_LABELS = {"env": "environment", "coords": "coords", "env+coords": "environment + coords"}


class Method:
    name = "base"
    model_desc = ""
    predictors_desc = ""
    produces_probs = True
    default_source = None  # methods with a features param override this

    def describe_predictors(self, params: dict) -> str:
        if self.default_source is None:
            return self.predictors_desc
        source = params.get("features", {}).get("source", self.default_source)
        return _SOURCE_LABELS.get(source, source)

    def fit(self, ctx: RunContext, params: dict) -> dict:
        raise NotImplementedError

    def predict_probs(self, ctx: RunContext, state: dict, locs: list[Location]) -> np.ndarray:
        raise NotImplementedError

    def predict_sets(
        self, ctx: RunContext, state: dict, locs: list[Location], rule: AssemblageRule
    ) -> list[frozenset[int]]:
        probs = self.predict_probs(ctx, state, locs)
        return [assemble(probs[i], rule) for i in range(len(probs))]


class ConstantMethod(Method):
    name = "constant"
    model_desc = "constant set"
    predictors_desc = "none"
    produces_probs = False

    def fit(self, ctx, params):
        k = params.get("k")
        if k is None:
            k = calibrate_constant_k(
                ctx.pa_train, n_species=ctx.n_species, k_max=params.get("k_max", 100)
            )
        members = constant_predictor(ctx.pa_train, int(k), ctx.n_species)
        return {"k": int(k), "species": sorted(members)}

    def predict_sets(self, ctx, state, locs, rule):
        members = frozenset(state["species"])
        return [members for _ in locs]


class KnnPoMethod(Method):
    name = "knn_po"
    model_desc = "nearest neighbors"
    predictors_desc = "coords (occurrence records)"
    produces_probs = False

    def fit(self, ctx, params):
        return {"k": int(params.get("k", 100))}

    def predict_sets(self, ctx, state, locs, rule):
        predictor = KnnPoPredictor(ctx.po_records, k=state["k"])
        return predictor.predict_many(locs)


class KnnPaMethod(Method):
    name = "knn_pa"
    model_desc = "nearest neighbors"
    predictors_desc = "coords"

    def fit(self, ctx, params):
        return {"k": int(params.get("k", 25))}

    def predict_probs(self, ctx, state, locs):
        predictor = KnnPaPredictor(ctx.pa_train, ctx.n_species, k=state["k"])
        return predictor.predict_probs(locs)


class CooccurrenceMethod(Method):
    name = "cooccurrence"
    model_desc = "co-occurrence average"
    predictors_desc = "nearby records + survey co-occurrence"

    def fit(self, ctx, params):
        return {"radius": float(params.get("radius", 2.0))}

    def predict_probs(self, ctx, state, locs):
        table = build_cooccurrence(ctx.pa_train, ctx.n_species)
        predictor = CooccurrencePredictor(table, ctx.po_records, state["radius"])
        return predictor.predict_probs(locs)


class MaxentMethod(Method):
    name = "maxent"
    model_desc = "L1 Poisson regression"
    predictors_desc = "environment"
    default_source = "env"

    def fit(self, ctx, params):
        feat = params.get("features", {"source": "env", "expansion": "full"})
        pack = ctx.features(**feat)
        X = ctx.train_matrix(**feat)
        Y = multi_hot(ctx.train_truth_sets(), ctx.n_species)
        # models are always fit on the sub-train rows so that the filtered
        # and unfiltered variants share the same per-species models
        sub_fraction = float(params.get("sub_val_fraction", 0.2))
        train_rows, val_rows = sub_split(len(X), sub_fraction, ctx.seed)
        bank = fit_glm_bank(
            X[train_rows],
            Y[train_rows],
            pack.linear_mask,
            lam=params.get("lambda"),
            seed=ctx.seed,
            workers=ctx.workers,
        )
        if params.get("filter", True):
            truth_sets = [ctx.pa_train[i].present for i in val_rows]
            filter_species_models(bank, X[val_rows], truth_sets)
        return {"bank": bank.to_dict(), "features": pack.state()}

    def predict_probs(self, ctx, state, locs):
        pack = ctx.rebuild_pack(state["features"])
        bank = SpeciesModelBank.from_dict(state["bank"])
        return bank.predict_probs(pack.transform(locs))


class ForestMethod(Method):
    name = "forest"
    model_desc = "random forest"
    predictors_desc = "environment"
    default_source = "env"

    def fit(self, ctx, params):
        feat = params.get("features", {"source": "env", "expansion": "none"})
        pack = ctx.features(**feat)
        X = ctx.train_matrix(**feat)
        Y = multi_hot(ctx.train_truth_sets(), ctx.n_species)
        bank = fit_forest_bank(
            X,
            Y,
            grid=params.get("grid"),
            cv_folds=int(params.get("cv_folds", 3)),
            seed=ctx.seed,
            workers=ctx.workers,
            n_trees=params.get("n_trees"),
            max_depth=params.get("max_depth"),
            min_leaf=params.get("min_leaf"),
        )
        return {"bank": bank.to_dict(), "features": pack.state()}

    def predict_probs(self, ctx, state, locs):
        pack = ctx.rebuild_pack(state["features"])
        bank = SpeciesModelBank.from_dict(state["bank"])
        return bank.predict_probs(pack.transform(locs))


class StagedMethod(Method):
    name = "staged"
    model_desc = "linear multi-label"
    predictors_desc = "environment"
    default_source = "env"

    def fit(self, ctx, params):
        feat = params.get("features", {"source": "env", "expansion": "quadratic"})
        pack = ctx.features(**feat)
        X_pa = ctx.train_matrix(**feat)
        Y_pa = multi_hot(ctx.train_truth_sets(), ctx.n_species)
        X_po = pack.transform([r.location for r in ctx.po_records]) if ctx.po_records else None
        po_labels = (
            np.array([r.species for r in ctx.po_records]) if ctx.po_records else None
        )
        stages = schedule_from_config(params.get("schedule", ["pa", "po", "pa"]))
        defaults = {
            k: params[k] for k in ("epochs", "lr", "batch_size", "momentum") if k in params
        }
        if defaults:
            for st in stages:
                for key, val in defaults.items():
                    setattr(st, key, val)
        model = LinearMultiLabelModel.zeros(ctx.n_species, X_pa.shape[1])
        model, trace = train(model, stages, X_po, po_labels, X_pa, Y_pa, seed=ctx.seed)
        return {
            "model": model.to_dict(),
            "features": pack.state(),
            "schedule": [st.data for st in stages],
            "loss_trace": trace.stage_losses,
        }

    def predict_probs(self, ctx, state, locs):
        pack = ctx.rebuild_pack(state["features"])
        model = LinearMultiLabelModel.from_dict(state["model"])
        return model.predict_probs(pack.transform(locs))


class EnsembleMethod(Method):
    name = "ensemble"
    model_desc = "ensemble average"
    predictors_desc = "members"

    def fit(self, ctx, params):
        members = params.get("members")
        if not members:
            raise ConfigError("ensemble requires a members list")
        states = []
        for cfg in members:
            spec = MethodSpec.from_config(cfg)
            method = REGISTRY[spec.name]
            if not method.produces_probs:
                raise ConfigError(f"ensemble member {spec.name} produces no probabilities")
            states.append({"name": spec.name, "state": method.fit(ctx, spec.params)})
        return {"members": states, "weights": params.get("weights")}

    def predict_probs(self, ctx, state, locs):
        outputs = [
            REGISTRY[m["name"]].predict_probs(ctx, m["state"], locs) for m in state["members"]
        ]
        return ensemble_average(outputs, state["weights"])


REGISTRY: dict[str, Method] = {
    m.name: m
    for m in (
        ConstantMethod(),
        KnnPoMethod(),
        KnnPaMethod(),
        CooccurrenceMethod(),
        MaxentMethod(),
        ForestMethod(),
        StagedMethod(),
        EnsembleMethod(),
    )
}


def fit_method(ctx: RunContext, spec: MethodSpec, provenance: dict | None = None) -> dict:
    method = REGISTRY[spec.name]
    state = method.fit(ctx, spec.params)
    return {
        "method": spec.name,
        "label": spec.label,
        "params": spec.params,
        "assemblage": spec.assemblage,
        "provenance": provenance or {},
        "state": state,
    }


def predict_method(ctx: RunContext, artifact: dict) -> list[PredictionSet]:
    method = REGISTRY[artifact["method"]]
    rule = AssemblageRule.from_config(artifact.get("assemblage"))
    locs = ctx.test_locations()
    if method.produces_probs:
        probs = method.predict_probs(ctx, artifact["state"], locs)
        return assemble_all(probs, ctx.test_ids(), rule)
    sets = method.predict_sets(ctx, artifact["state"], locs, rule)
    return [PredictionSet(sid, frozenset(s)) for sid, s in zip(ctx.test_ids(), sets)]


# ---------------------------------------------------------------------------
# run + reports


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def run(manifest: RunManifest, workers: int | None = None) -> Path:
    """Execute every method in the manifest: fit on the train side, predict
    the test side, evaluate, and write the leaderboard. A failing method
    becomes a failed leaderboard row; the run continues.
    """
    out_dir = Path(os.environ.get(ENV_OUTPUT_DIR) or manifest.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx = build_context(manifest, workers=workers)

    with (out_dir / "run.json").open("w", encoding="utf-8") as fh:
        json.dump(
            {
                "manifest_hash": manifest.hash,
                "seed": manifest.seed,
                "data": manifest.data,
                "n_po": len(ctx.po_records),
                "n_pa_train": len(ctx.pa_train),
                "n_pa_test": len(ctx.pa_test),
                "n_species": ctx.n_species,
                "methods": [m.label for m in manifest.methods],
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    save_pa_csv(out_dir / "pa_train.csv", ctx.pa_train, ctx.index)
    save_pa_csv(out_dir / "pa_test.csv", ctx.pa_test, ctx.index)
    save_split_csv(out_dir / "split.csv", ctx.split, ctx.all_pa)

    rows = []
    for spec in manifest.methods:
        method = REGISTRY[spec.name]
        method_dir = out_dir / spec.label
        method_dir.mkdir(parents=True, exist_ok=True)
        try:
            artifact = fit_method(
                ctx, spec, provenance={"manifest_hash": manifest.hash, "seed": manifest.seed}
            )
            with (method_dir / "model.json").open("w", encoding="utf-8") as fh:
                json.dump(artifact, fh)
                fh.write("\n")
            preds = predict_method(ctx, artifact)
            write_submission(method_dir / "submission.csv", preds, ctx.index)
            report = evaluate_predictions(ctx.pa_test, preds)
            payload = report.to_dict()
            payload["provenance"] = {
                "manifest_hash": manifest.hash,
                "seed": manifest.seed,
                "method": spec.label,
            }
            with (method_dir / "metrics.json").open("w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=2)
                fh.write("\n")
            rows.append(
                {
                    "method": spec.label,
                    "model": method.model_desc,
                    "predictors": method.describe_predictors(spec.params),
                    "score": report.micro_f1,
                    "score_sp": report.macro_species_f1,
                    "abs_error": report.set_size.abs_error,
                    "bias": report.set_size.bias,
                    "n_surveys": report.n_surveys,
                    "status": "ok",
                    "reason": "",
                }
            )
        except Exception as exc:  # failed methods must not abort the run
            log.error("method %s failed: %s", spec.label, exc)
            log.debug("%s", traceback.format_exc())
            rows.append(
                {
                    "method": spec.label,
                    "model": method.model_desc,
                    "predictors": method.describe_predictors(spec.params),
                    "score": "",
                    "score_sp": "",
                    "abs_error": "",
                    "bias": "",
                    "n_surveys": "",
                    "status": "failed",
                    "reason": str(exc),
                }
            )

    ok = sorted(
        (r for r in rows if r["status"] == "ok"), key=lambda r: -r["score"]
    )
    failed = [r for r in rows if r["status"] == "failed"]
    header = [
        "method",
        "model",
        "predictors",
        "score",
        "score_sp",
        "abs_error",
        "bias",
        "n_surveys",
        "status",
        "reason",
        "manifest_hash",
        "seed",
    ]
    with (out_dir / "leaderboard.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in ok + failed:
            writer.writerow(
                [_fmt(r[k]) for k in header[:10]] + [manifest.hash, manifest.seed]
            )
    return out_dir


def read_leaderboard(run_dir: str | Path) -> list[dict]:
    path = Path(run_dir) / "leaderboard.csv"
    if not path.exists():
        raise DataError(f"leaderboard not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def report_diagnostics(run_dir: str | Path, manifest: RunManifest | None = None) -> Path:
    """Build the diagnostics bundle from a completed run directory.

    Emits CSV tables plus matplotlib figures: micro F1 per method and
    stratum, set-size errors per method, species accumulation per stratum,
    and the per-species record-vs-survey count comparison with Spearman.
    """
    run_dir = Path(run_dir)
    rows = read_leaderboard(run_dir)
    pa_test = load_pa_csv(run_dir / "pa_test.csv", crs=PLANAR)
    ids = list(pa_test.index.ids)
    # rebuild on the union so submissions with train-only species still parse
    pa_train = load_pa_csv(run_dir / "pa_train.csv", crs=PLANAR)
    union_ids = sorted(set(ids) | set(pa_train.index.ids))
    index = SpeciesIndex(union_ids)
    truth = load_pa_csv(run_dir / "pa_test.csv", index=index, crs=PLANAR).surveys

    diag = run_dir / "diagnostics"
    diag.mkdir(exist_ok=True)

    f1_table: dict[str, dict[str, float]] = {}
    set_rows = []
    for row in rows:
        if row["status"] != "ok":
            continue
        method = row["method"]
        sub_path = run_dir / method / "submission.csv"
        if not sub_path.exists():
            raise DataError(f"missing submission for method {method}")
        preds = read_submission(sub_path, index)
        f1_table[method] = per_stratum_micro_f1(truth, preds)
        sizes = set_size_errors(truth, preds)
        set_rows.append({"method": method, "abs_error": sizes.abs_error, "bias": sizes.bias})

    strata = sorted({s for t in f1_table.values() for s in t})
    with (diag / "f1_per_stratum.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method"] + strata)
        for method in sorted(f1_table):
            writer.writerow(
                [method] + [_fmt(f1_table[method].get(s, "")) for s in strata]
            )
    with (diag / "set_size.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "abs_error", "bias"])
        for r in sorted(set_rows, key=lambda r: r["abs_error"]):
            writer.writerow([r["method"], _fmt(r["abs_error"]), _fmt(r["bias"])])

    by_stratum: dict[str, list[PASurvey]] = {}
    for s in truth:
        by_stratum.setdefault(s.stratum or "all", []).append(s)
    curves = {
        stratum: species_accumulation(surveys, n_repeats=5, seed=1234)
        for stratum, surveys in sorted(by_stratum.items())
    }
    with (diag / "species_accumulation.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["stratum", "n_surveys", "mean_distinct_species"])
        for stratum in sorted(curves):
            for n, v in curves[stratum]:
                writer.writerow([stratum, n, _fmt(v)])

    summary: dict = {"strata": strata, "methods": sorted(f1_table)}
    po_path = None
    if manifest is not None:
        data = manifest.data
        if "synthetic_dir" in data:
            po_path, crs = Path(data["synthetic_dir"]) / "po.csv", PLANAR
        elif "po_csv" in data:
            po_path, crs = Path(data["po_csv"]), data.get("crs", "lonlat")
    if po_path is not None and po_path.exists():
        po = load_po_csv(po_path, index=index, crs=crs).records
        all_pa = truth + load_pa_csv(run_dir / "pa_train.csv", index=index, crs=PLANAR).surveys
        radius = float((manifest.report or {}).get("radius", 2.0))
        comparison = presence_count_comparison(all_pa, po, radius, n_species=len(index))
        with (diag / "presence_comparison.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["speciesId", "pa_count", "po_count_within_radius"])
            for s in range(len(index)):
                writer.writerow(
                    [index.id_of(s), int(comparison.pa_counts[s]), int(comparison.po_counts[s])]
                )
        summary["presence_spearman"] = comparison.spearman
        summary["presence_radius"] = radius
        plots.save_presence_scatter(
            diag / "fig_presence_comparison.png",
            comparison.pa_counts,
            comparison.po_counts,
            comparison.spearman,
        )

    if f1_table:
        plots.save_f1_per_stratum(diag / "fig_f1_per_stratum.png", f1_table)
        plots.save_set_size_bars(diag / "fig_set_size.png", set_rows)
    plots.save_accumulation_curves(diag / "fig_species_accumulation.png", curves)

    with (diag / "summary.json").open("w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return diag
