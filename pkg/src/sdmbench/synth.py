"""Synthetic ground-truth world.

Builds smooth random environment grids, virtual species with known unimodal
responses (so true per-cell occupancy probabilities are available in closed
form), and samples the two observation data types from that truth:
exhaustive plot inventories, and single-label occurrence records whose
locations follow a spatial effort field and whose reported species is drawn
proportionally to a per-species detection weight among the species actually
present. The detection/effort mechanism is a deliberate construction: it
injects a measurable decoupling between record counts and true prevalence.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import ConfigError, DataError, PASurvey, PORecord, PLANAR, Location, SpeciesIndex
from .rasters import RasterGrid, read_ascii_grid, write_ascii_grid

_TAG_ENV = 1
_TAG_SPECIES = 2
_TAG_EFFORT = 3
_TAG_PA = 4
_TAG_PO = 5


@dataclass
class WorldConfig:
    nx: int = 64
    ny: int = 64
    cell: float = 1.0
    x0: float = 0.0
    y0: float = 0.0
    n_env_grids: int = 6
    bumps_per_grid: int = 12
    n_species: int = 50
    active_vars_per_species: int = 3
    niche_width: float = 0.4
    prevalence_range: tuple[float, float] = (0.03, 0.4)
    mid_species: int = 0
    mid_prevalence_range: tuple[float, float] = (0.02, 0.06)
    rare_species: int = 0
    rare_prevalence_range: tuple[float, float] = (0.002, 0.012)
    rare_niche_width: float | None = None  # sharp-niche specialists when set
    rare_active_from: int | None = None  # rare species respond only to grids >= this
    detection_weight_range: tuple[float, float] = (1.0, 1e6)
    effort_roughness: float = 2.5
    n_strata: int = 2
    empty_retry: int = 1000

    def validate(self) -> None:
        if self.n_species < 2:
            raise ConfigError("n_species must be >= 2")
        if self.nx < 1 or self.ny < 1 or self.cell <= 0:
            raise ConfigError("bad grid dimensions")
        if self.n_env_grids < 1:
            raise ConfigError("need at least one environment grid")
        if self.active_vars_per_species < 1 or self.active_vars_per_species > self.n_env_grids:
            raise ConfigError("active_vars_per_species out of range")
        if self.rare_species < 0 or self.mid_species < 0:
            raise ConfigError("species tier counts must be >= 0")
        if self.rare_species + self.mid_species > self.n_species:
            raise ConfigError("species tiers exceed n_species")
        for lo, hi in (
            self.prevalence_range,
            self.mid_prevalence_range,
            self.rare_prevalence_range,
        ):
            if not (0.0 < lo <= hi < 1.0):
                raise ConfigError("prevalence ranges must satisfy 0 < lo <= hi < 1")
        if self.detection_weight_range[0] <= 0:
            raise ConfigError("detection weights must be > 0")
        if self.effort_roughness < 0:
            raise ConfigError("effort_roughness must be >= 0")

    _RANGE_FIELDS = (
        "prevalence_range",
        "mid_prevalence_range",
        "rare_prevalence_range",
        "detection_weight_range",
    )

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in self._RANGE_FIELDS:
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WorldConfig":
        kwargs = dict(d)
        for key in cls._RANGE_FIELDS:
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass
class VirtualSpecies:
    index: int
    alpha: float
    beta: np.ndarray  # over [v, v^2] per environment variable
    detection_weight: float


@dataclass
class EffortField:
    grid: RasterGrid

    def __post_init__(self):
        if self.grid.values.sum() <= 0:
            raise DataError("effort field has no intensity")


def _rng(seed: int, tag: int, item: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, tag, item))))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _bump_field(rng: np.random.Generator, cfg: WorldConfig) -> np.ndarray:
    """Sum of random Gaussian bumps evaluated at cell centers, shape (ny, nx)."""
    xs = cfg.x0 + (np.arange(cfg.nx) + 0.5) * cfg.cell
    ys = cfg.y0 + (np.arange(cfg.ny) + 0.5) * cfg.cell
    gx, gy = np.meshgrid(xs, ys)
    width_x, width_y = cfg.nx * cfg.cell, cfg.ny * cfg.cell
    out = np.zeros((cfg.ny, cfg.nx))
    for _ in range(cfg.bumps_per_grid):
        cx = cfg.x0 + rng.random() * width_x
        cy = cfg.y0 + rng.random() * width_y
        w = (0.08 + 0.22 * rng.random()) * max(width_x, width_y)
        amp = rng.uniform(-1.0, 1.0)
        out += amp * np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2.0 * w * w))
    return out


class SynthWorld:
    """Environment grids + species truth + effort field, reproducible from
    (config, seed)."""

    def __init__(
        self,
        config: WorldConfig,
        seed: int,
        grids: list[RasterGrid],
        species: list[VirtualSpecies],
        effort: EffortField,
        env_mean: np.ndarray,
        env_sd: np.ndarray,
    ):
        self.config = config
        self.seed = seed
        self.grids = grids
        self.species = species
        self.effort = effort
        self.env_mean = env_mean
        self.env_sd = env_sd
        self.species_index = SpeciesIndex(
            [f"sp{idx:04d}" for idx in range(config.n_species)]
        )
        self._occupancy = self._compute_occupancy()

    @property
    def extent(self) -> tuple[float, float, float, float]:
        c = self.config
        return c.x0, c.y0, c.x0 + c.nx * c.cell, c.y0 + c.ny * c.cell

    def _cell_features(self) -> np.ndarray:
        """Expanded (linear, quadratic) standardized env values per cell,
        shape (ny*nx, 2*G), row order matches flattened grids."""
        cols = []
        for g, grid in enumerate(self.grids):
            v = (grid.values.ravel() - self.env_mean[g]) / self.env_sd[g]
            cols.append(v)
            cols.append(v * v)
        return np.column_stack(cols)

    def _compute_occupancy(self) -> np.ndarray:
        phi = self._cell_features()
        logits = np.column_stack([sp.alpha + phi @ sp.beta for sp in self.species])
        return _sigmoid(logits)

    def occupancy_matrix(self) -> np.ndarray:
        """(n_cells, S) true presence probability per cell (row-major cells)."""
        return self._occupancy

    def cell_index_of(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        c = self.config
        i = np.clip(np.floor((np.asarray(x) - c.x0) / c.cell).astype(int), 0, c.nx - 1)
        j = np.clip(np.floor((np.asarray(y) - c.y0) / c.cell).astype(int), 0, c.ny - 1)
        return j * c.nx + i

    def occupancy_at(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self._occupancy[self.cell_index_of(x, y)]

    def mean_occupancy(self) -> np.ndarray:
        return self._occupancy.mean(axis=0)

    def detection_weights(self) -> np.ndarray:
        return np.array([sp.detection_weight for sp in self.species])

    def stratum_of(self, x: float) -> str | None:
        c = self.config
        if c.n_strata <= 1:
            return None
        band = min(int((x - c.x0) / (c.nx * c.cell / c.n_strata)), c.n_strata - 1)
        return f"band{band}"


def generate_world(config: WorldConfig, seed: int) -> SynthWorld:
    config.validate()
    grids = []
    for g in range(config.n_env_grids):
        values = _bump_field(_rng(seed, _TAG_ENV, g), config)
        grids.append(
            RasterGrid(
                name=f"env{g:02d}",
                nx=config.nx,
                ny=config.ny,
                x0=config.x0,
                y0=config.y0,
                cell=config.cell,
                values=values,
            )
        )
    env_mean = np.array([g.values.mean() for g in grids])
    env_sd = np.array([max(g.values.std(), 1e-8) for g in grids])

    # standardized cell matrix used for niche placement and calibration
    std_cells = np.column_stack(
        [(g.values.ravel() - env_mean[i]) / env_sd[i] for i, g in enumerate(grids)]
    )

    species = []
    n_common = config.n_species - config.rare_species - config.mid_species
    n_mid_end = n_common + config.mid_species
    for s in range(config.n_species):
        rng = _rng(seed, _TAG_SPECIES, s)
        is_rare = s >= n_mid_end
        is_mid = n_common <= s < n_mid_end
        base_width = (
            config.rare_niche_width
            if is_rare and config.rare_niche_width is not None
            else config.niche_width
        )
        if is_rare and config.rare_active_from is not None:
            pool = np.arange(config.rare_active_from, config.n_env_grids)
        else:
            pool = np.arange(config.n_env_grids)
        n_active = min(config.active_vars_per_species, len(pool))
        active = pool[rng.choice(len(pool), size=n_active, replace=False)]
        beta = np.zeros(2 * config.n_env_grids)
        base = np.zeros(std_cells.shape[0])
        for v in np.sort(active):
            center = rng.uniform(-1.2, 1.2)
            width = base_width * rng.uniform(0.8, 1.2)
            k = 1.0 / (2.0 * width * width)
            beta[2 * v] = 2.0 * k * center  # linear term
            beta[2 * v + 1] = -k  # negative quadratic: unimodal response
            base += -k * (std_cells[:, v] - center) ** 2 + k * center * center
        if is_rare:
            lo, hi = config.rare_prevalence_range
        elif is_mid:
            lo, hi = config.mid_prevalence_range
        else:
            lo, hi = config.prevalence_range
        target = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        alpha = _calibrate_alpha(base, target)
        wlo, whi = config.detection_weight_range
        weight = float(np.exp(rng.uniform(np.log(wlo), np.log(whi)))) if whi > wlo else float(wlo)
        species.append(VirtualSpecies(index=s, alpha=alpha, beta=beta, detection_weight=weight))

    effort_rng = _rng(seed, _TAG_EFFORT, 0)
    bump = _bump_field(effort_rng, config)
    sd = bump.std()
    rough = bump / sd if sd > 0 else np.zeros_like(bump)
    intensity = np.exp(config.effort_roughness * rough)
    effort = EffortField(
        RasterGrid(
            name="effort",
            nx=config.nx,
            ny=config.ny,
            x0=config.x0,
            y0=config.y0,
            cell=config.cell,
            values=intensity,
        )
    )
    return SynthWorld(config, seed, grids, species, effort, env_mean, env_sd)


def _calibrate_alpha(base: np.ndarray, target: float) -> float:
    """Intercept such that the domain-mean occupancy equals ``target``."""
    lo, hi = -60.0, 60.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _sigmoid(mid + base).mean() < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sample_pa(world: SynthWorld, n_surveys: int, seed: int) -> list[PASurvey]:
    """Uniformly placed exhaustive inventories; species enter independently
    with their true cell occupancy; surveys drawing an empty set are
    redrawn (new location and species) up to the retry bound."""
    if n_surveys < 1:
        raise ConfigError("n_surveys must be >= 1")
    c = world.config
    surveys = []
    for i in range(n_surveys):
        rng = _rng(seed, _TAG_PA, i)
        for attempt in range(c.empty_retry):
            x = c.x0 + rng.random() * c.nx * c.cell
            y = c.y0 + rng.random() * c.ny * c.cell
            q = world._occupancy[world.cell_index_of(np.array(x), np.array(y))]
            present = np.flatnonzero(rng.random(q.shape[0]) < q)
            if present.size:
                break
        else:
            raise DataError("world too sparse: empty sets after retry bound")
        surveys.append(
            PASurvey(
                survey_id=f"pa{i:06d}",
                location=Location(float(x), float(y), PLANAR),
                present=frozenset(int(s) for s in present),
                stratum=world.stratum_of(float(x)),
            )
        )
    return surveys


def sample_po(world: SynthWorld, n_records: int, seed: int) -> list[PORecord]:
    """Effort-biased single-label records.

    Location cell follows the effort field; the latent present set is drawn
    from the true occupancy; exactly one present species is reported, with
    probability proportional to its detection weight.
    """
    if n_records < 1:
        raise ConfigError("n_records must be >= 1")
    c = world.config
    weights = world.detection_weights()
    cum_effort = np.cumsum(world.effort.grid.values.ravel())
    cum_effort /= cum_effort[-1]
    records = []
    for i in range(n_records):
        rng = _rng(seed, _TAG_PO, i)
        for attempt in range(c.empty_retry):
            cell = int(np.searchsorted(cum_effort, rng.random(), side="right"))
            cell = min(cell, c.nx * c.ny - 1)
            cj, ci = divmod(cell, c.nx)
            x = c.x0 + (ci + rng.random()) * c.cell
            y = c.y0 + (cj + rng.random()) * c.cell
            q = world._occupancy[cell]
            present = np.flatnonzero(rng.random(q.shape[0]) < q)
            if present.size:
                break
        else:
            raise DataError("world too sparse: empty sets after retry bound")
        w = weights[present]
        cum_w = np.cumsum(w)
        pick = int(np.searchsorted(cum_w / cum_w[-1], rng.random(), side="right"))
        pick = min(pick, present.size - 1)
        records.append(
            PORecord(
                record_id=f"po{i:06d}",
                location=Location(float(x), float(y), PLANAR),
                species=int(present[pick]),
            )
        )
    return records


def save_world(world: SynthWorld, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "config.json").open("w", encoding="utf-8") as fh:
        json.dump({"config": world.config.to_dict(), "seed": world.seed}, fh, indent=2)
        fh.write("\n")
    for grid in world.grids:
        write_ascii_grid(out / f"{grid.name}.asc", grid)
    write_ascii_grid(out / "effort.asc", world.effort.grid)
    species = {
        "ids": world.species_index.to_list(),
        "env_mean": world.env_mean.tolist(),
        "env_sd": world.env_sd.tolist(),
        "species": [
            {
                "index": sp.index,
                "alpha": sp.alpha,
                "beta": sp.beta.tolist(),
                "detection_weight": sp.detection_weight,
            }
            for sp in world.species
        ],
    }
    with (out / "species.json").open("w", encoding="utf-8") as fh:
        json.dump(species, fh, indent=2)
        fh.write("\n")


def load_world(world_dir: str | Path) -> SynthWorld:
    world_dir = Path(world_dir)
    cfg_path = world_dir / "config.json"
    if not cfg_path.exists():
        raise DataError(f"world config not found: {cfg_path}")
    with cfg_path.open(encoding="utf-8") as fh:
        blob = json.load(fh)
    config = WorldConfig.from_dict(blob["config"])
    grids = [
        read_ascii_grid(world_dir / f"env{g:02d}.asc") for g in range(config.n_env_grids)
    ]
    effort = EffortField(read_ascii_grid(world_dir / "effort.asc"))
    with (world_dir / "species.json").open(encoding="utf-8") as fh:
        sp_blob = json.load(fh)
    species = [
        VirtualSpecies(
            index=rec["index"],
            alpha=rec["alpha"],
            beta=np.asarray(rec["beta"], dtype=float),
            detection_weight=rec["detection_weight"],
        )
        for rec in sp_blob["species"]
    ]
    return SynthWorld(
        config,
        blob["seed"],
        grids,
        species,
        effort,
        np.asarray(sp_blob["env_mean"], dtype=float),
        np.asarray(sp_blob["env_sd"], dtype=float),
    )
