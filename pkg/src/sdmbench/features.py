"""Tabular covariates: raster point sampling, standardization, and the
nonlinear feature expansion (linear / quadratic / hinge) used by the
regression models.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, DataError, Location
from .rasters import RasterGrid

SD_FLOOR = 1e-8
DEFAULT_HINGE_QUANTILES = (0.25, 0.5, 0.75)


@dataclass
class FeatureMatrix:
    """Standardized covariates with a validity mask.

    ``values`` is (N, D); masked-invalid entries were nodata or out of
    extent and have been imputed to the column mean (0 after
    standardization). ``all_invalid`` flags rows valid in no column.
    """

    values: np.ndarray
    mask: np.ndarray
    all_invalid: np.ndarray
    names: list[str]


class FeatureAssembler:
    """Samples a stack of rasters at point locations and standardizes.

    Standardization statistics are computed once from the locations passed
    to :meth:`fit` (training points) and reused verbatim for any points
    passed to :meth:`transform` afterwards.
    """

    def __init__(self, grids: list[RasterGrid], include_coords: bool = False):
        names = [g.name for g in grids]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate grid names: {names}")
        self.grids = grids
        self.include_coords = include_coords
        self.names = names + (["x", "y"] if include_coords else [])
        self.mean: np.ndarray | None = None
        self.sd: np.ndarray | None = None

    @property
    def n_features(self) -> int:
        return len(self.names)

    def _raw(self, locs: list[Location]) -> tuple[np.ndarray, np.ndarray]:
        xs = np.array([p.x for p in locs], dtype=float)
        ys = np.array([p.y for p in locs], dtype=float)
        cols, masks = [], []
        for grid in self.grids:
            vals, valid = grid.sample_many(xs, ys)
            cols.append(vals)
            masks.append(valid)
        if self.include_coords:
            cols.extend([xs, ys])
            masks.extend([np.ones(len(xs), bool), np.ones(len(xs), bool)])
        return np.column_stack(cols), np.column_stack(masks)

    def fit(self, locs: list[Location]) -> "FeatureAssembler":
        values, mask = self._raw(locs)
        mean = np.zeros(values.shape[1])
        sd = np.ones(values.shape[1])
        for d in range(values.shape[1]):
            col = values[mask[:, d], d]
            if col.size:
                mean[d] = col.mean()
                sd[d] = max(col.std(), SD_FLOOR)
        self.mean, self.sd = mean, sd
        return self

    def transform(self, locs: list[Location]) -> FeatureMatrix:
        if self.mean is None:
            raise ConfigError("assembler not fitted")
        values, mask = self._raw(locs)
        std = (values - self.mean) / self.sd
        std[~mask] = 0.0  # impute column mean
        return FeatureMatrix(std, mask, ~mask.any(axis=1), list(self.names))

    def fit_transform(self, locs: list[Location]) -> FeatureMatrix:
        return self.fit(locs).transform(locs)

    def stats_to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "include_coords": self.include_coords,
            "mean": [] if self.mean is None else self.mean.tolist(),
            "sd": [] if self.sd is None else self.sd.tolist(),
        }

    def stats_from_dict(self, state: dict) -> "FeatureAssembler":
        if state["names"] != self.names:
            raise ConfigError("feature names do not match serialized statistics")
        self.mean = np.asarray(state["mean"], dtype=float)
        self.sd = np.asarray(state["sd"], dtype=float)
        return self


@dataclass
class FeatureExpansion:
    """Per-variable nonlinear transforms applied to a standardized matrix.

    Output column order is deterministic: variables in input order, and for
    each variable linear, then quadratic, then hinges by ascending knot.
    A hinge knot contributes max(0, v - knot).
    """

    use_linear: bool = True
    use_quadratic: bool = True
    hinge_knots: dict[int, list[float]] = field(default_factory=dict)

    def fit_hinges(
        self, X: np.ndarray, quantiles: tuple[float, ...] = DEFAULT_HINGE_QUANTILES
    ) -> "FeatureExpansion":
        """Place hinge knots at empirical quantiles of the training columns."""
        self.hinge_knots = {}
        for d in range(X.shape[1]):
            knots = sorted(set(float(np.quantile(X[:, d], q)) for q in quantiles))
            self.hinge_knots[d] = knots
        self._check_knots(X)
        return self

    def _check_knots(self, X_train: np.ndarray | None = None) -> None:
        for d, knots in self.hinge_knots.items():
            if any(b <= a for a, b in zip(knots, knots[1:])):
                raise ConfigError(f"hinge knots for variable {d} not strictly ascending")
            if X_train is not None:
                lo, hi = X_train[:, d].min(), X_train[:, d].max()
                if any(k < lo or k > hi for k in knots):
                    raise ConfigError(f"hinge knot outside training range for variable {d}")

    def output_names(self, names: list[str]) -> list[str]:
        out = []
        for d, name in enumerate(names):
            if self.use_linear:
                out.append(name)
            if self.use_quadratic:
                out.append(f"{name}^2")
            for k in self.hinge_knots.get(d, []):
                out.append(f"hinge({name},{k:.6g})")
        return out

    def linear_column_mask(self, n_vars: int) -> np.ndarray:
        """Boolean mask over expanded columns marking the plain linear terms."""
        flags = []
        for d in range(n_vars):
            if self.use_linear:
                flags.append(True)
            if self.use_quadratic:
                flags.append(False)
            flags.extend([False] * len(self.hinge_knots.get(d, [])))
        return np.array(flags, dtype=bool)

    def to_dict(self) -> dict:
        return {
            "use_linear": self.use_linear,
            "use_quadratic": self.use_quadratic,
            "hinge_knots": {str(k): v for k, v in self.hinge_knots.items()},
        }

    @classmethod
    def from_dict(cls, state: dict) -> "FeatureExpansion":
        return cls(
            use_linear=state["use_linear"],
            use_quadratic=state["use_quadratic"],
            hinge_knots={int(k): list(v) for k, v in state["hinge_knots"].items()},
        )


def expand_features(X: np.ndarray, spec: FeatureExpansion) -> np.ndarray:
    """Apply the expansion to a standardized (N, D) matrix."""
    X = np.asarray(X, dtype=float)
    if not np.isfinite(X).all():
        raise DataError("non-finite feature values")
    spec._check_knots()
    cols = []
    for d in range(X.shape[1]):
        v = X[:, d]
        if spec.use_linear:
            cols.append(v)
        if spec.use_quadratic:
            cols.append(v * v)
        for knot in spec.hinge_knots.get(d, []):
            cols.append(np.maximum(0.0, v - knot))
    if not cols:
        raise ConfigError("feature expansion produces no columns")
    return np.column_stack(cols)


def assemble_features(
    grids: list[RasterGrid], locs: list[Location], include_coords: bool = False
) -> tuple[FeatureMatrix, FeatureAssembler]:
    """One-shot fit+transform convenience over a grid stack."""
    assembler = FeatureAssembler(grids, include_coords=include_coords)
    return assembler.fit_transform(locs), assembler
