"""Exact spatial queries over point sets.

Brute-force vectorized distances (chunked to bound memory): every query is
exact, deterministic, and ties at the k-th distance are all returned.
Planar data uses Euclidean distance; lon/lat uses haversine.
"""
from __future__ import annotations

import numpy as np

from .core import LONLAT, PLANAR, ConfigError, DataError

EARTH_RADIUS_KM = 6371.0088
_CHUNK = 4_000_000  # max pairwise distances held at once


def haversine_km(lon1, lat1, lon2, lat2) -> np.ndarray:
    """Great-circle distance in km on the mean-radius sphere."""
    lon1, lat1, lon2, lat2 = (np.radians(np.asarray(a, dtype=float)) for a in (lon1, lat1, lon2, lat2))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


class SpatialIndex:
    """k-nearest and radius queries over a fixed point set."""

    def __init__(self, xs: np.ndarray, ys: np.ndarray, crs: str = PLANAR):
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        if self.xs.shape != self.ys.shape or self.xs.ndim != 1:
            raise ConfigError("xs and ys must be equal-length 1-D arrays")
        if len(self.xs) == 0:
            raise DataError("empty point set")
        if crs not in (PLANAR, LONLAT):
            raise ConfigError(f"unknown crs {crs!r}")
        self.crs = crs

    def __len__(self) -> int:
        return len(self.xs)

    def _distances(self, qx: np.ndarray, qy: np.ndarray) -> np.ndarray:
        """(n_queries, n_points) distance matrix for a chunk of queries."""
        if self.crs == LONLAT:
            return haversine_km(qx[:, None], qy[:, None], self.xs[None, :], self.ys[None, :])
        dx = qx[:, None] - self.xs[None, :]
        dy = qy[:, None] - self.ys[None, :]
        return np.sqrt(dx * dx + dy * dy)

    def _query_chunks(self, qx: np.ndarray, qy: np.ndarray):
        qx = np.atleast_1d(np.asarray(qx, dtype=float))
        qy = np.atleast_1d(np.asarray(qy, dtype=float))
        step = max(1, _CHUNK // len(self.xs))
        for start in range(0, len(qx), step):
            stop = min(start + step, len(qx))
            yield start, self._distances(qx[start:stop], qy[start:stop])

    def knn(self, qx, qy, k: int) -> list[np.ndarray]:
        """Indices of the k nearest points per query, plus all exact ties
        at the k-th distance. Each array is sorted by (distance, index)."""
        if k < 1:
            raise ConfigError("k must be >= 1")
        if k > len(self.xs):
            raise ConfigError(f"k={k} exceeds {len(self.xs)} indexed points")
        out: list[np.ndarray] = []
        for _, dmat in self._query_chunks(qx, qy):
            for d in dmat:
                if k < len(d):
                    part = np.argpartition(d, k - 1)[:k]
                    dk = d[part].max()
                else:
                    dk = d.max()
                idx = np.flatnonzero(d <= dk)
                order = np.lexsort((idx, d[idx]))
                out.append(idx[order])
        return out

    def radius(self, qx, qy, r: float) -> list[np.ndarray]:
        """Indices of all points within distance ``r`` (inclusive) per query."""
        if r < 0:
            raise ConfigError("radius must be >= 0")
        out: list[np.ndarray] = []
        for _, dmat in self._query_chunks(qx, qy):
            for d in dmat:
                out.append(np.flatnonzero(d <= r))
        return out

    def min_distance(self, qx, qy) -> np.ndarray:
        """Distance from each query point to its nearest indexed point."""
        mins = []
        for _, dmat in self._query_chunks(qx, qy):
            mins.append(dmat.min(axis=1))
        return np.concatenate(mins)
