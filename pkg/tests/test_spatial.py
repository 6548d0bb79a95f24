import numpy as np
import pytest

from sdmbench.core import ConfigError, DataError, LONLAT
from sdmbench.spatial import EARTH_RADIUS_KM, SpatialIndex, haversine_km


def test_haversine_known_values():
    # quarter circumference: pole to equator
    assert haversine_km(0.0, 0.0, 0.0, 90.0) == pytest.approx(
        np.pi / 2 * EARTH_RADIUS_KM, rel=1e-12
    )
    assert haversine_km(10.0, 20.0, 10.0, 20.0) == 0.0


def test_knn_exact_vs_brute_force(rng):
    xs = rng.random(300) * 100
    ys = rng.random(300) * 100
    index = SpatialIndex(xs, ys)
    for _ in range(50):
        qx, qy = float(rng.random() * 100), float(rng.random() * 100)
        k = int(rng.integers(1, 20))
        got = index.knn(qx, qy, k)[0]
        d = np.sqrt((xs - qx) ** 2 + (ys - qy) ** 2)
        want = np.argsort(d, kind="stable")[:k]
        assert set(want).issubset(set(got))
        assert np.all(d[got] <= d[want].max())


def test_knn_includes_all_ties():
    # four points at identical distance 1 from the origin
    xs = np.array([1.0, -1.0, 0.0, 0.0, 5.0])
    ys = np.array([0.0, 0.0, 1.0, -1.0, 5.0])
    index = SpatialIndex(xs, ys)
    got = index.knn(0.0, 0.0, 2)[0]
    assert set(got) == {0, 1, 2, 3}  # kth distance ties all included


def test_knn_k_validation():
    index = SpatialIndex(np.array([0.0]), np.array([0.0]))
    with pytest.raises(ConfigError):
        index.knn(0, 0, 0)
    with pytest.raises(ConfigError):
        index.knn(0, 0, 2)


def test_radius_query_inclusive(rng):
    xs = rng.random(100) * 10
    ys = rng.random(100) * 10
    index = SpatialIndex(xs, ys)
    hits = index.radius(5.0, 5.0, 2.5)[0]
    d = np.sqrt((xs - 5.0) ** 2 + (ys - 5.0) ** 2)
    assert set(hits) == set(np.flatnonzero(d <= 2.5))


def test_min_distance(rng):
    xs = rng.random(50)
    ys = rng.random(50)
    index = SpatialIndex(xs, ys)
    qx = rng.random(7)
    qy = rng.random(7)
    got = index.min_distance(qx, qy)
    for i in range(7):
        d = np.sqrt((xs - qx[i]) ** 2 + (ys - qy[i]) ** 2)
        assert got[i] == pytest.approx(d.min(), rel=1e-12)


def test_lonlat_uses_haversine():
    index = SpatialIndex(np.array([0.0, 100.0]), np.array([0.0, 0.0]), crs=LONLAT)
    # 100 degrees east along the equator is farther than 10 degrees north
    got = index.knn(0.0, 10.0, 1)[0]
    assert list(got) == [0]


def test_empty_index_rejected():
    with pytest.raises(DataError):
        SpatialIndex(np.array([]), np.array([]))
