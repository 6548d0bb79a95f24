"""Shallow multi-label model trained under staged schedules that alternate
between the two observation data types: single-label occurrence records
(softmax cross-entropy) and exhaustive survey inventories (per-species
binary cross-entropy with logits). Each stage continues from the previous
stage's weights, which is the mechanism under test: a final inventory stage
corrects the commonness and set-size distortions a record-only stage
induces.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, DataError

PO_STAGE = "po"
PA_STAGE = "pa"


def _logsumexp(z: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(z, axis=axis, keepdims=True)
    return (m + np.log(np.sum(np.exp(z - m), axis=axis, keepdims=True))).squeeze(axis)


def _softmax(z: np.ndarray) -> np.ndarray:
    m = np.max(z, axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def loss_softmax_ce(z: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Single-label cross-entropy on one logit vector.

    value = logsumexp(z) - z[label]; gradient = softmax(z) - onehot(label).
    """
    z = np.asarray(z, dtype=float)
    if not np.isfinite(z).all():
        raise DataError("non-finite logits")
    value = float(_logsumexp(z) - z[label])
    grad = _softmax(z)
    grad[label] -= 1.0
    return value, grad


def loss_sigmoid_bce(z: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Multi-label binary cross-entropy with logits on one sample.

    value = sum_s softplus(z_s) - y_s z_s (each species contributes ln 2 at
    z = 0); gradient = sigmoid(z) - y.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.isfinite(z).all():
        raise DataError("non-finite logits")
    if z.shape != y.shape:
        raise DataError("logits and labels differ in shape")
    value = float(np.sum(_softplus(z) - y * z))
    return value, _sigmoid(z) - y


@dataclass
class Stage:
    """One training stage. The loss is implied by the data type: occurrence
    records use softmax cross-entropy, survey inventories use sigmoid BCE."""

    data: str
    epochs: int = 30
    lr: float = 0.05
    batch_size: int = 256
    momentum: float = 0.9

    def __post_init__(self):
        if self.data not in (PO_STAGE, PA_STAGE):
            raise ConfigError(f"unknown stage data {self.data!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.lr < 0:
            raise ConfigError("lr must be >= 0")

    @property
    def loss(self) -> str:
        return "softmax_ce" if self.data == PO_STAGE else "sigmoid_bce"


def schedule_from_config(stages: list) -> list[Stage]:
    """Parse a schedule given as ["pa","po","pa"] or a list of stage dicts."""
    out = []
    for item in stages:
        if isinstance(item, str):
            out.append(Stage(data=item))
        else:
            out.append(Stage(**item))
    if not out:
        raise ConfigError("schedule has no stages")
    return out


@dataclass
class LinearMultiLabelModel:
    """Per-species linear logits z = W phi(x) + b with sigmoid readout."""

    W: np.ndarray
    b: np.ndarray

    @classmethod
    def zeros(cls, n_species: int, n_features: int) -> "LinearMultiLabelModel":
        return cls(np.zeros((n_species, n_features)), np.zeros(n_species))

    def logits(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.W.shape[1]:
            raise DataError(
                f"feature dimension mismatch: {X.shape[1]} != {self.W.shape[1]}"
            )
        return X @ self.W.T + self.b

    def predict_probs(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.logits(X))

    def copy(self) -> "LinearMultiLabelModel":
        return LinearMultiLabelModel(self.W.copy(), self.b.copy())

    def to_dict(self) -> dict:
        return {"W": self.W.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearMultiLabelModel":
        return cls(np.asarray(d["W"], dtype=float), np.asarray(d["b"], dtype=float))


@dataclass
class TrainTrace:
    stage_losses: list[list[float]] = field(default_factory=list)


def _stage_batches(n: int, batch_size: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start : start + batch_size]


def train(
    model: LinearMultiLabelModel,
    schedule: list[Stage],
    X_po: np.ndarray | None,
    po_labels: np.ndarray | None,
    X_pa: np.ndarray | None,
    Y_pa: np.ndarray | None,
    seed: int,
) -> tuple[LinearMultiLabelModel, TrainTrace]:
    """Momentum SGD through the stage schedule.

    Batch order is drawn from a per-stage seeded stream; each stage starts
    from the previous stage's weights with fresh momentum. A NaN loss stops
    the run with an error naming the stage and epoch.
    """
    model = model.copy()
    trace = TrainTrace()
    for stage_idx, stage in enumerate(schedule):
        if stage.data == PO_STAGE:
            if X_po is None or po_labels is None:
                raise ConfigError(f"stage {stage_idx}: no occurrence data supplied")
            X, n = X_po, len(X_po)
        else:
            if X_pa is None or Y_pa is None:
                raise ConfigError(f"stage {stage_idx}: no survey data supplied")
            X, n = X_pa, len(X_pa)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, stage_idx))))
        vW = np.zeros_like(model.W)
        vb = np.zeros_like(model.b)
        epoch_losses = []
        for epoch in range(stage.epochs):
            losses = []
            for batch in _stage_batches(n, stage.batch_size, rng):
                Xb = X[batch]
                Z = model.logits(Xb)
                if stage.data == PO_STAGE:
                    labels = po_labels[batch]
                    lse = _logsumexp(Z, axis=1)
                    value = float(np.mean(lse - Z[np.arange(len(batch)), labels]))
                    G = _softmax(Z)
                    G[np.arange(len(batch)), labels] -= 1.0
                else:
                    Yb = Y_pa[batch]
                    value = float(np.mean(np.sum(_softplus(Z) - Yb * Z, axis=1)))
                    G = _sigmoid(Z) - Yb
                if not np.isfinite(value):
                    raise DataError(
                        f"training diverged at stage {stage_idx} epoch {epoch}"
                    )
                gW = G.T @ Xb / len(batch)
                gb = G.mean(axis=0)
                vW = stage.momentum * vW - stage.lr * gW
                vb = stage.momentum * vb - stage.lr * gb
                model.W += vW
                model.b += vb
                losses.append(value)
            epoch_losses.append(float(np.mean(losses)))
        trace.stage_losses.append(epoch_losses)
    return model, trace


def multi_hot(surv_sets: list[frozenset[int]], n_species: int) -> np.ndarray:
    Y = np.zeros((len(surv_sets), n_species))
    for i, present in enumerate(surv_sets):
        for s in present:
            Y[i, s] = 1.0
    return Y
