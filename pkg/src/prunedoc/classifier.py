"""Lightweight text/background patch classifier.

Architecture is fixed: flatten -> linear(P^2 -> hidden) -> ReLU -> linear(hidden -> 1),
trained with binary cross-entropy in the numerically stable logit form via Adam.
Everything is plain numpy and fully deterministic given (data, config).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateDataError,
    FormatVersionError,
    ShapeError,
    TruncatedPayloadError,
    UndefinedMetricError,
)
from .imagegrid import PatchGrid, all_patch_pixels

MODEL_MAGIC = b"PDCLS1"
DEFAULT_HIDDEN = 256


@dataclass
class ClassifierModel:
    patch_size: int
    hidden_dim: int
    W1: np.ndarray  # (hidden, P^2)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float

    def __post_init__(self):
        d = self.patch_size * self.patch_size
        if self.W1.shape != (self.hidden_dim, d):
            raise ShapeError(f"W1 shape {self.W1.shape} != ({self.hidden_dim}, {d})")
        if self.b1.shape != (self.hidden_dim,) or self.w2.shape != (self.hidden_dim,):
            raise ShapeError("b1/w2 must have shape (hidden_dim,)")
        for arr in (self.W1, self.b1, self.w2):
            if not np.isfinite(arr).all():
                raise ShapeError("non-finite parameter")
        if not np.isfinite(self.b2):
            raise ShapeError("non-finite bias")


@dataclass
class PatchDataset:
    patch_size: int
    pixels: np.ndarray  # (N, P^2) uint8
    labels: np.ndarray  # (N,) uint8 in {0,1}

    def __post_init__(self):
        if self.pixels.ndim != 2 or self.pixels.shape[1] != self.patch_size**2:
            raise ShapeError(f"pixels shape {self.pixels.shape} inconsistent with P={self.patch_size}")
        if self.labels.shape != (self.pixels.shape[0],):
            raise ShapeError("labels length must match pixels")
        if not np.isin(self.labels, (0, 1)).all():
            raise ShapeError("labels must be 0/1")

    def __len__(self) -> int:
        return self.pixels.shape[0]


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    epochs: int = 20
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ConfigurationError("learning_rate > 0, batch_size >= 1, epochs >= 1 required")


def param_count(patch_size: int, hidden_dim: int = DEFAULT_HIDDEN) -> int:
    """Total scalar parameters: P^2*h (W1) + h (b1) + h (w2) + 1 (b2)."""
    if patch_size < 1 or hidden_dim < 1:
        raise ConfigurationError("patch_size and hidden_dim must be >= 1")
    return patch_size**2 * hidden_dim + 2 * hidden_dim + 1


def init_model(patch_size: int, hidden_dim: int, seed: int) -> ClassifierModel:
    """Seeded Gaussian(0, 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    d = patch_size * patch_size
    W1 = rng.normal(0.0, 1.0 / np.sqrt(d), size=(hidden_dim, d))
    w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden_dim), size=hidden_dim)
    return ClassifierModel(patch_size, hidden_dim, W1, np.zeros(hidden_dim), w2, 0.0)


def _normalize(pixels: np.ndarray) -> np.ndarray:
    x = np.asarray(pixels, dtype=np.float64)
    # uint8 input is scaled once; float input is assumed already in [0,1]
    if np.issubdtype(np.asarray(pixels).dtype, np.integer):
        x = x / 255.0
    return x


def forward(model: ClassifierModel, pixels: np.ndarray) -> float:
    """Logit for one patch: w2 . relu(W1 x + b1) + b2 with x = pixels/255."""
    x = _normalize(pixels).reshape(-1)
    if x.shape[0] != model.patch_size**2:
        raise ShapeError(f"expected {model.patch_size ** 2} pixels, got {x.shape[0]}")
    h = np.maximum(model.W1 @ x + model.b1, 0.0)
    return float(model.w2 @ h + model.b2)


def forward_batch(model: ClassifierModel, pixels: np.ndarray) -> np.ndarray:
    """Logits for a (N, P^2) batch."""
    x = _normalize(pixels)
    if x.ndim != 2 or x.shape[1] != model.patch_size**2:
        raise ShapeError(f"expected (N, {model.patch_size ** 2}), got {x.shape}")
    h = np.maximum(x @ model.W1.T + model.b1, 0.0)
    return h @ model.w2 + model.b2


def bce_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean BCE in stable logit form: max(z,0) - z*y + log(1 + exp(-|z|))."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    return float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_gradients(model: ClassifierModel, pixels: np.ndarray, labels: np.ndarray):
    """Analytic gradients of mean BCE over the batch w.r.t. all parameters."""
    x = _normalize(pixels)
    y = np.asarray(labels, dtype=np.float64)
    n = x.shape[0]
    h_pre = x @ model.W1.T + model.b1
    h = np.maximum(h_pre, 0.0)
    z = h @ model.w2 + model.b2
    dz = (_sigmoid(z) - y) / n
    gw2 = h.T @ dz
    gb2 = float(dz.sum())
    dh = np.outer(dz, model.w2) * (h_pre > 0)
    gW1 = dh.T @ x
    gb1 = dh.sum(axis=0)
    return gW1, gb1, gw2, gb2


def train(data: PatchDataset, cfg: TrainConfig, hidden_dim: int = DEFAULT_HIDDEN) -> ClassifierModel:
    """Adam on mean BCE; seeded init and seeded per-epoch shuffles.

    Identical (data, cfg) produces a bit-identical model.
    """
    if len(data) == 0:
        raise DegenerateDataError("empty dataset")
    classes = np.unique(data.labels)
    if classes.size < 2:
        raise DegenerateDataError(f"dataset contains a single class {classes.tolist()}")

    model = init_model(data.patch_size, hidden_dim, cfg.seed)
    x_all = _normalize(data.pixels)
    y_all = data.labels.astype(np.float64)

    params = [model.W1, model.b1, model.w2, np.array([model.b2])]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    t = 0
    shuffle_rng = np.random.default_rng(cfg.seed + 1)

    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(len(data))
        for start in range(0, len(data), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            gW1, gb1, gw2, gb2 = bce_gradients(model, x_all[idx], y_all[idx])
            grads = [gW1, gb1, gw2, np.array([gb2])]
            t += 1
            for p, g, mi, vi in zip(params, grads, m, v):
                mi += (1 - cfg.adam_beta1) * (g - mi)
                vi += (1 - cfg.adam_beta2) * (g * g - vi)
                m_hat = mi / (1 - cfg.adam_beta1**t)
                v_hat = vi / (1 - cfg.adam_beta2**t)
                p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
            model.b2 = float(params[3][0])

    return model


def classify_grid(model: ClassifierModel, grid: PatchGrid) -> np.ndarray:
    """Per-patch logits as a (rows, cols) float64 map."""
    if model.patch_size != grid.patch_size:
        raise ConfigurationError(
            f"model patch size {model.patch_size} != grid patch size {grid.patch_size}"
        )
    logits = forward_batch(model, all_patch_pixels(grid))
    return logits.reshape(grid.rows, grid.cols)


def average_precision(scores, labels) -> float:
    """AP over a ranked list: mean precision at each positive's rank.

    Ties are broken by original position (stable sort), so positives get no
    preferential ordering.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ShapeError("scores and labels must be equal-length 1-D sequences")
    n_pos = int(np.count_nonzero(y))
    if n_pos == 0:
        raise UndefinedMetricError("average precision undefined without positives")
    order = np.argsort(-s, kind="stable")
    hits = y[order].astype(np.float64)
    precision_at = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    return float(precision_at[hits == 1].sum() / n_pos)


# ---------------------------------------------------------------------------
# model file: magic "PDCLS1", LE u32 P, u32 hidden, then f32 W1 | b1 | w2 | b2


def model_bytes(model: ClassifierModel) -> bytes:
    parts = [
        MODEL_MAGIC,
        struct.pack("<II", model.patch_size, model.hidden_dim),
        model.W1.astype("<f4").tobytes(),
        model.b1.astype("<f4").tobytes(),
        model.w2.astype("<f4").tobytes(),
        struct.pack("<f", model.b2),
    ]
    return b"".join(parts)


def model_from_bytes(raw: bytes) -> ClassifierModel:
    if raw[: len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise FormatVersionError("bad model magic")
    off = len(MODEL_MAGIC)
    if len(raw) < off + 8:
        raise TruncatedPayloadError("model header truncated")
    P, hidden = struct.unpack_from("<II", raw, off)
    off += 8
    expected = (P * P * hidden + hidden + hidden + 1) * 4
    if len(raw) - off != expected:
        raise TruncatedPayloadError(f"expected {expected} parameter bytes, got {len(raw) - off}")
    flat = np.frombuffer(raw, dtype="<f4", offset=off)
    d = P * P
    W1 = flat[: hidden * d].reshape(hidden, d).astype(np.float64)
    b1 = flat[hidden * d : hidden * d + hidden].astype(np.float64)
    w2 = flat[hidden * d + hidden : hidden * d + 2 * hidden].astype(np.float64)
    b2 = float(flat[-1])
    return ClassifierModel(P, hidden, W1, b1, w2, b2)


def save_model(model: ClassifierModel, path: str | Path) -> None:
    Path(path).write_bytes(model_bytes(model))


def load_model(path: str | Path) -> ClassifierModel:
    return model_from_bytes(Path(path).read_bytes())
