"""Index-preserving token selection and the PTOK1 interchange format.

Retained patches keep their original raster index ``row * cols + col`` under
the ``preserved`` strategy; the ``ordered`` / ``random`` / ``constant``
strategies exist to ablate what happens when that index is rewritten. Token
order in the sequence is always raster order of original position, so the
ablation variable is purely the index *values*.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    FormatVersionError,
    InvariantViolationError,
    StateError,
    TruncatedPayloadError,
)
from .imagegrid import PatchGrid, all_patch_pixels
from .maskops import BinaryMask

STRATEGIES = ("preserved", "ordered", "random", "constant")
PIXELS_MAGIC = b"PTOKPX1\x00"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class PrunedTokenSet:
    patch_size: int
    grid_rows: int
    grid_cols: int
    strategy: str
    assigned_indices: np.ndarray  # (L,) int64
    token_rows: np.ndarray  # (L,) int64, original grid row
    token_cols: np.ndarray  # (L,) int64, original grid col
    pixels: np.ndarray  # (L, P^2) uint8
    image_width: int
    image_height: int

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}")
        L = len(self.assigned_indices)
        if not (len(self.token_rows) == len(self.token_cols) == self.pixels.shape[0] == L):
            raise InvariantViolationError("token field lengths disagree")
        if L and self.pixels.shape[1] != self.patch_size**2:
            raise InvariantViolationError("pixel payload width != P^2")
        raster = self.token_rows * self.grid_cols + self.token_cols
        if np.any(np.diff(raster) <= 0):
            raise InvariantViolationError("tokens not in strictly ascending raster order")
        self._check_strategy(raster)

    def _check_strategy(self, raster: np.ndarray) -> None:
        idx = self.assigned_indices
        L = len(idx)
        area = self.grid_rows * self.grid_cols
        if self.strategy == "preserved" and not np.array_equal(idx, raster):
            raise InvariantViolationError("preserved strategy requires assigned == raster index")
        if self.strategy == "ordered" and not np.array_equal(idx, np.arange(L)):
            raise InvariantViolationError("ordered strategy requires indices 0..L-1")
        if self.strategy == "constant" and L and not np.all(idx == 0):
            raise InvariantViolationError("constant strategy requires all-zero indices")
        if self.strategy == "random":
            if len(np.unique(idx)) != L or (L and (idx.min() < 0 or idx.max() >= area)):
                raise InvariantViolationError("random strategy requires L distinct in-range indices")

    def __len__(self) -> int:
        return len(self.assigned_indices)

    def __eq__(self, other):
        if not isinstance(other, PrunedTokenSet):
            return NotImplemented
        return (
            (self.patch_size, self.grid_rows, self.grid_cols, self.strategy) ==
            (other.patch_size, other.grid_rows, other.grid_cols, other.strategy)
            and (self.image_width, self.image_height) == (other.image_width, other.image_height)
            and np.array_equal(self.assigned_indices, other.assigned_indices)
            and np.array_equal(self.token_rows, other.token_rows)
            and np.array_equal(self.token_cols, other.token_cols)
            and np.array_equal(self.pixels, other.pixels)
        )


def prune(grid: PatchGrid, mask: BinaryMask) -> PrunedTokenSet:
    """Select masked patches in raster order with their original indices.

    An all-zero mask yields a legal empty set (a fully pruned image).
    """
    if (mask.rows, mask.cols) != (grid.rows, grid.cols):
        raise ConfigurationError(
            f"mask {mask.rows}x{mask.cols} does not match grid {grid.rows}x{grid.cols}"
        )
    keep = mask.bits.reshape(-1).astype(bool)
    raster = np.flatnonzero(keep).astype(np.int64)
    return PrunedTokenSet(
        patch_size=grid.patch_size,
        grid_rows=grid.rows,
        grid_cols=grid.cols,
        strategy="preserved",
        assigned_indices=raster,
        token_rows=raster // grid.cols,
        token_cols=raster % grid.cols,
        pixels=all_patch_pixels(grid)[keep],
        image_width=grid.source.width,
        image_height=grid.source.height,
    )


def reindex(token_set: PrunedTokenSet, strategy: str, seed: int = 0) -> PrunedTokenSet:
    """Rewrite assigned indices per the ablation strategy; data untouched."""
    if strategy not in STRATEGIES:
        raise ConfigurationError(f"unknown strategy {strategy!r}")
    if token_set.strategy != "preserved":
        raise StateError("can only reindex from the preserved (ground-truth) strategy")
    L = len(token_set)
    if strategy == "preserved":
        return token_set
    if strategy == "ordered":
        idx = np.arange(L, dtype=np.int64)
    elif strategy == "constant":
        idx = np.zeros(L, dtype=np.int64)
    else:  # random: L distinct in-range values, seeded
        rng = np.random.default_rng(seed)
        idx = rng.permutation(token_set.grid_rows * token_set.grid_cols)[:L].astype(np.int64)
    return replace(token_set, strategy=strategy, assigned_indices=idx)


def token_reduction(token_set: PrunedTokenSet) -> float:
    """Percentage of grid patches dropped: 100 * (1 - L / grid area)."""
    area = token_set.grid_rows * token_set.grid_cols
    if area < 1:
        raise ConfigurationError("grid area must be positive")
    return 100.0 * (1.0 - len(token_set) / area)


# ---------------------------------------------------------------------------
# PTOK1 interchange: JSON manifest + sidecar pixel blob


def serialize(token_set: PrunedTokenSet, pixels_file: str = "tokens.ptok.bin") -> tuple[bytes, bytes]:
    """Encode as (manifest JSON bytes, pixel blob bytes)."""
    manifest = {
        "version": FORMAT_VERSION,
        "patch_size": token_set.patch_size,
        "grid_rows": token_set.grid_rows,
        "grid_cols": token_set.grid_cols,
        "image_width": token_set.image_width,
        "image_height": token_set.image_height,
        "strategy": token_set.strategy,
        "pixels_file": pixels_file,
        "tokens": [
            {"i": int(i), "r": int(r), "c": int(c)}
            for i, r, c in zip(token_set.assigned_indices, token_set.token_rows, token_set.token_cols)
        ],
    }
    blob = PIXELS_MAGIC + token_set.pixels.tobytes()
    return json.dumps(manifest, indent=1).encode("utf-8"), blob


def deserialize(manifest_bytes: bytes, blob: bytes) -> PrunedTokenSet:
    try:
        manifest = json.loads(manifest_bytes)
    except json.JSONDecodeError as e:
        raise FormatVersionError(f"manifest is not valid JSON: {e}") from e
    if not isinstance(manifest, dict) or manifest.get("version") != FORMAT_VERSION:
        raise FormatVersionError(f"unsupported manifest version {manifest.get('version')!r}")
    if blob[: len(PIXELS_MAGIC)] != PIXELS_MAGIC:
        raise FormatVersionError("bad pixel blob magic")
    try:
        P = int(manifest["patch_size"])
        tokens = manifest["tokens"]
        idx = np.array([t["i"] for t in tokens], dtype=np.int64)
        rows = np.array([t["r"] for t in tokens], dtype=np.int64)
        cols = np.array([t["c"] for t in tokens], dtype=np.int64)
    except (KeyError, TypeError) as e:
        raise InvariantViolationError(f"manifest missing field: {e}") from e
    L = len(tokens)
    body = blob[len(PIXELS_MAGIC) :]
    if len(body) != L * P * P:
        raise TruncatedPayloadError(f"pixel blob has {len(body)} bytes, expected {L * P * P}")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(L, P * P).copy()
    return PrunedTokenSet(
        patch_size=P,
        grid_rows=int(manifest["grid_rows"]),
        grid_cols=int(manifest["grid_cols"]),
        strategy=str(manifest["strategy"]),
        assigned_indices=idx,
        token_rows=rows,
        token_cols=cols,
        pixels=pixels,
        image_width=int(manifest["image_width"]),
        image_height=int(manifest["image_height"]),
    )


def save_tokens(token_set: PrunedTokenSet, stem: str | Path) -> tuple[Path, Path]:
    """Write ``<stem>.ptok.json`` and ``<stem>.ptok.bin``."""
    stem = Path(stem)
    manifest_path = stem.with_name(stem.name + ".ptok.json")
    blob_path = stem.with_name(stem.name + ".ptok.bin")
    manifest, blob = serialize(token_set, pixels_file=blob_path.name)
    manifest_path.write_bytes(manifest)
    blob_path.write_bytes(blob)
    return manifest_path, blob_path


def load_tokens(manifest_path: str | Path) -> PrunedTokenSet:
    manifest_path = Path(manifest_path)
    manifest_bytes = manifest_path.read_bytes()
    manifest = json.loads(manifest_bytes)
    blob_path = manifest_path.parent / manifest["pixels_file"]
    return deserialize(manifest_bytes, blob_path.read_bytes())
