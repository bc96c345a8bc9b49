"""Grayscale images, white padding, and the P x P patch lattice.

A document image is partitioned (not slid over) into non-overlapping P x P
patches; each patch carries the linear raster index ``row * cols + col``
that downstream pruning must preserve.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import MalformedInputError

WHITE = 255


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale raster; ``data`` is (height, width) uint8."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.dtype != np.uint8:
            raise MalformedInputError(f"expected 2-D uint8 array, got {arr.dtype} ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise MalformedInputError(f"empty image {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other):
        return isinstance(other, GrayImage) and np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class PatchGrid:
    """Binds a padded image to its P x P lattice with raster-order indices."""

    patch_size: int
    rows: int
    cols: int
    source: GrayImage
    pad_value: int = WHITE

    def __post_init__(self):
        if self.source.width != self.cols * self.patch_size:
            raise MalformedInputError("source width not cols * P")
        if self.source.height != self.rows * self.patch_size:
            raise MalformedInputError("source height not rows * P")

    @property
    def n_patches(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class Patch:
    row: int
    col: int
    index: int
    pixels: np.ndarray  # (P, P) uint8


def to_grayscale(rgb: np.ndarray) -> GrayImage:
    """Collapse interleaved 8-bit RGB to gray via BT.601 luma.

    Each output pixel is round(0.299 R + 0.587 G + 0.114 B), clamped to
    [0, 255]. Rounding is half-up for cross-platform determinism.
    """
    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise MalformedInputError(f"expected (H, W, 3) RGB array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise MalformedInputError("empty RGB raster")
    luma = (
        0.299 * arr[:, :, 0].astype(np.float64)
        + 0.587 * arr[:, :, 1].astype(np.float64)
        + 0.114 * arr[:, :, 2].astype(np.float64)
    )
    gray = np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)
    return GrayImage(gray)


def pad_to_multiple(img: GrayImage, patch_size: int, pad_value: int = WHITE) -> GrayImage:
    """Pad right/bottom with white so both dimensions divide by P.

    White is document background, so padded patches classify as background
    and never inflate retained-token counts. Idempotent on aligned images.
    """
    if patch_size < 1:
        raise MalformedInputError(f"patch_size must be >= 1, got {patch_size}")
    h, w = img.height, img.width
    new_h = -(-h // patch_size) * patch_size
    new_w = -(-w // patch_size) * patch_size
    if new_h == h and new_w == w:
        return img
    out = np.full((new_h, new_w), pad_value, dtype=np.uint8)
    out[:h, :w] = img.data
    return GrayImage(out)


def extract_grid(img: GrayImage, patch_size: int, pad_value: int = WHITE) -> PatchGrid:
    """Pad the image and bind it to its patch lattice."""
    padded = pad_to_multiple(img, patch_size, pad_value)
    return PatchGrid(
        patch_size=patch_size,
        rows=padded.height // patch_size,
        cols=padded.width // patch_size,
        source=padded,
        pad_value=pad_value,
    )


def patch_at(grid: PatchGrid, row: int, col: int) -> Patch:
    if not (0 <= row < grid.rows and 0 <= col < grid.cols):
        raise IndexError(f"patch ({row}, {col}) outside {grid.rows}x{grid.cols} grid")
    P = grid.patch_size
    pixels = grid.source.data[row * P : (row + 1) * P, col * P : (col + 1) * P].copy()
    return Patch(row=row, col=col, index=row * grid.cols + col, pixels=pixels)


def all_patch_pixels(grid: PatchGrid) -> np.ndarray:
    """All patches as a (rows*cols, P*P) uint8 array in raster order."""
    P = grid.patch_size
    blocks = grid.source.data.reshape(grid.rows, P, grid.cols, P)
    return blocks.transpose(0, 2, 1, 3).reshape(grid.rows * grid.cols, P * P).copy()


# ---------------------------------------------------------------------------
# image IO: PNG via Pillow, PGM (P5) as the bit-exact golden format


def load_image(path: str | Path) -> GrayImage:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return load_pgm(path)
    with Image.open(path) as im:
        if im.mode == "L":
            return GrayImage(np.asarray(im, dtype=np.uint8))
        rgb = im.convert("RGB")
        return to_grayscale(np.asarray(rgb, dtype=np.uint8))


def save_png(img: GrayImage, path: str | Path) -> None:
    Image.fromarray(img.data, mode="L").save(path, format="PNG")


def png_bytes(img: GrayImage) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img.data, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def save_pgm(img: GrayImage, path: str | Path) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.data.tobytes())


def load_pgm(path: str | Path) -> GrayImage:
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise MalformedInputError(f"{path}: not a P5 PGM")
    # header: magic, width, height, maxval, single whitespace, then raster
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MalformedInputError(f"{path}: truncated PGM header")
        fields.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise MalformedInputError(f"{path}: only maxval 255 supported, got {maxval}")
    data = raw[pos : pos + width * height]
    if len(data) != width * height:
        raise MalformedInputError(f"{path}: raster truncated")
    return GrayImage(np.frombuffer(data, dtype=np.uint8).reshape(height, width))
