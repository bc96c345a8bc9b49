"""Binary foreground masks: logit thresholding and 3x3 max-pool refinement.

The refinement is stride-1, zero-padded, same-size output, i.e. binary
morphological dilation with a k x k structuring element. Stride 1 keeps the
grid resolution unchanged so patch indices stay in correspondence.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, DegenerateDataError, MalformedInputError


@dataclass(frozen=True)
class BinaryMask:
    """Per-patch foreground decision map; ``bits`` is (rows, cols) uint8 in {0,1}."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8)
        if arr.ndim != 2:
            raise MalformedInputError(f"mask must be 2-D, got ndim={arr.ndim}")
        if not np.isin(arr, (0, 1)).all():
            raise MalformedInputError("mask bits must be 0/1")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def cols(self) -> int:
        return self.bits.shape[1]

    def __eq__(self, other):
        return isinstance(other, BinaryMask) and np.array_equal(self.bits, other.bits)


def threshold_logits(logits: np.ndarray) -> BinaryMask:
    """Retain patches with logit strictly greater than zero; logit 0 drops."""
    arr = np.asarray(logits, dtype=np.float64)
    return BinaryMask((arr > 0).astype(np.uint8))


def dilate(mask: BinaryMask, k: int = 3) -> BinaryMask:
    """Max over the k x k window centered at each cell, zero-padded at borders."""
    if k < 1 or k % 2 == 0:
        raise ConfigurationError(f"kernel size must be odd and >= 1, got {k}")
    if k == 1:
        return mask
    out = ndimage.maximum_filter(mask.bits, size=k, mode="constant", cval=0)
    return BinaryMask(out)


def coverage_ratio(mask: BinaryMask) -> float:
    """Fraction of cells set; token reduction = 100 * (1 - coverage)."""
    n = mask.bits.size
    if n == 0:
        raise DegenerateDataError("zero-area mask")
    return float(np.count_nonzero(mask.bits)) / n


# text format used for golden files: "rows cols" then rows lines of 0/1


def save_mask(mask: BinaryMask, path: str | Path) -> None:
    lines = [f"{mask.rows} {mask.cols}"]
    lines += ["".join(str(b) for b in row) for row in mask.bits]
    Path(path).write_text("\n".join(lines) + "\n")


def load_mask(path: str | Path) -> BinaryMask:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise MalformedInputError(f"{path}: empty mask file")
    rows, cols = (int(t) for t in lines[0].split())
    body = lines[1 : 1 + rows]
    if len(body) != rows or any(len(line) != cols for line in body):
        raise MalformedInputError(f"{path}: mask body does not match {rows}x{cols}")
    bits = np.array([[int(ch) for ch in line] for line in body], dtype=np.uint8)
    return BinaryMask(bits)
