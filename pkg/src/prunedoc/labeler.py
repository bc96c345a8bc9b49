"""Patch labeling from text bounding boxes and balanced dataset assembly.

A patch is foreground iff its rectangle has strictly positive intersection
area with at least one box; rectangles are half-open, so boxes that merely
touch a patch edge do not label it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .classifier import PatchDataset
from .errors import ConfigurationError, DegenerateDataError, MalformedInputError
from .imagegrid import GrayImage, PatchGrid, all_patch_pixels, extract_grid


@dataclass(frozen=True)
class TextBox:
    """Half-open pixel rectangle [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise MalformedInputError(f"empty box {self}")
        if self.x0 < 0 or self.y0 < 0:
            raise MalformedInputError(f"negative box coordinates {self}")


@dataclass(frozen=True)
class AnnotationSet:
    image_id: str
    boxes: tuple[TextBox, ...]


def label_patches(grid: PatchGrid, boxes: Iterable[TextBox]) -> np.ndarray:
    """(rows, cols) uint8 labels; 1 iff the patch overlaps any box.

    Boxes are clipped to the padded image; fully clipped boxes are ignored.
    """
    P = grid.patch_size
    labels = np.zeros((grid.rows, grid.cols), dtype=np.uint8)
    w, h = grid.source.width, grid.source.height
    for box in boxes:
        x0, y0 = max(box.x0, 0), max(box.y0, 0)
        x1, y1 = min(box.x1, w), min(box.y1, h)
        if x1 <= x0 or y1 <= y0:
            continue
        # patches with positive-area overlap span [x0//P, ceil(x1/P)) columns
        c0, c1 = x0 // P, -(-x1 // P)
        r0, r1 = y0 // P, -(-y1 // P)
        labels[r0:r1, c0:c1] = 1
    return labels


def build_dataset(
    corpus: Sequence[tuple[GrayImage, AnnotationSet]],
    patch_size: int,
    per_class_cap: int,
    seed: int = 0,
) -> PatchDataset:
    """Extract labeled patches from all images and cap each class.

    Subsampling is seeded and without replacement, so output is balanced
    whenever both classes reach the cap; fully deterministic given inputs.
    """
    if not corpus:
        raise ConfigurationError("corpus must contain at least one image")
    if per_class_cap < 1:
        raise ConfigurationError("per_class_cap must be >= 1")
    pixel_chunks, label_chunks = [], []
    for img, ann in corpus:
        grid = extract_grid(img, patch_size)
        pixel_chunks.append(all_patch_pixels(grid))
        label_chunks.append(label_patches(grid, ann.boxes).reshape(-1))
    pixels = np.concatenate(pixel_chunks)
    labels = np.concatenate(label_chunks)

    rng = np.random.default_rng(seed)
    kept = []
    for cls in (0, 1):
        members = np.flatnonzero(labels == cls)
        if members.size == 0:
            raise DegenerateDataError(f"class {cls} absent from corpus")
        take = min(per_class_cap, members.size)
        kept.append(rng.choice(members, size=take, replace=False))
    order = rng.permutation(np.concatenate(kept))
    return PatchDataset(patch_size=patch_size, pixels=pixels[order], labels=labels[order])


# annotation file: {"image": "name.png", "boxes": [[x0,y0,x1,y1], ...]}


def save_annotations(ann: AnnotationSet, path: str | Path) -> None:
    payload = {"image": ann.image_id, "boxes": [[b.x0, b.y0, b.x1, b.y1] for b in ann.boxes]}
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_annotations(path: str | Path) -> AnnotationSet:
    payload = json.loads(Path(path).read_text())
    boxes = tuple(TextBox(*map(int, b)) for b in payload["boxes"])
    return AnnotationSet(image_id=str(payload["image"]), boxes=boxes)
