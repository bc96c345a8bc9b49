"""Deterministic synthetic document/receipt pages with ground-truth boxes.

Text is simulated as lines of dark stroke blobs grouped into words; every
word emits one TextBox covering its ink extent exactly. Glyphs are abstract
strokes, not fonts: the classifier needs texture contrast, not legibility,
and strokes keep generation bit-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .imagegrid import GrayImage
from .labeler import AnnotationSet, TextBox


@dataclass(frozen=True)
class SynthSpec:
    mode: str = "page"  # "page" | "receipt"
    width: int = 2481  # A4 at 300 DPI
    height: int = 3507
    margin: int = 150
    line_height: int = 48
    glyph_height: int = 32  # 12 pt at 300 DPI has ~30-35 px effective height
    glyph_width_range: tuple[int, int] = (14, 30)
    word_len_range: tuple[int, int] = (2, 8)
    word_gap: int = 34
    line_gap: int = 16
    noise_sigma: float = 4.0
    ink_intensity_range: tuple[int, int] = (10, 90)
    fill_ratio: float = 0.40

    def __post_init__(self):
        if self.mode not in ("page", "receipt"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if min(self.width, self.height, self.margin, self.line_height, self.glyph_height) < 1:
            raise ConfigurationError("all dimensions must be positive")
        if 2 * self.margin >= min(self.width, self.height):
            raise ConfigurationError("margins leave no drawable area")
        if self.glyph_height > self.line_height:
            raise ConfigurationError("glyph_height must fit in line_height")
        if not 0.0 <= self.fill_ratio <= 1.0:
            raise ConfigurationError("fill_ratio must be in [0, 1]")


def receipt_spec(**overrides) -> SynthSpec:
    """Narrow page with sparse lines and long vertical whitespace runs."""
    base = dict(
        mode="receipt",
        width=576,
        height=1800,
        margin=40,
        line_height=36,
        glyph_height=24,
        glyph_width_range=(10, 22),
        word_len_range=(2, 6),
        word_gap=24,
        line_gap=12,
        fill_ratio=0.30,
    )
    base.update(overrides)
    return SynthSpec(**base)


def page_spec(**overrides) -> SynthSpec:
    return SynthSpec(**overrides)


def generate(spec: SynthSpec, seed: int) -> tuple[GrayImage, AnnotationSet]:
    """White page + ink strokes + additive Gaussian noise; pure in (spec, seed)."""
    rng = np.random.default_rng(seed)
    canvas = np.full((spec.height, spec.width), 255.0)
    boxes: list[TextBox] = []

    y = spec.margin
    y_limit = spec.height - spec.margin - spec.line_height
    while y <= y_limit:
        populated = rng.random() < spec.fill_ratio
        if populated:
            boxes.extend(_draw_line(canvas, spec, rng, y))
        y += spec.line_height + spec.line_gap
        if spec.mode == "receipt" and populated and rng.random() < 0.35:
            # receipts carry long blank runs between printed sections
            y += int(rng.integers(2, 6)) * (spec.line_height + spec.line_gap)

    if spec.noise_sigma > 0:
        canvas += rng.normal(0.0, spec.noise_sigma, canvas.shape)
    img = GrayImage(np.clip(np.floor(canvas + 0.5), 0, 255).astype(np.uint8))
    return img, AnnotationSet(image_id=f"synth-{spec.mode}-{seed}", boxes=tuple(boxes))


def _draw_line(canvas: np.ndarray, spec: SynthSpec, rng: np.random.Generator, y: int) -> list[TextBox]:
    boxes = []
    x = spec.margin
    x_limit = spec.width - spec.margin
    while True:
        n_glyphs = int(rng.integers(spec.word_len_range[0], spec.word_len_range[1] + 1))
        widths = rng.integers(spec.glyph_width_range[0], spec.glyph_width_range[1] + 1, n_glyphs)
        word_w = int(widths.sum()) + 2 * (n_glyphs - 1)  # 2 px intra-word glyph gap
        if x + word_w > x_limit:
            break
        gh = spec.glyph_height + int(rng.integers(-2, 4))
        gh = max(1, min(gh, spec.line_height))
        y0 = y + (spec.line_height - gh) // 2
        gx = x
        for gw in widths:
            ink = int(rng.integers(spec.ink_intensity_range[0], spec.ink_intensity_range[1] + 1))
            canvas[y0 : y0 + gh, gx : gx + int(gw)] = ink
            gx += int(gw) + 2
        boxes.append(TextBox(x0=x, y0=y0, x1=x + word_w, y1=y0 + gh))
        x += word_w + spec.word_gap
    return boxes
