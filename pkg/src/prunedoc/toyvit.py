"""Toy transformer oracle for index preservation.

Positional encoding is keyed on each token's original 2-D grid position, so
running only the retained tokens reproduces a masked full-sequence run
exactly when (and only when) original indices are preserved. All per-token
operations (layer norm, MLP) act independently per token and attention
masks non-retained keys, which makes the equivalence an algebraic identity
rather than an approximation.

Weights are seeded Gaussian and never trained; the oracle tests identity,
not task performance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import ConfigurationError, DegenerateDataError
from .imagegrid import PatchGrid, all_patch_pixels
from .maskops import BinaryMask
from .pruner import PrunedTokenSet

POS_MODES = ("learned_2d_table", "sinusoidal_2d")
LN_EPS = 1e-6


@dataclass(frozen=True)
class ToyViTConfig:
    layers: int = 2
    dim: int = 32
    heads: int = 4
    ffn: int = 64
    pos_mode: str = "learned_2d_table"
    patch_size: int = 4
    seed: int = 0

    def __post_init__(self):
        if min(self.layers, self.dim, self.heads, self.ffn, self.patch_size) < 1:
            raise ConfigurationError("all counts must be >= 1")
        if self.dim % self.heads != 0:
            raise ConfigurationError(f"dim {self.dim} not divisible by heads {self.heads}")
        if self.pos_mode not in POS_MODES:
            raise ConfigurationError(f"unknown pos_mode {self.pos_mode!r}")


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def _layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + LN_EPS) * gamma + beta


def _sinusoidal_2d(rows: int, cols: int, dim: int) -> np.ndarray:
    """Factored table: first half of dims encodes row, second half col."""
    half = dim // 2
    table = np.zeros((rows * cols, dim))
    r = np.repeat(np.arange(rows), cols)[:, None]
    c = np.tile(np.arange(cols), rows)[:, None]
    for part, coord, width in ((0, r, half), (half, c, dim - half)):
        freqs = np.exp(-np.log(10000.0) * np.arange(width) / max(width, 1))
        angles = coord * freqs[None, :]
        block = np.where(np.arange(width) % 2 == 0, np.sin(angles), np.cos(angles))
        table[:, part : part + width] = block
    return table


class ToyViT:
    """Seeded, untrained pre-norm transformer over one fixed grid shape."""

    def __init__(self, cfg: ToyViTConfig, grid_rows: int, grid_cols: int):
        if grid_rows < 1 or grid_cols < 1:
            raise ConfigurationError("grid must be non-empty")
        self.cfg = cfg
        self.grid_rows = grid_rows
        self.grid_cols = grid_cols
        rng = np.random.default_rng(cfg.seed)
        d, f, P = cfg.dim, cfg.ffn, cfg.patch_size

        self.W_embed = rng.normal(0, 1.0 / np.sqrt(P * P), size=(d, P * P))
        self.b_embed = 0.1 * rng.normal(size=d)
        if cfg.pos_mode == "learned_2d_table":
            self.pos_table = rng.normal(size=(grid_rows * grid_cols, d))
        else:
            self.pos_table = _sinusoidal_2d(grid_rows, grid_cols, d)

        self.blocks = []
        for _ in range(cfg.layers):
            blk = {
                "ln1_g": 1.0 + 0.1 * rng.normal(size=d),
                "ln1_b": 0.1 * rng.normal(size=d),
                "ln2_g": 1.0 + 0.1 * rng.normal(size=d),
                "ln2_b": 0.1 * rng.normal(size=d),
                "Wq": rng.normal(0, 1.0 / np.sqrt(d), size=(d, d)),
                "Wk": rng.normal(0, 1.0 / np.sqrt(d), size=(d, d)),
                "Wv": rng.normal(0, 1.0 / np.sqrt(d), size=(d, d)),
                "Wo": rng.normal(0, 1.0 / np.sqrt(d), size=(d, d)),
                "bq": 0.1 * rng.normal(size=d),
                "bk": 0.1 * rng.normal(size=d),
                "bv": 0.1 * rng.normal(size=d),
                "bo": 0.1 * rng.normal(size=d),
                "W1": rng.normal(0, 1.0 / np.sqrt(d), size=(f, d)),
                "b1": 0.1 * rng.normal(size=f),
                "W2": rng.normal(0, 1.0 / np.sqrt(f), size=(d, f)),
                "b2": 0.1 * rng.normal(size=d),
            }
            self.blocks.append(blk)

    # -- core ---------------------------------------------------------------

    def _embed(self, pixels: np.ndarray, indices: np.ndarray) -> np.ndarray:
        x = pixels.astype(np.float64) / 255.0
        return x @ self.W_embed.T + self.b_embed + self.pos_table[indices]

    def _attend(self, x: np.ndarray, blk: dict, key_keep: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Multi-head attention; keys where key_keep is False get -inf logits.

        Returns (output, attention) with attention shaped (heads, N, N).
        """
        n, d = x.shape
        heads = self.cfg.heads
        dh = d // heads
        q = (x @ blk["Wq"].T + blk["bq"]).reshape(n, heads, dh).transpose(1, 0, 2)
        k = (x @ blk["Wk"].T + blk["bk"]).reshape(n, heads, dh).transpose(1, 0, 2)
        v = (x @ blk["Wv"].T + blk["bv"]).reshape(n, heads, dh).transpose(1, 0, 2)
        logits = q @ k.transpose(0, 2, 1) / np.sqrt(dh)
        logits[:, :, ~key_keep] = -np.inf
        logits -= logits.max(axis=-1, keepdims=True)
        w = np.exp(logits)
        w /= w.sum(axis=-1, keepdims=True)
        out = (w @ v).transpose(1, 0, 2).reshape(n, d)
        return out @ blk["Wo"].T + blk["bo"], w

    def _run(self, x: np.ndarray, key_keep: np.ndarray, collect_attn: bool = False):
        attn = []
        for blk in self.blocks:
            a, w = self._attend(_layer_norm(x, blk["ln1_g"], blk["ln1_b"]), blk, key_keep)
            if collect_attn:
                attn.append(w)
            x = x + a
            h = _gelu(_layer_norm(x, blk["ln2_g"], blk["ln2_b"]) @ blk["W1"].T + blk["b1"])
            x = x + h @ blk["W2"].T + blk["b2"]
        return x, attn

    # -- public entry points ------------------------------------------------

    def forward_full_masked(self, grid: PatchGrid, mask: BinaryMask,
                            collect_attn: bool = False):
        """Embed every patch, mask non-retained keys, return retained outputs.

        Outputs are in raster order of the retained positions.
        """
        if (grid.rows, grid.cols) != (self.grid_rows, self.grid_cols):
            raise ConfigurationError("grid shape does not match model")
        if grid.patch_size != self.cfg.patch_size:
            raise ConfigurationError("grid patch size does not match model")
        if (mask.rows, mask.cols) != (grid.rows, grid.cols):
            raise ConfigurationError("mask shape does not match grid")
        keep = mask.bits.reshape(-1).astype(bool)
        if not keep.any():
            raise DegenerateDataError("empty retained set")
        n = grid.rows * grid.cols
        x = self._embed(all_patch_pixels(grid), np.arange(n))
        out, attn = self._run(x, keep, collect_attn)
        result = out[keep]
        return (result, attn) if collect_attn else result

    def forward_pruned(self, token_set: PrunedTokenSet, collect_attn: bool = False):
        """Embed only the retained tokens, with positions decoded from their
        assigned indices, and run full self-attention over them."""
        if (token_set.grid_rows, token_set.grid_cols) != (self.grid_rows, self.grid_cols):
            raise ConfigurationError("token set grid shape does not match model")
        if token_set.patch_size != self.cfg.patch_size:
            raise ConfigurationError("token set patch size does not match model")
        L = len(token_set)
        if L < 1:
            raise DegenerateDataError("empty token set")
        idx = token_set.assigned_indices
        if idx.min() < 0 or idx.max() >= self.grid_rows * self.grid_cols:
            raise ConfigurationError("assigned index out of grid range")
        x = self._embed(token_set.pixels, idx)
        out, attn = self._run(x, np.ones(L, dtype=bool), collect_attn)
        return (out, attn) if collect_attn else out
