"""Randomized trial harness around the toy transformer oracle.

Two laws are exercised:

* equivalence — a pruned-sequence run with preserved indices matches the
  masked full-sequence run elementwise;
* divergence — rewriting indices (constant / random / ordered) changes the
  outputs whenever at least one token's index actually differs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .imagegrid import GrayImage, extract_grid
from .maskops import BinaryMask
from .pruner import prune, reindex
from .toyvit import ToyViT, ToyViTConfig, POS_MODES

REL_TOL = 1e-5
ABS_FLOOR = 1e-7
DIVERGENCE_THRESHOLD = 1e-3


@dataclass
class TrialReport:
    trials: int = 0
    passed: int = 0
    max_equiv_dev: float = 0.0
    divergence_rate: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return self.passed == self.trials


def _random_setup(rng: np.random.Generator, max_rows: int, max_cols: int):
    rows = int(rng.integers(1, max_rows + 1))
    cols = int(rng.integers(1, max_cols + 1))
    if rows * cols < 2:
        cols = 2
    P = int(rng.integers(2, 5))
    cfg = ToyViTConfig(
        layers=int(rng.integers(1, 4)),
        dim=int(rng.choice([16, 32])),
        heads=int(rng.choice([2, 4])),
        ffn=int(rng.choice([16, 48])),
        pos_mode=str(rng.choice(POS_MODES)),
        patch_size=P,
        seed=int(rng.integers(0, 2**31)),
    )
    img = GrayImage(rng.integers(0, 256, size=(rows * P, cols * P), dtype=np.uint8))
    grid = extract_grid(img, P)
    bits = rng.integers(0, 2, size=(rows, cols), dtype=np.uint8)
    if not bits.any():
        bits.flags.writeable = True
        bits[rng.integers(rows), rng.integers(cols)] = 1
    mask = BinaryMask(bits)
    model = ToyViT(cfg, rows, cols)
    return model, grid, mask


def run_equivalence_trials(trials: int, seed: int = 0, max_rows: int = 8, max_cols: int = 8) -> TrialReport:
    """Preserved-index pruned run vs masked full run, elementwise."""
    rng = np.random.default_rng(seed)
    report = TrialReport(trials=trials)
    for _ in range(trials):
        model, grid, mask = _random_setup(rng, max_rows, max_cols)
        full = model.forward_full_masked(grid, mask)
        pruned = model.forward_pruned(prune(grid, mask))
        report.max_equiv_dev = max(report.max_equiv_dev, float(np.abs(full - pruned).max()))
        if np.allclose(pruned, full, rtol=REL_TOL, atol=ABS_FLOOR):
            report.passed += 1
    return report


def run_divergence_trials(trials: int, seed: int = 0, max_rows: int = 8, max_cols: int = 8) -> TrialReport:
    """Fraction of generic trials where each rewrite strategy visibly diverges.

    Trials where a strategy coincides with preserved indices by construction
    (e.g. ordered on a prefix mask) are excluded from that strategy's rate.
    """
    rng = np.random.default_rng(seed)
    report = TrialReport(trials=trials)
    diverged = {s: 0 for s in ("constant", "random", "ordered")}
    counted = {s: 0 for s in diverged}
    for _ in range(trials):
        model, grid, mask = _random_setup(rng, max_rows, max_cols)
        base_set = prune(grid, mask)
        base_out = model.forward_pruned(base_set)
        for strategy in diverged:
            rewritten = reindex(base_set, strategy, seed=int(rng.integers(0, 2**31)))
            if np.array_equal(rewritten.assigned_indices, base_set.assigned_indices):
                report.skipped[strategy] = report.skipped.get(strategy, 0) + 1
                continue
            counted[strategy] += 1
            dev = float(np.abs(model.forward_pruned(rewritten) - base_out).max())
            if dev > DIVERGENCE_THRESHOLD:
                diverged[strategy] += 1
        report.passed += 1
    report.divergence_rate = {
        s: (diverged[s] / counted[s] if counted[s] else 1.0) for s in diverged
    }
    return report
