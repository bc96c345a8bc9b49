"""End-to-end walkthrough: synthesize a page, train the patch classifier,
prune background tokens, and account for the FLOPs saved.

Run from the repo root after `pip install -e .`:

    python3 demos/pipeline_walkthrough.py
"""

import numpy as np

from prunedoc import classifier as clf
from prunedoc import costmodel, labeler, maskops, pruner, synthdoc
from prunedoc.imagegrid import extract_grid

# 1. a small synthetic corpus with ground-truth word boxes
spec = synthdoc.page_spec(width=620, height=877, margin=40)
corpus = [synthdoc.generate(spec, seed) for seed in range(3)]
print(f"generated {len(corpus)} pages, "
      f"{sum(len(a.boxes) for _, a in corpus)} word boxes total")

# 2. balanced patch dataset and a quick classifier (P=14 keeps this snappy)
P = 14
data = labeler.build_dataset(corpus, P, per_class_cap=2000, seed=0)
model = clf.train(data, clf.TrainConfig(epochs=5, seed=0), hidden_dim=64)
logits = clf.forward_batch(model, data.pixels)
print(f"trained {clf.param_count(P, 64):,}-parameter classifier, "
      f"training AP = {clf.average_precision(logits, data.labels):.3f}")

# 3. prune a fresh page: threshold logits, refine with 3x3 max-pooling
img, ann = synthdoc.generate(spec, seed=42)
grid = extract_grid(img, P)
raw = maskops.threshold_logits(clf.classify_grid(model, grid))
refined = maskops.dilate(raw, 3)
tokens = pruner.prune(grid, refined)
print(f"grid {grid.rows}x{grid.cols}: kept {len(tokens)} tokens, "
      f"token reduction {pruner.token_reduction(tokens):.1f}% "
      f"(raw mask would keep {int(raw.bits.sum())})")

# 4. what that buys at the pipeline level
report = costmodel.reduction_report(
    costmodel.BUILTIN_PROFILES["3b-like"], grid.n_patches, len(tokens))
print(f"3b-like profile: {report['flops_reduction']:.1f}% FLOPs reduction "
      f"for {report['token_reduction']:.1f}% fewer tokens")

# 5. ground-truth recall before/after refinement
gt = labeler.label_patches(grid, ann.boxes).astype(bool)
for name, mask in (("raw", raw), ("max-pooled", refined)):
    recall = (mask.bits.astype(bool) & gt).sum() / gt.sum()
    print(f"{name:>10} mask foreground recall: {recall:.3f}")
