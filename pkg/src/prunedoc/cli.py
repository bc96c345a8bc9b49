"""Batch command-line surface for the pruning pipeline.

Exit codes: 0 success, 2 usage/config error, 3 fully-pruned image,
4 IO failure, 5 degenerate data. Every run writes a JSON manifest so
corpus-level statistics stay reproducible from per-run records.
"""

from __future__ import annotations

import argparse
import glob as globmod
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import classifier, costmodel, labeler, maskops, oracle, pruner, synthdoc
from .errors import ConfigurationError, DegenerateDataError, ParseError, PrunedocError
from .imagegrid import GrayImage, extract_grid, load_image, save_png

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FULLY_PRUNED = 3
EXIT_IO = 4
EXIT_DEGENERATE = 5

MAX_WORKERS = 4


def _config_hash(command: str, flags: dict) -> str:
    canonical = json.dumps({"command": command, "flags": flags}, sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_manifest(path: Path, command: str, flags: dict, seed: int,
                    inputs: list, outputs: list, metrics: dict) -> None:
    manifest = {
        "command": command,
        "config_hash": _config_hash(command, flags),
        "seed": seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "metrics": metrics,
    }
    path.write_text(json.dumps(manifest, indent=1) + "\n")


def _resolve_seed(args) -> int:
    env = os.environ.get("PRUNEDOC_SEED")
    return int(env) if env is not None else args.seed


def _flags(args) -> dict:
    skip = {"func", "command"}
    return {k: v for k, v in vars(args).items() if k not in skip}


# -- synth -------------------------------------------------------------------


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = _resolve_seed(args)
    if args.spec:
        spec = synthdoc.SynthSpec(**json.loads(Path(args.spec).read_text()))
    elif args.mode == "receipt":
        spec = synthdoc.receipt_spec()
    else:
        spec = synthdoc.page_spec()

    def make(i: int):
        img, ann = synthdoc.generate(spec, seed + i)
        img_path = out / f"{args.mode}_{i:04d}.png"
        ann_path = out / f"{args.mode}_{i:04d}.json"
        save_png(img, img_path)
        labeler.save_annotations(ann, ann_path)
        return {"image": img_path.name, "annotation": ann_path.name, "seed": seed + i, "mode": args.mode}

    with ThreadPoolExecutor(max_workers=MAX_WORKERS) as pool:
        entries = list(pool.map(make, range(args.count)))

    corpus_manifest = out / "corpus.json"
    corpus_manifest.write_text(json.dumps({"entries": entries}, indent=1) + "\n")
    outputs = [corpus_manifest] + [out / e["image"] for e in entries] + [out / e["annotation"] for e in entries]
    _write_manifest(out / "run_manifest.json", "synth", _flags(args), seed, [],
                    outputs, {"count": args.count})
    return EXIT_OK


# -- train -------------------------------------------------------------------


def _load_corpus(corpus_dir: Path) -> list[tuple[GrayImage, labeler.AnnotationSet]]:
    manifest = corpus_dir / "corpus.json"
    if manifest.exists():
        entries = json.loads(manifest.read_text())["entries"]
        pairs = [(corpus_dir / e["image"], corpus_dir / e["annotation"]) for e in entries]
    else:
        pairs = []
        for img_path in sorted(corpus_dir.glob("*.png")):
            ann_path = img_path.with_suffix(".json")
            if ann_path.exists():
                pairs.append((img_path, ann_path))
    if not pairs:
        raise ConfigurationError(f"no image+annotation pairs under {corpus_dir}")
    with ThreadPoolExecutor(max_workers=MAX_WORKERS) as pool:
        return list(pool.map(lambda p: (load_image(p[0]), labeler.load_annotations(p[1])), pairs))


def cmd_train(args) -> int:
    seed = _resolve_seed(args)
    if args.patch_size < 1:
        raise ConfigurationError(f"patch size must be >= 1, got {args.patch_size}")
    corpus = _load_corpus(Path(args.corpus))
    data = labeler.build_dataset(corpus, args.patch_size, per_class_cap=args.cap, seed=seed)

    # seeded 10% holdout for validation metrics
    rng = np.random.default_rng(seed + 2)
    order = rng.permutation(len(data))
    n_val = max(1, len(data) // 10)
    val_idx, train_idx = order[:n_val], order[n_val:]
    train_data = classifier.PatchDataset(args.patch_size, data.pixels[train_idx], data.labels[train_idx])
    val_data = classifier.PatchDataset(args.patch_size, data.pixels[val_idx], data.labels[val_idx])

    cfg = classifier.TrainConfig(learning_rate=args.lr, batch_size=args.batch_size,
                                 epochs=args.epochs, seed=seed)
    model = classifier.train(train_data, cfg, hidden_dim=args.hidden)
    classifier.save_model(model, args.out)

    train_logits = classifier.forward_batch(model, train_data.pixels)
    val_logits = classifier.forward_batch(model, val_data.pixels)
    metrics = {
        "train_bce": classifier.bce_loss(train_logits, train_data.labels),
        "val_bce": classifier.bce_loss(val_logits, val_data.labels),
        "val_ap": classifier.average_precision(val_logits, val_data.labels),
        "n_train": len(train_data),
        "n_val": len(val_data),
    }
    _write_manifest(Path(args.out).with_suffix(".manifest.json"), "train", _flags(args),
                    seed, [args.corpus], [args.out], metrics)
    return EXIT_OK


# -- prune -------------------------------------------------------------------


def cmd_prune(args) -> int:
    seed = _resolve_seed(args)
    model = classifier.load_model(args.model)
    img = load_image(args.image)
    grid = extract_grid(img, model.patch_size)
    logits = classifier.classify_grid(model, grid)
    mask = maskops.dilate(maskops.threshold_logits(logits), args.pool)
    token_set = pruner.prune(grid, mask)
    if args.strategy != "preserved":
        token_set = pruner.reindex(token_set, args.strategy, seed)
    manifest_path, blob_path = pruner.save_tokens(token_set, args.out)
    metrics = {
        "L": len(token_set),
        "token_reduction": pruner.token_reduction(token_set),
    }
    _write_manifest(Path(str(args.out) + ".manifest.json"), "prune", _flags(args), seed,
                    [args.model, args.image], [manifest_path, blob_path], metrics)
    return EXIT_FULLY_PRUNED if len(token_set) == 0 else EXIT_OK


# -- stats -------------------------------------------------------------------


def cmd_stats(args) -> int:
    seed = _resolve_seed(args)
    paths = sorted(globmod.glob(args.tokens))
    if not paths:
        raise ConfigurationError(f"no token files match {args.tokens!r}")
    profile = costmodel.load_profile(args.profile)

    with ThreadPoolExecutor(max_workers=MAX_WORKERS) as pool:
        sets = list(pool.map(pruner.load_tokens, paths))

    per_file, fully_pruned = [], []
    for path, ts in zip(paths, sets):
        entry = {"file": path, "L": len(ts), "token_reduction": pruner.token_reduction(ts)}
        if len(ts) == 0:
            entry["score"] = 0
            fully_pruned.append(entry)
        else:
            entry.update(costmodel.reduction_report(profile, ts.grid_rows * ts.grid_cols, len(ts)))
            per_file.append(entry)
    report = {
        "profile": profile.name,
        "files": per_file,
        "fully_pruned": fully_pruned,
        "mean_token_reduction": float(np.mean([e["token_reduction"] for e in per_file + fully_pruned])),
        "mean_flops_reduction": (
            float(np.mean([e["flops_reduction"] for e in per_file])) if per_file else None
        ),
    }
    Path(args.out).write_text(json.dumps(report, indent=1) + "\n")
    _write_manifest(Path(args.out).with_suffix(".manifest.json"), "stats", _flags(args), seed,
                    paths, [args.out],
                    {"n_files": len(paths), "n_fully_pruned": len(fully_pruned)})
    return EXIT_OK


# -- overlay -----------------------------------------------------------------


def cmd_overlay(args) -> int:
    seed = _resolve_seed(args)
    token_set = pruner.load_tokens(args.tokens)
    img = load_image(args.image)
    grid = extract_grid(img, token_set.patch_size)
    canvas = (grid.source.data // 2).astype(np.uint8)  # dim everything 50%
    P = token_set.patch_size
    for r, c in zip(token_set.token_rows, token_set.token_cols):
        y, x = int(r) * P, int(c) * P
        canvas[y : y + P, x : x + P] = grid.source.data[y : y + P, x : x + P]
        canvas[y, x : x + P] = 0
        canvas[y + P - 1, x : x + P] = 0
        canvas[y : y + P, x] = 0
        canvas[y : y + P, x + P - 1] = 0
    save_png(GrayImage(canvas), args.out)
    _write_manifest(Path(str(args.out) + ".manifest.json"), "overlay", _flags(args), seed,
                    [args.image, args.tokens], [args.out], {"L": len(token_set)})
    return EXIT_OK


# -- oracle ------------------------------------------------------------------


def cmd_oracle(args) -> int:
    seed = _resolve_seed(args)
    try:
        rows, cols = (int(t) for t in args.grid.lower().split("x"))
    except ValueError:
        raise ConfigurationError(f"--grid must look like 8x8, got {args.grid!r}")
    if rows * cols < 2:
        raise ConfigurationError("grid must have at least 2 cells")
    if args.trials == 0:
        print("WARNING: 0 trials requested; laws pass vacuously")
        print("equivalence: PASS (vacuous)")
        print("divergence: PASS (vacuous)")
        return EXIT_OK

    eq = oracle.run_equivalence_trials(args.trials, seed, max_rows=rows, max_cols=cols)
    eq_ok = eq.all_passed
    print(f"equivalence: {'PASS' if eq_ok else 'FAIL'} "
          f"({eq.passed}/{eq.trials} trials, max abs deviation {eq.max_equiv_dev:.3e})")

    dv = oracle.run_divergence_trials(args.trials, seed + 1, max_rows=rows, max_cols=cols)
    dv_ok = all(rate >= 0.95 for rate in dv.divergence_rate.values())
    for strategy, rate in sorted(dv.divergence_rate.items()):
        skipped = dv.skipped.get(strategy, 0)
        print(f"  divergence[{strategy}]: rate {rate:.3f} (excluded {skipped} coinciding trials)")
    print(f"divergence: {'PASS' if dv_ok else 'FAIL'}")
    return EXIT_OK if eq_ok and dv_ok else 1


# -- entry -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prunedoc", description=__doc__)
    parser.add_argument("--config", default=None, help="JSON file supplying any flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--mode", choices=["page", "receipt"], default="page")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spec", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the patch classifier")
    p.add_argument("--corpus", required=True)
    p.add_argument("--patch-size", type=int, default=28)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--cap", type=int, default=10000)
    p.add_argument("--hidden", type=int, default=classifier.DEFAULT_HIDDEN)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=256)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("prune", help="prune one image to a PTOK1 token set")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--pool", type=int, default=3)
    p.add_argument("--strategy", choices=pruner.STRATEGIES, default="preserved")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output stem for .ptok.json/.ptok.bin")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("stats", help="aggregate token/FLOPs reductions")
    p.add_argument("--tokens", required=True, help="glob over .ptok.json manifests")
    p.add_argument("--profile", default="3b-like")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("overlay", help="render retained patches over the source image")
    p.add_argument("--image", required=True)
    p.add_argument("--tokens", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_overlay)

    p = sub.add_parser("oracle", help="run the index-preservation laws")
    p.add_argument("--grid", default="8x8")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)

    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Expand --config file.json into leading flag defaults for the subcommand."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    cfg_path = argv[i + 1]
    rest = argv[:i] + argv[i + 2 :]
    extra = []
    for key, value in json.loads(Path(cfg_path).read_text()).items():
        extra += [f"--{key.replace('_', '-')}", str(value)]
    # explicit flags win: argparse takes the last occurrence
    if rest and not rest[0].startswith("-"):
        return [rest[0]] + extra + rest[1:]
    return rest + extra


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigurationError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateDataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (OSError, FileNotFoundError) as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO
    except PrunedocError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
