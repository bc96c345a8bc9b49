"""Analytic FLOPs model for an encoder + connector + decoder-prefill pipeline.

Per layer and sequence length n: projections 8 n d^2, attention score/value
4 n^2 d, MLP 4 n d f (multiply-accumulate counted as 2 FLOPs). Only
reduction *ratios* are meaningful here; absolute TFLOPs of any real model
are out of scope.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

from .errors import ConfigurationError


@dataclass(frozen=True)
class PipelineProfile:
    name: str
    vis_layers: int
    vis_dim: int
    vis_ffn: int
    vis_heads: int
    merge_factor: int  # connector groups this many patches per decoder token
    llm_layers: int
    llm_dim: int
    llm_ffn: int
    text_tokens: int  # assumed prompt length for prefill

    def __post_init__(self):
        counts = (self.vis_layers, self.vis_dim, self.vis_ffn, self.vis_heads,
                  self.merge_factor, self.llm_layers, self.llm_dim, self.llm_ffn)
        if any(c < 1 for c in counts):
            raise ConfigurationError("all profile counts must be >= 1")
        if self.text_tokens < 0:
            raise ConfigurationError("text_tokens must be >= 0")


# Plausible placeholders shaped like small/large VLM hosts; dims are
# editable defaults, not claims about any particular released model.
BUILTIN_PROFILES = {
    "3b-like": PipelineProfile(
        name="3b-like", vis_layers=32, vis_dim=1280, vis_ffn=3420, vis_heads=16,
        merge_factor=4, llm_layers=36, llm_dim=2048, llm_ffn=11008, text_tokens=64,
    ),
    "7b-like": PipelineProfile(
        name="7b-like", vis_layers=32, vis_dim=1280, vis_ffn=3420, vis_heads=16,
        merge_factor=4, llm_layers=28, llm_dim=3584, llm_ffn=18944, text_tokens=64,
    ),
}


def _layer_flops(n: float, d: int, f: int) -> float:
    return 8.0 * n * d * d + 4.0 * n * n * d + 4.0 * n * d * f


def flops_encoder(profile: PipelineProfile, n_patches: float) -> float:
    """Vision tower forward FLOPs for n_patches tokens."""
    if n_patches < 0:
        raise ConfigurationError("n_patches must be >= 0")
    return profile.vis_layers * _layer_flops(n_patches, profile.vis_dim, profile.vis_ffn)


def flops_decoder_prefill(profile: PipelineProfile, n_visual: float, n_text: float) -> float:
    """Decoder prefill FLOPs over the concatenated visual + text sequence."""
    if n_visual < 0 or n_text < 0:
        raise ConfigurationError("token counts must be >= 0")
    n = n_visual + n_text
    return profile.llm_layers * _layer_flops(n, profile.llm_dim, profile.llm_ffn)


def pipeline_flops(profile: PipelineProfile, n_patches: float) -> float:
    # exact division by merge_factor (not ceiling) keeps the reduction
    # ratio a pure function of the retained fraction
    n_visual = n_patches / profile.merge_factor
    return flops_encoder(profile, n_patches) + flops_decoder_prefill(
        profile, n_visual, profile.text_tokens
    )


def reduction_report(profile: PipelineProfile, n_total_patches: int, n_retained_patches: int) -> dict:
    """Token and FLOPs reduction percentages for one image."""
    if n_total_patches < 1 or not 0 <= n_retained_patches <= n_total_patches:
        raise ConfigurationError("need 0 <= retained <= total, total >= 1")
    r = n_retained_patches / n_total_patches
    original = pipeline_flops(profile, n_total_patches)
    pruned = pipeline_flops(profile, n_retained_patches)
    return {
        "token_reduction": 100.0 * (1.0 - r),
        "flops_reduction": 100.0 * (1.0 - pruned / original),
    }


def save_profile(profile: PipelineProfile, path: str | Path) -> None:
    Path(path).write_text(json.dumps(asdict(profile), indent=1) + "\n")


def load_profile(name_or_path: str | Path) -> PipelineProfile:
    """Resolve a built-in profile name or a JSON profile file."""
    if str(name_or_path) in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[str(name_or_path)]
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigurationError(f"unknown profile {name_or_path!r}")
    payload = json.loads(path.read_text())
    try:
        return PipelineProfile(**payload)
    except TypeError as e:
        raise ConfigurationError(f"bad profile file {path}: {e}") from e
