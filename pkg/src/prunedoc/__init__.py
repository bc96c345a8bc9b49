"""Document-image visual token pruning toolkit.

Pipeline: image -> P x P patch grid -> per-patch text/background logits ->
thresholded binary mask -> 3x3 max-pool refinement -> index-preserving
pruned token set -> FLOPs-reduction accounting. A seeded toy transformer
(`toyvit`) acts as an executable oracle for why original indices must be
preserved.
"""

__version__ = "0.1.0"
