"""Entropy-weighted fusion of the two logit branches and final prediction.

The two branches are combined convexly, each weighted by the *other* branch's
softmax entropy so the more confident branch dominates. A fixed-weight
variant (constant beta on the cache branch) exists as the tuning baseline;
beta = 0 reproduces the prompt branch exactly and beta = 1 the cache branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError


@dataclass
class FusionConfig:
    """Softmax temperature for the entropies, and optional fixed weighting.

    ``beta`` is None for adaptive (entropy-weighted) fusion, otherwise the
    constant weight on the recursive branch.
    """

    temperature: float = 0.01
    beta: float | None = None

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.beta is not None and not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")


@dataclass
class FusedResult:
    combined: np.ndarray  # (C,)
    weights: tuple[float, float]  # (w_adaptive, w_recursive), summing to 1
    entropies: tuple[float, float]  # (H_adaptive, H_recursive)
    prediction: int


def entropy(logits: np.ndarray, temperature: float) -> float:
    """Shannon entropy of softmax(logits / temperature), in nats.

    Uses the identity H = ln(S) - sum(q * z) / S over the max-shifted
    exponentials q = exp(z), S = sum(q): one exp pass, no vector log, no
    0 * log(0) corner, and exactly 0.0 when the softmax fully saturates.
    The result lies in [0, ln C] up to rounding.
    """
    z = np.asarray(logits, dtype=np.float64) / temperature
    z -= z.max()
    q = np.exp(z)
    s = q.sum()
    qz = (q * z).sum()
    return float(np.log(s) - qz / s)


def fuse(l_a: np.ndarray, l_r: np.ndarray, cfg: FusionConfig) -> FusedResult:
    """Convex combination of the two branches plus the final argmax.

    Adaptive mode weights each branch by the other's entropy; when both
    entropies vanish the split is the symmetric 0.5/0.5. The combined vector
    is clipped into the per-class envelope of the inputs, which rounding can
    otherwise overshoot by an ulp.
    """
    l_a = np.asarray(l_a, dtype=np.float64)
    l_r = np.asarray(l_r, dtype=np.float64)
    if l_a.shape != l_r.shape:
        raise DimensionMismatchError(f"logit shapes {l_a.shape} vs {l_r.shape}")
    h_a = entropy(l_a, cfg.temperature)
    h_r = entropy(l_r, cfg.temperature)
    if cfg.beta is not None:
        w_a = 1.0 - cfg.beta
    elif h_a + h_r == 0.0:
        w_a = 0.5
    else:
        w_a = h_r / (h_a + h_r)
    w_r = 1.0 - w_a
    combined = w_a * l_a + w_r * l_r
    np.clip(combined, np.minimum(l_a, l_r), np.maximum(l_a, l_r), out=combined)
    return FusedResult(
        combined=combined,
        weights=(w_a, w_r),
        entropies=(h_a, h_r),
        prediction=int(np.argmax(combined)),
    )
