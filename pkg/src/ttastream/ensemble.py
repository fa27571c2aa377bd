"""Per-sample prompt filtering and ensembling.

For each class, the T prompt embeddings are ranked by cosine similarity to the
incoming image embedding; the top fraction ``alpha`` is kept and averaged into
a single unit-norm class representation, whose similarity to the image is the
adaptive logit. The retained fraction is realized as a deterministic top-k
with k = max(1, round_half_up(alpha * T)) and ties broken toward the lower
template index, which makes runs reproducible and nests retained sets across
alpha values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEnsembleError, DimensionMismatchError
from .ete import PromptBank

DEGENERATE_SUM_THRESHOLD = 1e-12


@dataclass
class EnsembleConfig:
    """Retained fraction of prompts per class. 0.6 suits OOD-style streams,
    0.3 cross-domain-style ones."""

    alpha: float = 0.6

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")


@dataclass
class EnsembleResult:
    """Output of one adaptive step over all classes."""

    ensembled: np.ndarray  # (C, d) unit rows
    retained_indices: list[list[int]]  # per class, ascending template indices
    adaptive_logits: np.ndarray  # (C,)


def retained_count(alpha: float, num_templates: int) -> int:
    """k = max(1, round-half-up(alpha * T))."""
    return max(1, int(np.floor(alpha * num_templates + 0.5)))


def filter_prompts(class_embs: np.ndarray, v: np.ndarray, alpha: float) -> list[int]:
    """Indices of the top-k templates by similarity to ``v``, ascending.

    Ties go to the lower template index (stable sort on descending
    similarity), so retained sets nest as alpha grows.
    """
    T, d = class_embs.shape
    if v.shape != (d,):
        raise DimensionMismatchError(f"bank dim {d} vs query {v.shape}")
    k = retained_count(alpha, T)
    sims = class_embs @ v
    order = np.argsort(-sims, kind="stable")
    return sorted(int(i) for i in order[:k])


def ensemble_class(retained: np.ndarray) -> np.ndarray:
    """Normalized mean direction of a non-empty set of unit vectors.

    Raises:
        DegenerateEnsembleError: when the vectors cancel (antipodal prompts).
    """
    retained = np.atleast_2d(np.asarray(retained, dtype=np.float64))
    total = retained.sum(axis=0)
    norm = float(np.linalg.norm(total))
    if norm < DEGENERATE_SUM_THRESHOLD:
        raise DegenerateEnsembleError(
            f"retained embeddings sum to norm {norm:.3e}"
        )
    return total / norm


def adaptive_step(bank: PromptBank, v: np.ndarray, cfg: EnsembleConfig) -> EnsembleResult:
    """Filter, ensemble, and score every class against one image embedding."""
    C, T, d = bank.embeddings.shape
    if v.shape != (d,):
        raise DimensionMismatchError(f"bank dim {d} vs query {v.shape}")
    ensembled = np.empty((C, d))
    retained: list[list[int]] = []
    logits = np.empty(C)
    for i in range(C):
        idx = filter_prompts(bank.embeddings[i], v, cfg.alpha)
        try:
            w_bar = ensemble_class(bank.embeddings[i, idx])
        except DegenerateEnsembleError as exc:
            raise DegenerateEnsembleError(
                f"class {i}: {exc}", class_index=i
            ) from exc
        ensembled[i] = w_bar
        retained.append(idx)
        logits[i] = np.dot(w_bar, v)
    np.clip(logits, -1.0, 1.0, out=logits)
    return EnsembleResult(
        ensembled=ensembled, retained_indices=retained, adaptive_logits=logits
    )
