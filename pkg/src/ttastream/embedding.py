"""Core numeric primitives: normalization and cosine similarity.

All vectors handled here are 1-d float64 numpy arrays. Unit-norm vectors are
the only currency of the rest of the package; raw (un-normalized) vectors must
pass through :func:`normalize` before they touch any similarity computation.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, ZeroVectorError

# Norms below this are treated as zero vectors (corrupt input, not noise).
ZERO_NORM_THRESHOLD = 1e-12

# Loaded rows whose norm deviates from 1 by more than this get re-normalized.
UNIT_NORM_TOLERANCE = 1e-5


def normalize(raw) -> np.ndarray:
    """Return ``raw / ||raw||_2`` as a float64 unit vector.

    Raises:
        ZeroVectorError: if ``||raw||_2`` is below ``ZERO_NORM_THRESHOLD``.
    """
    v = np.asarray(raw, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n < ZERO_NORM_THRESHOLD:
        raise ZeroVectorError(f"cannot normalize vector with norm {n:.3e}")
    return v / n


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit vectors, clamped to [-1, 1].

    The clamp guards downstream ``exp()`` calls and thresholds against the
    1 + epsilon artifacts of float arithmetic. Symmetric by construction:
    ``cosine(a, b) == cosine(b, a)`` exactly.
    """
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape {a.shape} vs {b.shape}")
    return float(np.clip(np.dot(a, b), -1.0, 1.0))
