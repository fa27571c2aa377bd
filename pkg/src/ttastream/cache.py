"""Cache state for the streaming engine.

Two implementations of the same idea live here:

* ``ClassStates``: the recursive contextual-embedding cache. Per class it
  keeps one running exponentially-weighted mean of routed image embeddings
  (``w_hat``) plus the accumulated exponential mass ``s``. Memory is O(C*d)
  no matter how long the stream runs.
* ``BoundedCache``: an explicit per-class store of embeddings scored by
  softmax cross-attention. With unbounded capacity it is the brute-force
  oracle the recursion must match; with small capacity it is the
  conventional limited-prototype baseline.

State mutation is single-writer and strictly sequential in stream order;
snapshots taken between steps are plain arrays and safe to share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _attention_weight(w_bar: np.ndarray, v: np.ndarray) -> float:
    """exp of the clamped similarity; the insertion weight of one sample."""
    x = float(w_bar @ v)
    return math.exp(-1.0 if x < -1.0 else (1.0 if x > 1.0 else x))


@dataclass(frozen=True)
class ClassState:
    """Recursive cache state of a single class (value-semantics view)."""

    w_hat: np.ndarray  # (d,), zero vector until first insert; not unit-norm
    s: float  # accumulated sum of exp(similarity) terms
    count: int  # samples absorbed


class ClassStates:
    """Recursive cache over all classes, stored as arrays for speed.

    The canonical per-class state is the (w_hat, s, count) triple; ``norms``
    and ``cold`` are derived caches kept in step with it so the per-sample
    readout is one matrix-vector product plus elementwise fixups, with no
    per-class norm recomputation. A cold class's ``norms`` slot holds the
    placeholder 1.0 so division is always safe; its readout value is
    discarded in favor of the fallback anyway.
    """

    def __init__(self, num_classes: int, dim: int):
        if num_classes < 2 or dim < 1:
            raise ValueError(f"need C >= 2 and d >= 1, got C={num_classes} d={dim}")
        self.w_hat = np.zeros((num_classes, dim))
        self.s = np.zeros(num_classes)
        self.count = np.zeros(num_classes, dtype=np.int64)
        self.norms = np.ones(num_classes)
        self.cold = np.ones(num_classes, dtype=bool)
        self._scratch = np.empty(dim)

    @property
    def num_classes(self) -> int:
        return self.w_hat.shape[0]

    @property
    def dim(self) -> int:
        return self.w_hat.shape[1]

    def state_of(self, i: int) -> ClassState:
        return ClassState(w_hat=self.w_hat[i].copy(), s=float(self.s[i]), count=int(self.count[i]))

    def memory_bytes(self) -> int:
        return (
            self.w_hat.nbytes
            + self.s.nbytes
            + self.count.nbytes
            + self.norms.nbytes
            + self.cold.nbytes
        )

    def update(self, i: int, w_bar: np.ndarray, v: np.ndarray) -> None:
        """Absorb one embedding into class ``i``; other classes untouched."""
        e = _attention_weight(w_bar, v)
        row = self.w_hat[i]
        if self.count[i] == 0:
            # (0 + e*v) / (0 + e) is exactly v; skip the rounding detour.
            row[...] = v
            self.s[i] = e
            self.cold[i] = False
        else:
            s_new = self.s[i] + e
            row *= self.s[i]
            np.multiply(v, e, out=self._scratch)
            row += self._scratch
            row /= s_new
            self.s[i] = s_new
        self.count[i] += 1
        self.norms[i] = math.sqrt(float(row @ row))


def init_states(num_classes: int, dim: int) -> ClassStates:
    """Fresh all-zero cache state: s = 0, w_hat = 0, count = 0 per class."""
    return ClassStates(num_classes, dim)


def pseudo_label(adaptive_logits: np.ndarray) -> int:
    """Argmax class index; ties resolve to the lowest index."""
    return int(np.argmax(adaptive_logits))


def recursive_update(state: ClassState, w_bar: np.ndarray, v: np.ndarray) -> ClassState:
    """Pure single-class update: weighted-mean absorption of ``v``.

    The weight is exp of the (clamped) similarity between the class's current
    ensembled prompt embedding and the incoming image embedding. A fresh
    state (s = 0) lands exactly on ``v``.
    """
    e = _attention_weight(w_bar, v)
    if state.count == 0:
        return ClassState(w_hat=np.array(v, dtype=np.float64), s=e, count=1)
    s_new = state.s + e
    w_new = (state.s * state.w_hat + e * v) / s_new
    return ClassState(w_hat=w_new, s=float(s_new), count=state.count + 1)


def recursive_logits(
    states: ClassStates, v: np.ndarray, fallback: np.ndarray
) -> np.ndarray:
    """Normalized similarity of each class cache to ``v``.

    Classes that never absorbed a sample have no direction to score, so they
    take the corresponding ``fallback`` entry (the sample's adaptive logit);
    before any evidence arrives the fused prediction then degenerates
    gracefully to the adaptive one.
    """
    out = states.w_hat @ v
    out /= states.norms
    np.copyto(out, fallback, where=states.cold)
    return np.clip(out, -1.0, 1.0)


@dataclass
class CacheEntry:
    embedding: np.ndarray  # (d,) unit-norm
    confidence: float
    arrival_index: int


@dataclass
class BoundedCache:
    """Per-class lists of stored embeddings with a shared capacity.

    ``capacity=None`` means unbounded (the oracle configuration). When full,
    the entry with the lowest confidence is evicted; confidence ties evict
    the oldest arrival, so a new equal-confidence entry displaces an old one.

    Modify contents through :func:`cache_insert`; it keeps a flat per-class
    array mirror of the embeddings so attention scoring does not restack the
    entry lists on every sample.
    """

    num_classes: int
    capacity: int | None = None
    entries: list[list[CacheEntry]] = field(default_factory=list)

    def __post_init__(self):
        if self.capacity is not None and self.capacity < 1:
            raise ValueError(f"capacity must be >= 1 or None, got {self.capacity}")
        if not self.entries:
            self.entries = [[] for _ in range(self.num_classes)]
        # Array mirror of the per-class embeddings; rows [0:_mirror_n[i]] of
        # _mirror[i] track entries[i] whenever _mirror_n[i] agrees with it.
        self._mirror: list[np.ndarray | None] = [None] * self.num_classes
        self._mirror_n: list[int] = [-1] * self.num_classes

    def size_of(self, i: int) -> int:
        return len(self.entries[i])

    def memory_bytes(self) -> int:
        return sum(e.embedding.nbytes + 16 for row in self.entries for e in row)

    def matrix(self, i: int) -> np.ndarray:
        """(n_i, d) array of class i's stored embeddings, list order."""
        row = self.entries[i]
        if self._mirror_n[i] != len(row):
            buf = np.empty((max(4, 2 * len(row)), row[0].embedding.shape[0]))
            buf[: len(row)] = np.stack([e.embedding for e in row])
            self._mirror[i] = buf
            self._mirror_n[i] = len(row)
        return self._mirror[i][: len(row)]

    def _append_fast(self, i: int, v: np.ndarray) -> None:
        # Keep the mirror valid on the pure-append path (no eviction).
        n = len(self.entries[i]) - 1  # rows mirrored before this insert
        buf = self._mirror[i]
        if self._mirror_n[i] == n and buf is not None and n < buf.shape[0]:
            buf[n] = v
            self._mirror_n[i] = n + 1
        else:
            self._mirror_n[i] = -1  # stale; matrix() rebuilds on demand


def cache_insert(
    cache: BoundedCache, class_index: int, v: np.ndarray, confidence: float
) -> BoundedCache:
    """Append an entry to one class, evicting per policy when over capacity."""
    row = cache.entries[class_index]
    row.append(
        CacheEntry(
            embedding=v,
            confidence=float(confidence),
            arrival_index=max((e.arrival_index for e in row), default=-1) + 1,
        )
    )
    if cache.capacity is not None and len(row) > cache.capacity:
        victim = min(range(len(row)), key=lambda j: (row[j].confidence, row[j].arrival_index))
        row.pop(victim)
        cache._mirror_n[class_index] = -1
    else:
        cache._append_fast(class_index, v)
    return cache


def cross_attention_logits(
    cache: BoundedCache,
    w_bar: np.ndarray,
    v: np.ndarray,
    fallback: np.ndarray,
) -> np.ndarray:
    """Score ``v`` against softmax-attention summaries of each class cache.

    For class i with stored embeddings V = [v_1; ...; v_n], the contextual
    embedding is sum_k v_k * exp(<w_bar_i, v_k>) / sum_k exp(<w_bar_i, v_k>),
    re-weighted with the *current* w_bar_i on every call; the logit is its
    normalized similarity to ``v``. Empty classes take the fallback entry.
    """
    C = cache.num_classes
    out = np.array(fallback, dtype=np.float64, copy=True)
    for i in range(C):
        if not cache.entries[i]:
            continue
        V = cache.matrix(i)
        weights = np.exp(np.clip(V @ w_bar[i], -1.0, 1.0))
        w_hat = weights @ V
        w_hat /= weights.sum()
        out[i] = np.dot(w_hat, v) / np.linalg.norm(w_hat)
    return np.clip(out, -1.0, 1.0)
