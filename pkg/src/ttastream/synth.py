"""Synthetic benchmark generation on the unit sphere.

The generator models a domain shift directly: text prompts cluster around
class centroids, while image embeddings cluster around *rotated* copies of
those centroids. The cache branch then has something real to learn: images
sit tighter around the shifted centroids than the prompts predict, which is
exactly the regime the streaming engine is built for.

Everything is driven by one PCG64 generator per SynthSpec, so a given seed
always produces identical banks, streams, and files.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import SeparationInfeasibleError
from .ete import PromptBank, StreamArrays, write_prompt_bank, write_stream

# Rejection attempts per requested class direction before giving up.
MAX_REJECTION_FACTOR = 10_000


@dataclass(frozen=True)
class SynthSpec:
    """Geometry of one synthetic benchmark."""

    num_classes: int = 24
    dim: int = 10
    num_templates: int = 10
    num_samples: int = 1600
    class_separation: float = 0.5  # minimum pairwise centroid angle, radians
    prompt_spread: float = 0.25  # gaussian scale before re-normalization
    image_spread: float = 0.25
    domain_shift: float = 0.35  # rotation of image centroids, radians
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if min(self.prompt_spread, self.image_spread, self.domain_shift) < 0:
            raise ValueError("spreads and shift must be >= 0")


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _sample_centroids(rng: np.random.Generator, spec: SynthSpec) -> np.ndarray:
    """Rejection-sample class directions with a pairwise angular margin."""
    cos_margin = np.cos(spec.class_separation)
    chosen: list[np.ndarray] = []
    budget = MAX_REJECTION_FACTOR * spec.num_classes
    for _ in range(budget):
        cand = _unit_rows(rng.standard_normal(spec.dim))
        if not chosen or np.max(np.stack(chosen) @ cand) <= cos_margin:
            chosen.append(cand)
            if len(chosen) == spec.num_classes:
                return np.stack(chosen)
    raise SeparationInfeasibleError(
        f"placed {len(chosen)}/{spec.num_classes} classes at separation "
        f"{spec.class_separation} rad in dim {spec.dim} after {budget} attempts"
    )


def generate(spec: SynthSpec) -> tuple[PromptBank, StreamArrays]:
    """Build an in-memory bank and labeled stream for the given geometry."""
    rng = np.random.default_rng(spec.seed)
    C, T, d, n = spec.num_classes, spec.num_templates, spec.dim, spec.num_samples

    centroids = _sample_centroids(rng, spec)

    bank_rows = _unit_rows(
        centroids[:, None, :] + spec.prompt_spread * rng.standard_normal((C, T, d))
    )

    # Rotate each image centroid away from its text centroid inside a random
    # 2-plane through it; images will cluster around the rotated copy.
    image_centroids = np.empty_like(centroids)
    for i in range(C):
        g = rng.standard_normal(d)
        u = g - (g @ centroids[i]) * centroids[i]
        u /= np.linalg.norm(u)
        image_centroids[i] = (
            np.cos(spec.domain_shift) * centroids[i] + np.sin(spec.domain_shift) * u
        )

    labels = np.arange(n, dtype=np.int64) % C  # balanced up to the remainder
    rng.shuffle(labels)
    images = _unit_rows(
        image_centroids[labels] + spec.image_spread * rng.standard_normal((n, d))
    )

    bank = PromptBank(
        embeddings=bank_rows,
        class_names=[f"class_{i:03d}" for i in range(C)],
        template_texts=[f"template_{k:03d}" for k in range(T)],
    )
    stream = StreamArrays(embeddings=images, labels=labels)
    return bank, stream


def synth_generate(spec: SynthSpec, bank_path, stream_path) -> tuple[PromptBank, StreamArrays]:
    """Generate a benchmark and write conforming container files."""
    bank, stream = generate(spec)
    write_prompt_bank(bank, bank_path)
    write_stream(stream.embeddings, stream.labels, stream_path)
    return bank, stream


def contaminate_bank(bank: PromptBank, fraction: float, seed: int) -> PromptBank:
    """Replace a fraction of each class's templates with junk directions.

    Junk slots within a class share one random direction (plus a little
    scatter), the way repeated junk template text lands close together in a
    real embedding space once the class name is appended. The returned bank
    is a copy; the input is untouched.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    C, T, d = bank.embeddings.shape
    rows = bank.embeddings.copy()
    n_junk = int(round(fraction * T))
    for i in range(C):
        junk_dir = _unit_rows(rng.standard_normal(d))
        cols = rng.choice(T, size=n_junk, replace=False)
        rows[i, cols] = _unit_rows(
            junk_dir + 0.15 * rng.standard_normal((n_junk, d))
        )
    return PromptBank(
        embeddings=rows,
        class_names=list(bank.class_names),
        template_texts=list(bank.template_texts),
    )


# Named geometries used by the experiment suite. "standard" exercises the
# cache-size convergence story; "noise" uses tight clusters under a larger
# shift so cache quality, not query corruption, dominates; "junk" is the
# standard geometry at a length where the contaminated-bank alpha sweep is
# cheap to repeat across seeds.
BENCHMARKS: dict[str, SynthSpec] = {
    "standard": SynthSpec(),
    "junk": SynthSpec(num_samples=1000),
    "noise": SynthSpec(
        num_samples=1000,
        prompt_spread=0.15,
        image_spread=0.15,
        domain_shift=0.65,
    ),
}


def benchmark_spec(name: str, seed: int = 0) -> SynthSpec:
    """One of the named benchmark geometries, re-seeded."""
    try:
        base = BENCHMARKS[name]
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; options: {sorted(BENCHMARKS)}")
    return replace(base, seed=seed)
