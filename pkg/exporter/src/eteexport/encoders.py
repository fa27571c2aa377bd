"""Encoders that map prompt text and images into one embedding space.

Two families:

* ``SeededEncoder`` ("seeded/<dim>"): a fully deterministic stand-in.
  Text maps to a unit vector drawn from a SHA-256-seeded generator; images
  are downsampled, flattened, and pushed through a fixed random projection.
  No semantics, no downloads, bit-stable across platforms; exists so the
  full export/ingest pipeline can run and be tested offline.
* ``ClipEncoder``: any Hugging Face CLIP checkpoint (needs the ``clip``
  extra and network/cache access to load weights).
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

IMAGE_PATCH = 16  # seeded encoder downsamples to IMAGE_PATCH x IMAGE_PATCH RGB


class EncoderLoadError(Exception):
    """The requested encoder could not be constructed."""


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms < 1e-12):
        raise ValueError("encoder produced a zero vector")
    return x / norms


class SeededEncoder:
    """Deterministic hash-based text and projection-based image encoder."""

    def __init__(self, dim: int):
        if dim < 2:
            raise EncoderLoadError(f"seeded encoder needs dim >= 2, got {dim}")
        self.dim = dim
        proj_seed = hashlib.sha256(f"seeded-projection/{dim}".encode()).digest()
        rng = np.random.default_rng(np.frombuffer(proj_seed, dtype=np.uint64))
        self._projection = rng.standard_normal((dim, IMAGE_PATCH * IMAGE_PATCH * 3))

    def encode_texts(self, prompts: list[str]) -> np.ndarray:
        out = np.empty((len(prompts), self.dim))
        for i, prompt in enumerate(prompts):
            digest = hashlib.sha256(b"text\x00" + prompt.encode("utf-8")).digest()
            rng = np.random.default_rng(np.frombuffer(digest, dtype=np.uint64))
            out[i] = rng.standard_normal(self.dim)
        return _unit_rows(out)

    def encode_images(self, images) -> np.ndarray:
        """``images`` are PIL images; any mode, any size."""
        flat = np.empty((len(images), IMAGE_PATCH * IMAGE_PATCH * 3))
        for i, img in enumerate(images):
            small = img.convert("RGB").resize((IMAGE_PATCH, IMAGE_PATCH))
            flat[i] = (np.asarray(small, dtype=np.float64) / 255.0 - 0.5).ravel()
        return _unit_rows(flat @ self._projection.T)


class ClipEncoder:
    """Wrapper over a Hugging Face CLIP checkpoint."""

    def __init__(self, model_id: str):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise EncoderLoadError(
                f"model {model_id!r} needs the transformers/torch stack "
                f"(install the 'clip' extra): {exc}"
            ) from exc
        try:
            self._model = CLIPModel.from_pretrained(model_id)
            self._processor = CLIPProcessor.from_pretrained(model_id)
        except Exception as exc:
            raise EncoderLoadError(f"cannot load model {model_id!r}: {exc}") from exc
        self._model.eval()
        self._torch = torch
        self.dim = int(self._model.config.projection_dim)

    def encode_texts(self, prompts: list[str]) -> np.ndarray:
        torch = self._torch
        inputs = self._processor(text=prompts, return_tensors="pt", padding=True)
        with torch.no_grad():
            feats = self._model.get_text_features(**inputs)
        return _unit_rows(feats.double().cpu().numpy())

    def encode_images(self, images) -> np.ndarray:
        torch = self._torch
        inputs = self._processor(images=images, return_tensors="pt")
        with torch.no_grad():
            feats = self._model.get_image_features(**inputs)
        return _unit_rows(feats.double().cpu().numpy())


def get_encoder(model_id: str):
    """Resolve a model id: "seeded/<dim>" or a Hugging Face checkpoint."""
    match = re.fullmatch(r"seeded/(\d+)", model_id)
    if match:
        return SeededEncoder(int(match.group(1)))
    return ClipEncoder(model_id)
