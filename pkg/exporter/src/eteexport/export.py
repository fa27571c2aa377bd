"""Bank and stream export pipelines."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .encoders import get_encoder
from .etewriter import write_bank_file, write_stream_file

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}
ENCODE_BATCH = 64


@dataclass
class ExportManifest:
    """What to encode and where to put it.

    ``templates`` is the generic template list; when ``class_prompts`` is
    set (class name -> list of prompts, all the same length) it overrides
    the template+name construction with explicit per-class prompt text.
    """

    model_id: str
    classes: list[str] = field(default_factory=list)
    templates: list[str] = field(default_factory=list)
    class_prompts: dict[str, list[str]] | None = None
    image_root: Path | None = None
    unlabeled: bool = False


def build_prompt(template: str, class_name: str) -> str:
    """Class name appended to the template; "{}" substitutes instead."""
    if "{}" in template:
        return template.format(class_name)
    return f"{template.rstrip()} {class_name}"


def _prompt_grid(manifest: ExportManifest) -> tuple[list[list[str]], object]:
    """Per-class prompt lists plus the metadata templates entry."""
    if manifest.class_prompts is not None:
        missing = [c for c in manifest.classes if c not in manifest.class_prompts]
        if missing:
            raise ValueError(f"class prompt file lacks entries for {missing}")
        grid = [list(manifest.class_prompts[c]) for c in manifest.classes]
        lengths = {len(row) for row in grid}
        if len(lengths) != 1:
            raise ValueError(f"per-class prompt lists differ in length: {sorted(lengths)}")
        return grid, grid
    grid = [
        [build_prompt(t, name) for t in manifest.templates]
        for name in manifest.classes
    ]
    return grid, list(manifest.templates)


def export_bank(manifest: ExportManifest, out_path) -> np.ndarray:
    """Encode every class prompt and write the bank file.

    Returns the (C, T, d) unit-row array that was written.
    """
    if not manifest.classes:
        raise ValueError("empty class list")
    if manifest.class_prompts is None and not manifest.templates:
        raise ValueError("empty template list")
    encoder = get_encoder(manifest.model_id)
    grid, meta_templates = _prompt_grid(manifest)
    C, T = len(grid), len(grid[0])
    flat = [p for row in grid for p in row]
    rows = encoder.encode_texts(flat).reshape(C, T, -1)
    write_bank_file(rows, manifest.classes, meta_templates, out_path)
    return rows


def _iter_image_paths(root: Path) -> list[Path]:
    return sorted(
        (p for p in root.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda p: p.relative_to(root).as_posix(),
    )


def _label_for(path: Path, root: Path, classes: list[str]) -> int | None:
    if path.parent == root:
        return None
    name = path.relative_to(root).parts[0]
    return classes.index(name) if name in classes else None


def export_stream(manifest: ExportManifest, out_path) -> tuple[int, int]:
    """Encode an image folder into a stream file, in sorted filename order.

    Labels come from first-level subfolder names matched against the
    manifest classes; a flat folder (or ``unlabeled=True``) produces
    label-free records. Undecodable images are logged and skipped.

    Returns (written, skipped).
    """
    root = Path(manifest.image_root)
    if not root.is_dir():
        raise FileNotFoundError(f"image root {root} is not a directory")
    encoder = get_encoder(manifest.model_id)

    images, labels = [], []
    skipped = 0
    for path in _iter_image_paths(root):
        try:
            with Image.open(path) as img:
                images.append(img.convert("RGB"))
        except (UnidentifiedImageError, OSError) as exc:
            log.warning("skipping %s: %s", path, exc)
            skipped += 1
            continue
        labels.append(
            None if manifest.unlabeled else _label_for(path, root, manifest.classes)
        )

    if images:
        chunks = [
            encoder.encode_images(images[i : i + ENCODE_BATCH])
            for i in range(0, len(images), ENCODE_BATCH)
        ]
        embeddings = np.concatenate(chunks, axis=0)
    else:
        embeddings = np.empty((0, encoder.dim))
    write_stream_file(embeddings, labels, out_path)
    if skipped:
        log.warning("skipped %d undecodable images", skipped)
    return len(images), skipped


def zero_shot_predictions(bank_rows: np.ndarray, embeddings: np.ndarray) -> np.ndarray:
    """The exporter's own zero-shot argmax: mean prompt per class,
    normalized, highest cosine wins. Used to cross-check the consuming
    engine ingests these files faithfully."""
    classifier = bank_rows.mean(axis=1)
    classifier /= np.linalg.norm(classifier, axis=1, keepdims=True)
    return np.argmax(embeddings @ classifier.T, axis=1)
