"""Minimal writers for the ETE container format.

Deliberately self-contained: the format (magic, header, float32 rows,
JSON metadata) is the contract between this exporter and the consuming
engine, so it is spelled out here rather than imported from it.

Bank file::

    "ETEB" | version u32 = 1 | d u32 | C u32 | T u32
    | C*T*d float32 row-major | metadata_length u64
    | UTF-8 JSON {"classes": [...], "templates": [...]}

Stream file::

    "ETES" | version u32 = 1 | d u32 | N u64 | N x (label i32, d float32)

Little-endian throughout; label -1 marks an unlabeled sample.
"""

from __future__ import annotations

import json
import struct

import numpy as np

BANK_MAGIC = b"ETEB"
STREAM_MAGIC = b"ETES"
FORMAT_VERSION = 1
UNLABELED = -1


def write_bank_file(rows: np.ndarray, class_names, template_texts, path) -> None:
    """Write a (C, T, d) embedding array with its metadata."""
    rows = np.asarray(rows, dtype=np.float64)
    C, T, d = rows.shape
    if len(class_names) != C:
        raise ValueError(f"{len(class_names)} class names for C={C}")
    meta = json.dumps(
        {"classes": list(class_names), "templates": template_texts},
        ensure_ascii=False,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(str(path), "wb") as f:
        f.write(BANK_MAGIC)
        f.write(struct.pack("<IIII", FORMAT_VERSION, d, C, T))
        f.write(np.ascontiguousarray(rows, dtype="<f4").tobytes())
        f.write(struct.pack("<Q", len(meta)))
        f.write(meta)


def write_stream_file(embeddings: np.ndarray, labels, path) -> None:
    """Write (N, d) embeddings with per-sample labels (None -> -1)."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    n, d = embeddings.shape
    lab = np.array([UNLABELED if l is None else int(l) for l in labels], dtype="<i4")
    if len(lab) != n:
        raise ValueError(f"{n} embeddings but {len(lab)} labels")
    rec = np.empty(n, dtype=np.dtype([("label", "<i4"), ("vec", "<f4", (d,))]))
    rec["label"] = lab
    rec["vec"] = embeddings.astype("<f4")
    with open(str(path), "wb") as f:
        f.write(STREAM_MAGIC)
        f.write(struct.pack("<IIQ", FORMAT_VERSION, d, n))
        f.write(rec.tobytes())
