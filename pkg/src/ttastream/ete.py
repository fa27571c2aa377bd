"""ETE binary container: prompt banks ("ETEB") and embedding streams ("ETES").

Layout is little-endian throughout.

Bank file::

    "ETEB" | version u32 | d u32 | C u32 | T u32
    | C*T*d float32, row-major (class-major, template-minor)
    | metadata_length u64 | UTF-8 JSON {"classes": [...], "templates": [...]}

Stream file::

    "ETES" | version u32 | d u32 | N u64 | N x (label i32, d float32)

Files store float32; everything is widened to float64 on load. Rows whose
norm deviates from 1 by more than the tolerance are re-normalized and counted
as warnings rather than rejected, since 32-bit encoder exports lose a little
precision. A label of -1 in a stream record means "unlabeled".
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from .embedding import UNIT_NORM_TOLERANCE, ZERO_NORM_THRESHOLD
from .errors import (
    BadMagicError,
    DimensionMismatchError,
    MetadataMismatchError,
    TruncatedFileError,
    TruncatedRecordError,
    VersionUnsupportedError,
    ZeroVectorError,
)

BANK_MAGIC = b"ETEB"
STREAM_MAGIC = b"ETES"
FORMAT_VERSION = 1

UNLABELED = -1


@dataclass
class PromptBank:
    """C x T matrix of unit-norm text embeddings plus class/template names.

    ``template_texts`` is a flat list of T strings for generic banks, or a
    list of C lists of T strings for class-specific banks.
    """

    embeddings: np.ndarray  # (C, T, d) float64
    class_names: list[str]
    template_texts: Union[list[str], list[list[str]]]
    renormalized: int = 0  # rows fixed up on load (warning count)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[2]

    @property
    def num_classes(self) -> int:
        return self.embeddings.shape[0]

    @property
    def num_templates(self) -> int:
        return self.embeddings.shape[1]

    def validate(self) -> None:
        C, T, _ = self.embeddings.shape
        if C < 2:
            raise MetadataMismatchError(f"bank needs at least 2 classes, got {C}")
        if T < 1:
            raise MetadataMismatchError(f"bank needs at least 1 template, got {T}")
        if len(self.class_names) != C:
            raise MetadataMismatchError(
                f"{len(self.class_names)} class names for {C} classes"
            )
        _check_template_texts(self.template_texts, C, T)


@dataclass
class StreamSample:
    """One test-time embedding: unit-norm vector, optional label, position."""

    embedding: np.ndarray  # (d,) float64
    label: int | None
    index: int


@dataclass
class StreamArrays:
    """Whole stream as bulk arrays; the fast path used by the run harness."""

    embeddings: np.ndarray  # (N, d) float64
    labels: np.ndarray  # (N,) int64, -1 where unlabeled
    renormalized: int = 0

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    def __iter__(self) -> Iterator[StreamSample]:
        for i in range(len(self)):
            lab = int(self.labels[i])
            yield StreamSample(
                embedding=self.embeddings[i],
                label=None if lab == UNLABELED else lab,
                index=i,
            )


def _check_template_texts(texts, C: int, T: int) -> None:
    if len(texts) > 0 and isinstance(texts[0], list):
        if len(texts) != C or any(len(row) != T for row in texts):
            raise MetadataMismatchError(
                f"class-specific template texts must be {C}x{T}"
            )
    elif len(texts) != T:
        raise MetadataMismatchError(f"{len(texts)} template texts for T={T}")


def _renormalize_rows(rows: np.ndarray, tolerance: float) -> int:
    """Fix unit norms in-place; returns how many rows needed fixing.

    Rows with (near-)zero norm cannot be repaired and indicate corruption.
    """
    norms = np.linalg.norm(rows, axis=-1)
    if np.any(norms < ZERO_NORM_THRESHOLD):
        raise ZeroVectorError("zero-norm row in file; input is corrupt")
    bad = np.abs(norms - 1.0) > tolerance
    n_bad = int(np.count_nonzero(bad))
    if n_bad:
        rows[bad] /= norms[bad][..., None]
    return n_bad


def _read_exact(f, n: int, what: str, path: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise TruncatedFileError(
            f"{path}: file ended while reading {what} "
            f"(wanted {n} bytes, got {len(buf)})"
        )
    return buf


def _read_header(f, magic: bytes, path: str) -> None:
    got = _read_exact(f, 4, "magic", path)
    if got != magic:
        raise BadMagicError(f"{path}: expected magic {magic!r}, found {got!r}")
    (version,) = struct.unpack("<I", _read_exact(f, 4, "version", path))
    if version != FORMAT_VERSION:
        raise VersionUnsupportedError(f"{path}: unsupported version {version}")


def load_prompt_bank(path, norm_tolerance: float = UNIT_NORM_TOLERANCE) -> PromptBank:
    """Read an ETEB file, widening rows to float64 and fixing stray norms."""
    path = str(path)
    with open(path, "rb") as f:
        _read_header(f, BANK_MAGIC, path)
        d, C, T = struct.unpack("<III", _read_exact(f, 12, "dimensions", path))
        if d == 0 or C < 2 or T < 1:
            raise MetadataMismatchError(f"{path}: bad header d={d} C={C} T={T}")
        raw = _read_exact(f, C * T * d * 4, "embedding rows", path)
        rows = (
            np.frombuffer(raw, dtype="<f4")
            .astype(np.float64)
            .reshape(C, T, d)
        )
        (meta_len,) = struct.unpack("<Q", _read_exact(f, 8, "metadata length", path))
        meta_raw = _read_exact(f, meta_len, "metadata", path)
    try:
        meta = json.loads(meta_raw.decode("utf-8"))
        classes = list(meta["classes"])
        templates = meta["templates"]
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise MetadataMismatchError(f"{path}: bad metadata block: {exc}") from exc
    if len(classes) != C:
        raise MetadataMismatchError(
            f"{path}: header says C={C} but metadata lists {len(classes)} classes"
        )
    _check_template_texts(templates, C, T)
    n_fixed = _renormalize_rows(rows, norm_tolerance)
    bank = PromptBank(
        embeddings=rows,
        class_names=classes,
        template_texts=templates,
        renormalized=n_fixed,
    )
    bank.validate()
    return bank


def write_prompt_bank(bank: PromptBank, path) -> None:
    """Write an ETEB file. Canonical metadata encoding, so write/load is stable."""
    bank.validate()
    C, T, d = bank.embeddings.shape
    meta = json.dumps(
        {"classes": bank.class_names, "templates": bank.template_texts},
        ensure_ascii=False,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(str(path), "wb") as f:
        f.write(BANK_MAGIC)
        f.write(struct.pack("<IIII", FORMAT_VERSION, d, C, T))
        f.write(np.ascontiguousarray(bank.embeddings, dtype="<f4").tobytes())
        f.write(struct.pack("<Q", len(meta)))
        f.write(meta)


def load_stream_arrays(path, norm_tolerance: float = UNIT_NORM_TOLERANCE) -> StreamArrays:
    """Read a whole ETES file into bulk arrays."""
    path = str(path)
    with open(path, "rb") as f:
        _read_header(f, STREAM_MAGIC, path)
        d, n = struct.unpack("<IQ", _read_exact(f, 12, "dimensions", path))
        if d == 0:
            raise MetadataMismatchError(f"{path}: zero embedding dimension")
        header_end = f.tell()
        payload = f.read()
    record_size = 4 + 4 * d
    if len(payload) < n * record_size:
        complete = len(payload) // record_size
        raise TruncatedRecordError(
            offset=header_end + len(payload), record_index=complete, path=path
        )
    payload = payload[: n * record_size]
    rec = np.frombuffer(payload, dtype=np.dtype([("label", "<i4"), ("vec", "<f4", (d,))]))
    embeddings = rec["vec"].astype(np.float64)
    labels = rec["label"].astype(np.int64)
    n_fixed = _renormalize_rows(embeddings, norm_tolerance) if n else 0
    return StreamArrays(embeddings=embeddings, labels=labels, renormalized=n_fixed)


def load_stream(path, norm_tolerance: float = UNIT_NORM_TOLERANCE) -> Iterator[StreamSample]:
    """Yield samples from an ETES file in file order."""
    return iter(load_stream_arrays(path, norm_tolerance))


def write_stream(embeddings: np.ndarray, labels, path) -> None:
    """Write an ETES file from (N, d) embeddings and per-sample labels.

    ``labels`` may contain None entries; those are stored as -1.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    n, d = embeddings.shape
    lab = np.array(
        [UNLABELED if l is None else int(l) for l in labels], dtype="<i4"
    )
    if len(lab) != n:
        raise DimensionMismatchError(f"{n} embeddings but {len(lab)} labels")
    rec = np.empty(n, dtype=np.dtype([("label", "<i4"), ("vec", "<f4", (d,))]))
    rec["label"] = lab
    rec["vec"] = embeddings.astype("<f4")
    with open(str(path), "wb") as f:
        f.write(STREAM_MAGIC)
        f.write(struct.pack("<IIQ", FORMAT_VERSION, d, n))
        f.write(rec.tobytes())
