"""Container format: round-trips, renormalization policy, error reporting."""

import struct

import numpy as np
import pytest

from ttastream import (
    BadMagicError,
    MetadataMismatchError,
    PromptBank,
    TruncatedFileError,
    TruncatedRecordError,
    VersionUnsupportedError,
    load_prompt_bank,
    load_stream,
    load_stream_arrays,
    write_prompt_bank,
    write_stream,
)


def small_bank():
    return PromptBank(
        embeddings=np.array([[[1.0, 0.0]], [[0.0, 1.0]]]),
        class_names=["a", "b"],
        template_texts=["t0"],
    )


def test_bank_round_trip(tmp_path):
    path = tmp_path / "bank.eteb"
    write_prompt_bank(small_bank(), path)
    bank = load_prompt_bank(path)
    assert bank.num_classes == 2 and bank.num_templates == 1 and bank.dim == 2
    np.testing.assert_array_equal(bank.embeddings, small_bank().embeddings)
    assert bank.class_names == ["a", "b"]
    assert bank.template_texts == ["t0"]
    assert bank.renormalized == 0


def test_bank_write_load_write_byte_identical(tmp_path):
    rng = np.random.default_rng(0)
    rows = rng.standard_normal((3, 4, 8))
    rows /= np.linalg.norm(rows, axis=-1, keepdims=True)
    bank = PromptBank(
        embeddings=rows,
        class_names=["x", "y", "z"],
        template_texts=[f"t{i}" for i in range(4)],
    )
    p1, p2 = tmp_path / "one.eteb", tmp_path / "two.eteb"
    write_prompt_bank(bank, p1)
    write_prompt_bank(load_prompt_bank(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_bank_renormalizes_bad_rows_once(tmp_path):
    bank = small_bank()
    bank.embeddings[0, 0] = [3.0, 4.0]  # norm 5
    p1, p2, p3 = (tmp_path / f"{i}.eteb" for i in range(3))
    write_prompt_bank(bank, p1)
    loaded = load_prompt_bank(p1)
    assert loaded.renormalized == 1
    np.testing.assert_allclose(loaded.embeddings[0, 0], [0.6, 0.8], atol=1e-7)
    # after the fix-up pass the round trip is idempotent
    write_prompt_bank(loaded, p2)
    again = load_prompt_bank(p2)
    assert again.renormalized == 0
    write_prompt_bank(again, p3)
    assert p2.read_bytes() == p3.read_bytes()


def test_bank_bad_magic(tmp_path):
    path = tmp_path / "bad.eteb"
    path.write_bytes(b"XXXX" + b"\x00" * 64)
    with pytest.raises(BadMagicError):
        load_prompt_bank(path)


def test_bank_bad_version(tmp_path):
    path = tmp_path / "v9.eteb"
    path.write_bytes(b"ETEB" + struct.pack("<I", 9) + b"\x00" * 64)
    with pytest.raises(VersionUnsupportedError):
        load_prompt_bank(path)


def test_bank_truncated(tmp_path):
    src = tmp_path / "ok.eteb"
    write_prompt_bank(small_bank(), src)
    data = src.read_bytes()
    cut = tmp_path / "cut.eteb"
    cut.write_bytes(data[: 4 + 4 + 12 + 5])  # mid embedding block
    with pytest.raises(TruncatedFileError):
        load_prompt_bank(cut)


def test_bank_metadata_class_count_mismatch(tmp_path):
    src = tmp_path / "ok.eteb"
    write_prompt_bank(small_bank(), src)
    data = bytearray(src.read_bytes())
    meta = b'{"classes":["a"],"templates":["t0"]}'
    body_end = 4 + 4 + 12 + 2 * 1 * 2 * 4
    patched = bytes(data[:body_end]) + struct.pack("<Q", len(meta)) + meta
    bad = tmp_path / "bad.eteb"
    bad.write_bytes(patched)
    with pytest.raises(MetadataMismatchError):
        load_prompt_bank(bad)


def test_bank_class_specific_template_texts(tmp_path):
    bank = PromptBank(
        embeddings=small_bank().embeddings,
        class_names=["a", "b"],
        template_texts=[["a prompt"], ["b prompt"]],
    )
    path = tmp_path / "csp.eteb"
    write_prompt_bank(bank, path)
    assert load_prompt_bank(path).template_texts == [["a prompt"], ["b prompt"]]


def test_bank_zero_row_is_corrupt(tmp_path):
    from ttastream import ZeroVectorError

    bank = small_bank()
    bank.embeddings[1, 0] = [0.0, 0.0]
    path = tmp_path / "zero.eteb"
    write_prompt_bank(bank, path)
    with pytest.raises(ZeroVectorError):
        load_prompt_bank(path)


def test_bank_custom_tolerance(tmp_path):
    bank = small_bank()
    bank.embeddings[1, 0] = [0.0, 1.0 + 5e-5]  # off by 5e-5
    path = tmp_path / "tol.eteb"
    write_prompt_bank(bank, path)
    assert load_prompt_bank(path, norm_tolerance=1e-5).renormalized == 1
    assert load_prompt_bank(path, norm_tolerance=1e-4).renormalized == 0


def test_stream_round_trip(tmp_path):
    path = tmp_path / "s.etes"
    write_stream(np.array([[0.0, 1.0]]), [0], path)
    samples = list(load_stream(path))
    assert len(samples) == 1
    assert samples[0].label == 0
    assert samples[0].index == 0
    np.testing.assert_array_equal(samples[0].embedding, [0.0, 1.0])


def test_stream_empty(tmp_path):
    path = tmp_path / "empty.etes"
    write_stream(np.empty((0, 3)), [], path)
    assert list(load_stream(path)) == []
    assert len(load_stream_arrays(path)) == 0


def test_stream_unlabeled_sentinel(tmp_path):
    path = tmp_path / "u.etes"
    write_stream(np.array([[1.0, 0.0], [0.0, 1.0]]), [None, 1], path)
    samples = list(load_stream(path))
    assert samples[0].label is None
    assert samples[1].label == 1
    arrays = load_stream_arrays(path)
    assert arrays.labels.tolist() == [-1, 1]


def test_stream_truncated_record_offset(tmp_path):
    path = tmp_path / "full.etes"
    write_stream(np.array([[1.0, 0.0], [0.0, 1.0]]), [0, 1], path)
    data = path.read_bytes()
    cut_at = len(data) - 6  # inside the second record's vector
    cut = tmp_path / "cut.etes"
    cut.write_bytes(data[:cut_at])
    with pytest.raises(TruncatedRecordError) as err:
        load_stream_arrays(cut)
    assert err.value.offset == cut_at
    assert err.value.record_index == 1


def test_stream_round_trip_bytes(tmp_path):
    rng = np.random.default_rng(5)
    emb = rng.standard_normal((17, 6))
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    labels = [int(x) for x in rng.integers(-1, 4, size=17)]
    p1, p2 = tmp_path / "a.etes", tmp_path / "b.etes"
    write_stream(emb, labels, p1)
    arrays = load_stream_arrays(p1)
    write_stream(arrays.embeddings, arrays.labels, p2)
    assert p1.read_bytes() == p2.read_bytes()
