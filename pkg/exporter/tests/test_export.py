import json
import struct

import numpy as np
import pytest
from PIL import Image

from eteexport import ExportManifest, export_bank, export_stream
from eteexport.cli import main
from eteexport.export import build_prompt


def make_images(root, per_class, classes=("ant", "bee"), seed=0):
    rng = np.random.default_rng(seed)
    for c in classes:
        (root / c).mkdir(parents=True)
        for i in range(per_class):
            arr = rng.integers(0, 256, (20, 20, 3), dtype=np.uint8)
            Image.fromarray(arr).save(root / c / f"img_{i:03d}.png")


class TestBuildPrompt:
    def test_appends_class_name(self):
        assert build_prompt("a photo of a", "cat") == "a photo of a cat"

    def test_placeholder_substitution(self):
        assert build_prompt("a sketch of a {} outdoors", "dog") == "a sketch of a dog outdoors"


class TestExportBank:
    def test_header_and_shape(self, tmp_path):
        manifest = ExportManifest(
            model_id="seeded/512",
            classes=["cat", "dog"],
            templates=["a photo of a", "a drawing of a"],
        )
        out = tmp_path / "bank.eteb"
        rows = export_bank(manifest, out)
        assert rows.shape == (2, 2, 512)
        np.testing.assert_allclose(np.linalg.norm(rows, axis=2), 1.0, atol=1e-12)
        blob = out.read_bytes()
        assert blob[:4] == b"ETEB"
        version, d, C, T = struct.unpack_from("<IIII", blob, 4)
        assert (version, d, C, T) == (1, 512, 2, 2)

    def test_repeated_template_gives_identical_rows(self, tmp_path):
        manifest = ExportManifest(
            model_id="seeded/32",
            classes=["cat", "dog"],
            templates=["a photo of a", "a photo of a"],
        )
        rows = export_bank(manifest, tmp_path / "b.eteb")
        np.testing.assert_array_equal(rows[:, 0, :], rows[:, 1, :])

    def test_class_specific_prompts(self, tmp_path):
        manifest = ExportManifest(
            model_id="seeded/16",
            classes=["cat", "dog"],
            class_prompts={
                "cat": ["the cat is small", "a feline"],
                "dog": ["the dog is loyal", "a canine"],
            },
        )
        out = tmp_path / "csp.eteb"
        export_bank(manifest, out)
        blob = out.read_bytes()
        (meta_len,) = struct.unpack_from("<Q", blob, 4 + 16 + 2 * 2 * 16 * 4)
        meta = json.loads(blob[-meta_len:].decode("utf-8"))
        assert meta["templates"] == [
            ["the cat is small", "a feline"],
            ["the dog is loyal", "a canine"],
        ]

    def test_uneven_class_prompts_rejected(self, tmp_path):
        manifest = ExportManifest(
            model_id="seeded/16",
            classes=["cat", "dog"],
            class_prompts={"cat": ["one"], "dog": ["one", "two"]},
        )
        with pytest.raises(ValueError):
            export_bank(manifest, tmp_path / "x.eteb")

    def test_empty_classes_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            export_bank(
                ExportManifest(model_id="seeded/8", classes=[], templates=["t"]),
                tmp_path / "x.eteb",
            )


class TestExportStream:
    def test_labeled_folders(self, tmp_path):
        root = tmp_path / "imgs"
        make_images(root, per_class=5)
        manifest = ExportManifest(
            model_id="seeded/32", classes=["ant", "bee"], image_root=root
        )
        out = tmp_path / "s.etes"
        written, skipped = export_stream(manifest, out)
        assert (written, skipped) == (10, 0)
        blob = out.read_bytes()
        assert blob[:4] == b"ETES"
        _, d, n = struct.unpack_from("<IIQ", blob, 4)
        assert (d, n) == (32, 10)
        labels = [
            struct.unpack_from("<i", blob, 20 + i * (4 + 4 * 32))[0] for i in range(10)
        ]
        assert labels == [0] * 5 + [1] * 5  # sorted path order: ant/* then bee/*

    def test_flat_folder_is_unlabeled(self, tmp_path):
        root = tmp_path / "flat"
        root.mkdir()
        rng = np.random.default_rng(1)
        for i in range(3):
            arr = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
            Image.fromarray(arr).save(root / f"{i}.png")
        manifest = ExportManifest(model_id="seeded/16", classes=[], image_root=root)
        out = tmp_path / "s.etes"
        export_stream(manifest, out)
        blob = out.read_bytes()
        labels = [
            struct.unpack_from("<i", blob, 20 + i * (4 + 4 * 16))[0] for i in range(3)
        ]
        assert labels == [-1, -1, -1]

    def test_undecodable_images_skipped_with_count(self, tmp_path):
        root = tmp_path / "imgs"
        make_images(root, per_class=2)
        (root / "ant" / "broken.png").write_bytes(b"not an image at all")
        manifest = ExportManifest(
            model_id="seeded/16", classes=["ant", "bee"], image_root=root
        )
        written, skipped = export_stream(manifest, tmp_path / "s.etes")
        assert (written, skipped) == (4, 1)

    def test_deterministic_bytes(self, tmp_path):
        root = tmp_path / "imgs"
        make_images(root, per_class=3)
        manifest = ExportManifest(
            model_id="seeded/24", classes=["ant", "bee"], image_root=root
        )
        export_stream(manifest, tmp_path / "a.etes")
        export_stream(manifest, tmp_path / "b.etes")
        assert (tmp_path / "a.etes").read_bytes() == (tmp_path / "b.etes").read_bytes()


class TestCli:
    def test_bank_and_stream_commands(self, tmp_path, capsys):
        (tmp_path / "templates.txt").write_text("a photo of a\na drawing of a\n")
        (tmp_path / "classes.txt").write_text("ant\nbee\n")
        root = tmp_path / "imgs"
        make_images(root, per_class=2)
        code = main([
            "export-bank", "--model", "seeded/16",
            "--templates", str(tmp_path / "templates.txt"),
            "--classes", str(tmp_path / "classes.txt"),
            "--out", str(tmp_path / "bank.eteb"),
        ])
        assert code == 0
        code = main([
            "export-stream", "--model", "seeded/16",
            "--images", str(root), "--out", str(tmp_path / "s.etes"),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "C=2 T=2 d=16" in out
        assert "4 records" in out

    def test_missing_prompt_source_exits_2(self, tmp_path, capsys):
        (tmp_path / "classes.txt").write_text("a\nb\n")
        code = main([
            "export-bank", "--model", "seeded/8",
            "--classes", str(tmp_path / "classes.txt"),
            "--out", str(tmp_path / "x.eteb"),
        ])
        assert code == 2
        capsys.readouterr()

    def test_unlabeled_flag(self, tmp_path, capsys):
        root = tmp_path / "imgs"
        make_images(root, per_class=1)
        code = main([
            "export-stream", "--model", "seeded/8", "--images", str(root),
            "--out", str(tmp_path / "u.etes"), "--unlabeled",
        ])
        assert code == 0
        capsys.readouterr()
        blob = (tmp_path / "u.etes").read_bytes()
        label = struct.unpack_from("<i", blob, 20)[0]
        assert label == -1
