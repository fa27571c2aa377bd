"""Synthetic benchmark generator."""

import numpy as np
import pytest

from ttastream import (
    RunConfig,
    SeparationInfeasibleError,
    SynthSpec,
    benchmark_spec,
    contaminate_bank,
    generate,
    load_prompt_bank,
    load_stream_arrays,
    run_stream,
    synth_generate,
)


def test_same_seed_identical_files(tmp_path):
    spec = SynthSpec(num_classes=5, dim=8, num_templates=4, num_samples=60, seed=3)
    synth_generate(spec, tmp_path / "b1", tmp_path / "s1")
    synth_generate(spec, tmp_path / "b2", tmp_path / "s2")
    assert (tmp_path / "b1").read_bytes() == (tmp_path / "b2").read_bytes()
    assert (tmp_path / "s1").read_bytes() == (tmp_path / "s2").read_bytes()


def test_different_seed_differs(tmp_path):
    a = SynthSpec(num_classes=5, dim=8, num_templates=4, num_samples=60, seed=3)
    b = SynthSpec(num_classes=5, dim=8, num_templates=4, num_samples=60, seed=4)
    synth_generate(a, tmp_path / "b1", tmp_path / "s1")
    synth_generate(b, tmp_path / "b2", tmp_path / "s2")
    assert (tmp_path / "s1").read_bytes() != (tmp_path / "s2").read_bytes()


def test_files_conform(tmp_path):
    spec = SynthSpec(num_classes=4, dim=6, num_templates=3, num_samples=40, seed=0)
    synth_generate(spec, tmp_path / "bank", tmp_path / "stream")
    bank = load_prompt_bank(tmp_path / "bank")
    stream = load_stream_arrays(tmp_path / "stream")
    assert bank.renormalized == 0
    assert stream.renormalized == 0
    assert bank.num_classes == 4 and bank.num_templates == 3 and bank.dim == 6
    assert len(stream) == 40
    assert set(stream.labels.tolist()) <= set(range(4))
    # roughly balanced labels
    counts = np.bincount(stream.labels, minlength=4)
    assert counts.min() >= 8


def test_noiseless_images_sit_on_centroids():
    spec = SynthSpec(
        num_classes=3,
        dim=12,
        num_templates=2,
        num_samples=30,
        prompt_spread=0.0,
        image_spread=0.0,
        domain_shift=0.0,
        seed=5,
    )
    bank, stream = generate(spec)
    # with zero spread the templates equal the centroid, and so do the images
    for t in range(len(stream)):
        centroid = bank.embeddings[stream.labels[t], 0]
        np.testing.assert_allclose(stream.embeddings[t], centroid, atol=1e-9)
    report = run_stream(bank, stream, RunConfig(mode="adaptive", alpha=1.0))
    assert report.top1_accuracy == 1.0


def test_separation_infeasible():
    # 40 directions at >= 120 degrees apart cannot exist in the plane
    with pytest.raises(SeparationInfeasibleError):
        generate(
            SynthSpec(
                num_classes=40, dim=2, num_templates=1, num_samples=10,
                class_separation=2.1, seed=0,
            )
        )


def test_separation_margin_holds():
    spec = SynthSpec(num_classes=6, dim=4, num_templates=1, num_samples=6,
                     class_separation=0.8, prompt_spread=0.0, seed=1)
    bank, _ = generate(spec)
    cents = bank.embeddings[:, 0, :]
    gram = cents @ cents.T
    off = gram[~np.eye(6, dtype=bool)]
    assert np.all(np.arccos(np.clip(off, -1, 1)) >= 0.8 - 1e-9)


def test_domain_shift_angle():
    spec = SynthSpec(num_classes=3, dim=8, num_templates=1, num_samples=30,
                     prompt_spread=0.0, image_spread=0.0, domain_shift=0.4, seed=2)
    bank, stream = generate(spec)
    for t in range(len(stream)):
        centroid = bank.embeddings[stream.labels[t], 0]
        angle = np.arccos(np.clip(stream.embeddings[t] @ centroid, -1, 1))
        assert angle == pytest.approx(0.4, abs=1e-6)


def test_zero_shot_flip_at_analytic_decision_angle():
    """Two classes at e1/e2 in the plane: the zero-shot boundary sits at 45
    degrees, so a shift below it keeps accuracy 1.0 and a shift beyond it
    sends every sample to the wrong side."""
    from ttastream import PromptBank, StreamArrays

    bank = PromptBank(
        embeddings=np.array([[[1.0, 0.0]], [[0.0, 1.0]]]),
        class_names=["x", "y"],
        template_texts=["t"],
    )

    def stream_at(shift_deg):
        a0 = np.deg2rad(shift_deg)
        a1 = np.deg2rad(90 - shift_deg)
        vecs, labels = [], []
        for _ in range(10):
            vecs.append([np.cos(a0), np.sin(a0)])
            labels.append(0)
            vecs.append([np.cos(a1), np.sin(a1)])
            labels.append(1)
        return StreamArrays(np.array(vecs), np.array(labels, dtype=np.int64))

    cfg = RunConfig(mode="adaptive", alpha=1.0)
    for shift, expected in ((20.0, 1.0), (30.0, 1.0), (60.0, 0.0)):
        # independent oracle: a class-0 sample at angle a is correct iff a < 45
        analytic = 1.0 if shift < 45.0 else 0.0
        assert analytic == expected
        report = run_stream(bank, stream_at(shift), cfg)
        assert report.top1_accuracy == expected


def test_contaminate_bank_replaces_requested_fraction():
    spec = SynthSpec(num_classes=5, dim=8, num_templates=10, num_samples=10, seed=6)
    bank, _ = generate(spec)
    junked = contaminate_bank(bank, fraction=0.3, seed=99)
    changed = np.any(junked.embeddings != bank.embeddings, axis=2).sum(axis=1)
    assert np.all(changed == 3)
    norms = np.linalg.norm(junked.embeddings, axis=2)
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)
    # identical seed reproduces the same contamination
    again = contaminate_bank(bank, fraction=0.3, seed=99)
    np.testing.assert_array_equal(junked.embeddings, again.embeddings)


def test_benchmark_presets_exist():
    for name in ("standard", "junk", "noise"):
        spec = benchmark_spec(name, seed=7)
        assert spec.seed == 7
    with pytest.raises(KeyError):
        benchmark_spec("nope")
