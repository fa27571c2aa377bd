"""Experiment harness: ablation sweeps, report serialization, diagnostics.

Sweeps run one configuration per grid cell with isolated state and assemble
results keyed by the grid coordinates, so cell order never matters. All
outputs are plain rows ready for CSV, plus JSON with a config echo for
reproducibility.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from typing import Sequence

import numpy as np

from .cache import BoundedCache, ClassStates, cache_insert, cross_attention_logits
from .engine import RunConfig, RunReport, SampleRecord, _BankScorer, run_stream
from .ete import PromptBank, StreamArrays
from .fusion import entropy

RUN_CSV_HEADER = [
    "index",
    "pseudo_label",
    "prediction",
    "correct",
    "entropy_adaptive",
    "entropy_recursive",
    "weight_adaptive",
]


def _with(cfg: RunConfig, **changes) -> RunConfig:
    return dataclasses.replace(cfg, **changes)


def sweep_cache_sizes(
    bank: PromptBank,
    stream: StreamArrays,
    sizes: Sequence[int],
    cfg: RunConfig,
) -> list[dict]:
    """Accuracy of the bounded-cache pipeline per capacity, plus the
    recursive pipeline as the limit row (cache_size = "recursive")."""
    if not sizes:
        raise ValueError("sizes must be non-empty")
    rows = []
    for n in sizes:
        report = run_stream(bank, stream, _with(cfg, mode="bounded", cache_size=n))
        rows.append({"cache_size": n, "accuracy": report.top1_accuracy})
    report = run_stream(bank, stream, _with(cfg, mode="etta", cache_size=None))
    rows.append({"cache_size": "recursive", "accuracy": report.top1_accuracy})
    return rows


def sweep_alpha(
    bank: PromptBank,
    stream: StreamArrays,
    alphas: Sequence[float],
    cfg: RunConfig,
) -> list[dict]:
    """Accuracy across prompt-filtering strengths."""
    if not alphas:
        raise ValueError("alphas must be non-empty")
    return [
        {
            "alpha": a,
            "accuracy": run_stream(bank, stream, _with(cfg, alpha=a)).top1_accuracy,
        }
        for a in alphas
    ]


def sweep_beta(
    bank: PromptBank,
    stream: StreamArrays,
    betas: Sequence[float],
    cfg: RunConfig,
) -> list[dict]:
    """Accuracy of fixed-weight fusion per beta, plus the adaptive row."""
    if not betas:
        raise ValueError("betas must be non-empty")
    rows = []
    for b in betas:
        fus = dataclasses.replace(cfg.fusion, beta=float(b))
        report = run_stream(bank, stream, _with(cfg, fusion=fus))
        rows.append({"beta": b, "accuracy": report.top1_accuracy})
    fus = dataclasses.replace(cfg.fusion, beta=None)
    report = run_stream(bank, stream, _with(cfg, fusion=fus))
    rows.append({"beta": "adaptive", "accuracy": report.top1_accuracy})
    return rows


def noise_experiment(
    bank: PromptBank,
    stream: StreamArrays,
    sigmas: Sequence[float],
    sizes: Sequence[int],
    cfg: RunConfig,
) -> list[dict]:
    """Accuracy grid over embedding-noise scales x cache configurations.

    Each sigma column runs every bounded capacity plus the recursive
    pipeline; sigma = 0 reproduces the plain cache-size sweep.
    """
    if any(s < 0 for s in sigmas):
        raise ValueError("sigmas must be >= 0")
    rows = []
    for sigma in sigmas:
        noisy = _with(cfg, noise_sigma=float(sigma))
        for row in sweep_cache_sizes(bank, stream, sizes, noisy):
            rows.append({"sigma": sigma, **row})
    return rows


def unbounded_divergence(
    bank: PromptBank,
    stream: StreamArrays,
    cfg: RunConfig,
) -> dict:
    """Gap between the recursive state and an unbounded explicit cache.

    The recursion freezes each sample's attention weight at insertion time;
    the explicit cache re-weights history with the current per-sample
    ensembles. With alpha = 1 the ensembles are static and the two agree to
    rounding; with filtering they may drift apart, and this measures by how
    much instead of pretending they are equal.
    """
    C, T, d = bank.embeddings.shape
    scorer = _BankScorer(bank, cfg.alpha)
    states = ClassStates(C, d)
    cache = BoundedCache(num_classes=C, capacity=None)
    oracle = cfg.label_source == "oracle"
    gaps = np.empty(len(stream))
    for t in range(len(stream)):
        v = stream.embeddings[t]
        scored = scorer.score(v)
        l_a = scored.logits
        pl = int(np.argmax(l_a))
        lab = int(stream.labels[t])
        route = lab if (oracle and lab >= 0) else pl
        states.update(route, scorer.ensemble_row(scored, route), v)
        cache_insert(cache, route, np.array(v), -entropy(l_a, cfg.fusion.temperature))
        raw = states.w_hat @ v
        raw /= states.norms
        np.copyto(raw, l_a, where=states.cold)
        l_rec = np.clip(raw, -1.0, 1.0)
        l_att = cross_attention_logits(cache, scorer.ensemble_all(scored), v, l_a)
        gaps[t] = np.max(np.abs(l_rec - l_att))
    return {
        "max_gap": float(gaps.max()),
        "mean_gap": float(gaps.mean()),
        "final_gap": float(gaps[-1]),
    }


# --- serialization ---------------------------------------------------------


def report_to_dict(report: RunReport, include_timing: bool = True) -> dict:
    out = {
        "config": report.config.to_dict(),
        "top1_accuracy": report.top1_accuracy,
        "state_memory_bytes": report.state_memory_bytes,
        "per_sample": [dataclasses.asdict(r) for r in report.per_sample],
    }
    if include_timing:
        out["wall_time_per_sample"] = report.wall_time_per_sample
        out["overhead_time_per_sample"] = report.overhead_time_per_sample
        out["overhead_time_median"] = report.overhead_time_median
    return out


def report_from_dict(data: dict) -> RunReport:
    return RunReport(
        top1_accuracy=data["top1_accuracy"],
        per_sample=[SampleRecord(**r) for r in data["per_sample"]],
        state_memory_bytes=data["state_memory_bytes"],
        config=RunConfig.from_dict(data["config"]),
        wall_time_per_sample=data.get("wall_time_per_sample"),
        overhead_time_per_sample=data.get("overhead_time_per_sample"),
        overhead_time_median=data.get("overhead_time_median"),
    )


def load_report(path) -> RunReport:
    with open(str(path), "r", encoding="utf-8") as f:
        return report_from_dict(json.load(f))


def _write_csv(path, header: list[str], rows: list[dict]) -> None:
    with open(str(path), "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=header)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row[k]) for k in header})


def emit_report(report, fmt: str, path, include_timing: bool = True) -> None:
    """Write a run report or a sweep table to disk.

    ``report`` is either a RunReport or a list of sweep rows. JSON output of
    a RunReport includes the config echo and round-trips losslessly;
    ``include_timing=False`` drops the wall-clock fields, making the bytes
    reproducible across runs. IO failures carry the target path.
    """
    if fmt not in ("json", "csv"):
        raise ValueError(f"format must be json or csv, got {fmt!r}")
    if isinstance(report, RunReport):
        if fmt == "json":
            payload = report_to_dict(report, include_timing=include_timing)
            _dump_json(payload, path)
        else:
            rows = [
                {
                    "index": r.index,
                    "pseudo_label": r.pseudo_label,
                    "prediction": r.prediction,
                    "correct": None if r.correct is None else int(r.correct),
                    "entropy_adaptive": r.entropy_adaptive,
                    "entropy_recursive": r.entropy_recursive,
                    "weight_adaptive": r.weight_adaptive,
                }
                for r in report.per_sample
            ]
            _write_csv(path, RUN_CSV_HEADER, rows)
    else:
        rows = list(report)
        if not rows:
            raise ValueError("empty table")
        header = list(rows[0].keys())
        if fmt == "json":
            _dump_json(rows, path)
        else:
            _write_csv(path, header, rows)


def _dump_json(payload, path) -> None:
    with open(str(path), "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=False)
        f.write("\n")
