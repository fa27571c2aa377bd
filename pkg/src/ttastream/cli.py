"""Command-line front end.

Exit codes: 0 on success, 2 for a bad configuration (argparse errors land
here too), 3 for unreadable or malformed input files.
"""

from __future__ import annotations

import argparse
import sys

from . import harness, synth
from .engine import RunConfig, run_stream
from .errors import SeparationInfeasibleError, TTAStreamError
from .ete import load_prompt_bank, load_stream_arrays
from .fusion import FusionConfig

EXIT_OK = 0
EXIT_BAD_CONFIG = 2
EXIT_BAD_INPUT = 3

DEFAULT_ALPHA_GRID = [round(0.1 * i, 1) for i in range(1, 11)]
DEFAULT_BETA_GRID = [round(0.1 * i, 1) for i in range(0, 11)]
DEFAULT_SIZES = [1, 2, 4, 8, 16, 32]
DEFAULT_SIGMAS = [0.0, 0.15, 0.25, 0.35]


def _parse_mode(text: str) -> tuple[str, int | None]:
    if text.startswith("bounded:"):
        size = text.split(":", 1)[1]
        if size in ("inf", "unbounded"):
            return "bounded", None
        return "bounded", int(size)
    if text == "bounded":
        return "bounded", None
    if text in ("etta", "adaptive", "recursive", "simple"):
        return text, None
    raise ValueError(
        f"unknown mode {text!r}; expected etta|adaptive|recursive|bounded:N|simple"
    )


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _add_shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--bank", required=True, help="ETEB prompt bank path")
    parser.add_argument("--stream", required=True, help="ETES stream path")
    parser.add_argument("--alpha", type=float, default=0.6, help="retained prompt fraction")
    parser.add_argument("--tau", type=float, default=0.01, help="entropy softmax temperature")
    parser.add_argument("--mode", default="etta", help="etta|adaptive|recursive|bounded:N|simple")
    parser.add_argument("--labels", default="pseudo", choices=["pseudo", "oracle"])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--noise-sigma", type=float, default=0.0)
    parser.add_argument("--beta", type=float, default=None, help="fixed fusion weight on the cache branch")
    parser.add_argument("--out", default=None, help="output path; stdout summary otherwise")
    parser.add_argument("--format", default="json", choices=["json", "csv"])


def _build_config(args) -> RunConfig:
    mode, cache_size = _parse_mode(args.mode)
    return RunConfig(
        alpha=args.alpha,
        fusion=FusionConfig(temperature=args.tau, beta=args.beta),
        mode=mode,
        cache_size=cache_size,
        label_source=args.labels,
        seed=args.seed,
        noise_sigma=args.noise_sigma,
    )


def _load_inputs(args):
    bank = load_prompt_bank(args.bank)
    stream = load_stream_arrays(args.stream)
    return bank, stream


def _emit(result, args) -> None:
    if args.out:
        harness.emit_report(result, args.format, args.out)
        print(f"wrote {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ttastream",
        description="Streaming test-time adaptation over embedding streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single pass over a stream")
    _add_shared(p_run)

    p_synth = sub.add_parser("synth", help="generate a synthetic bank + stream")
    p_synth.add_argument("--classes", type=int, default=24)
    p_synth.add_argument("--dim", type=int, default=10)
    p_synth.add_argument("--templates", type=int, default=10)
    p_synth.add_argument("--samples", type=int, default=1600)
    p_synth.add_argument("--separation", type=float, default=0.5)
    p_synth.add_argument("--prompt-spread", type=float, default=0.25)
    p_synth.add_argument("--image-spread", type=float, default=0.25)
    p_synth.add_argument("--shift", type=float, default=0.35)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out-bank", required=True)
    p_synth.add_argument("--out-stream", required=True)

    p_cache = sub.add_parser("sweep-cache", help="accuracy vs cache capacity")
    _add_shared(p_cache)
    p_cache.add_argument("--sizes", type=_int_list, default=DEFAULT_SIZES)

    p_alpha = sub.add_parser("sweep-alpha", help="accuracy vs filtering strength")
    _add_shared(p_alpha)
    p_alpha.add_argument("--alphas", type=_float_list, default=DEFAULT_ALPHA_GRID)

    p_beta = sub.add_parser("sweep-beta", help="fixed-weight fusion sweep")
    _add_shared(p_beta)
    p_beta.add_argument("--betas", type=_float_list, default=DEFAULT_BETA_GRID)

    p_noise = sub.add_parser("noise", help="noise x cache-size accuracy grid")
    _add_shared(p_noise)
    p_noise.add_argument("--sigmas", type=_float_list, default=DEFAULT_SIGMAS)
    p_noise.add_argument("--sizes", type=_int_list, default=DEFAULT_SIZES)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            spec = synth.SynthSpec(
                num_classes=args.classes,
                dim=args.dim,
                num_templates=args.templates,
                num_samples=args.samples,
                class_separation=args.separation,
                prompt_spread=args.prompt_spread,
                image_spread=args.image_spread,
                domain_shift=args.shift,
                seed=args.seed,
            )
            synth.synth_generate(spec, args.out_bank, args.out_stream)
            print(f"wrote {args.out_bank} and {args.out_stream}")
            return EXIT_OK

        cfg = _build_config(args)
        bank, stream = _load_inputs(args)

        if args.command == "run":
            report = run_stream(bank, stream, cfg)
            acc = "n/a" if report.top1_accuracy is None else f"{report.top1_accuracy:.4f}"
            print(
                f"samples={len(report.per_sample)} accuracy={acc} "
                f"state_bytes={report.state_memory_bytes} "
                f"wall_us={report.wall_time_per_sample * 1e6:.1f} "
                f"overhead_us={report.overhead_time_per_sample * 1e6:.1f}"
            )
            _emit(report, args)
        elif args.command == "sweep-cache":
            rows = harness.sweep_cache_sizes(bank, stream, args.sizes, cfg)
            _print_rows(rows)
            _emit(rows, args)
        elif args.command == "sweep-alpha":
            rows = harness.sweep_alpha(bank, stream, args.alphas, cfg)
            _print_rows(rows)
            _emit(rows, args)
        elif args.command == "sweep-beta":
            rows = harness.sweep_beta(bank, stream, args.betas, cfg)
            _print_rows(rows)
            _emit(rows, args)
        elif args.command == "noise":
            rows = harness.noise_experiment(bank, stream, args.sigmas, args.sizes, cfg)
            _print_rows(rows)
            _emit(rows, args)
        return EXIT_OK
    except (ValueError, SeparationInfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except (TTAStreamError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


def _print_rows(rows: list[dict]) -> None:
    for row in rows:
        print("  ".join(f"{k}={v}" for k, v in row.items()))


if __name__ == "__main__":
    sys.exit(main())
