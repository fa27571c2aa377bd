"""Command-line entry: export-bank and export-stream."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .encoders import EncoderLoadError
from .export import ExportManifest, export_bank, export_stream


def _read_lines(path) -> list[str]:
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    return [ln for ln in lines if ln and not ln.startswith("#")]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ete-export",
        description="Encode prompts and images into ETE container files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_bank = sub.add_parser("export-bank", help="encode class prompts into a bank file")
    p_bank.add_argument("--model", required=True, help='encoder id ("seeded/<dim>" or a CLIP checkpoint)')
    p_bank.add_argument("--templates", help="text file, one template per line")
    p_bank.add_argument("--classes", required=True, help="text file, one class name per line")
    p_bank.add_argument("--csp", help="JSON file of per-class prompt lists (overrides --templates)")
    p_bank.add_argument("--out", required=True)

    p_stream = sub.add_parser("export-stream", help="encode an image folder into a stream file")
    p_stream.add_argument("--model", required=True)
    p_stream.add_argument("--images", required=True, help="image folder; subfolders name the classes")
    p_stream.add_argument("--classes", help="class list file for labeling; default: sorted subfolders")
    p_stream.add_argument("--out", required=True)
    p_stream.add_argument("--unlabeled", action="store_true", help="force label -1 on every record")

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export-bank":
            if not args.csp and not args.templates:
                print("error: need --templates or --csp", file=sys.stderr)
                return 2
            class_prompts = None
            if args.csp:
                class_prompts = json.loads(Path(args.csp).read_text(encoding="utf-8"))
            manifest = ExportManifest(
                model_id=args.model,
                classes=_read_lines(args.classes),
                templates=_read_lines(args.templates) if args.templates else [],
                class_prompts=class_prompts,
            )
            rows = export_bank(manifest, args.out)
            C, T, d = rows.shape
            print(f"wrote {args.out}: C={C} T={T} d={d}")
        else:
            root = Path(args.images)
            if args.classes:
                classes = _read_lines(args.classes)
            else:
                classes = sorted(p.name for p in root.iterdir() if p.is_dir())
            manifest = ExportManifest(
                model_id=args.model,
                classes=classes,
                image_root=root,
                unlabeled=args.unlabeled,
            )
            written, skipped = export_stream(manifest, args.out)
            print(f"wrote {args.out}: {written} records ({skipped} skipped)")
        return 0
    except (EncoderLoadError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
