"""Command-line front end. Flags mirror ExtractorConfig one to one.

Exit codes: 0 success, 2 configuration or encoder-loading problems,
3 data problems (unreadable manifest, no usable records).
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, DataError
from .extract import ExtractorConfig, extract_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rasterembed",
        description="run a vision encoder over an image manifest and write "
        "an embedding file the pruning pipeline can consume",
    )
    parser.add_argument("--manifest", required=True, help="corpus manifest TSV")
    parser.add_argument(
        "--encoder",
        required=True,
        help="encoder identifier, e.g. pixelproj-256",
    )
    parser.add_argument("--output", required=True, help="embedding file to write")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument(
        "--device", default="cpu", help="placement hint for accelerated encoders"
    )
    parser.add_argument(
        "--normalize",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="L2-normalize rows before writing (default: on)",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ExtractorConfig(
        manifest=args.manifest,
        encoder=args.encoder,
        output=args.output,
        batch_size=args.batch_size,
        device=args.device,
        normalize=args.normalize,
    )
    try:
        result = extract_embeddings(cfg)
    except ConfigError as exc:  # includes EncoderLoadError
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {result.output} ({len(result.ids)} rows, dim {result.width})")
    print(f"wrote {result.output}.ids")
    print(f"wrote {result.rejects_path} ({len(result.rejects)} rejects)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
