"""CLI: embed-export --corpus <path> --model <name> --out <file>."""

from __future__ import annotations

import argparse
import json
import sys

from .exporter import DEFAULT_MODEL, DEFAULT_TOKENIZER, ExportError, export_embeddings


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="embed-export", description=__doc__)
    parser.add_argument("--corpus", required=True, help="JSON-lines or CSV corpus")
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help=f"sentence-transformer name or hash:<dim> (default {DEFAULT_MODEL})")
    parser.add_argument("--tokenizer", default=DEFAULT_TOKENIZER,
                        help=f"HF tokenizer name or 'whitespace' (default {DEFAULT_TOKENIZER})")
    parser.add_argument("--out", required=True, help="output embedding file")
    args = parser.parse_args(argv)
    try:
        manifest = export_embeddings(args.corpus, args.model, args.out, args.tokenizer)
    except ExportError as exc:
        print(f"embed-export failed: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(manifest, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
