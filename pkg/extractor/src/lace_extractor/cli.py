"""CLI: turn code snippets into an EMBX v1 file with a pretrained encoder."""

from __future__ import annotations

import argparse
import sys

from .extract import (
    EMBEDDING_KINDS,
    ExtractionError,
    ExtractionJob,
    extract_to_embx,
    read_snippet_files,
    read_snippets_jsonl,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lace-extract",
        description="Embed code snippets with a pretrained encoder and write EMBX v1.",
    )
    parser.add_argument("--model", required=True,
                        help="model hub id or local model directory")
    parser.add_argument("--language", required=True,
                        help="language id recorded in the output")
    parser.add_argument("--kind", choices=EMBEDDING_KINDS, default="mean")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--inputs", nargs="+",
                        help="snippet files, one snippet per file (id = file stem)")
    source.add_argument("--jsonl",
                        help='JSONL snippets: {"id": ..., "text": ...} per line')
    parser.add_argument("--max-length", type=int, default=512)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--include-padding", action="store_true",
                        help="mean over padded positions too (literal unmasked mean)")
    parser.add_argument("--out", required=True, help="output .embx path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        snippets = (
            read_snippets_jsonl(args.jsonl)
            if args.jsonl
            else read_snippet_files(args.inputs)
        )
        job = ExtractionJob(
            model_name=args.model,
            language=args.language,
            kind=args.kind,
            snippets=tuple(snippets),
            max_length=args.max_length,
            batch_size=args.batch_size,
            include_padding=args.include_padding,
        )
        result = extract_to_embx(job, args.out)
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"embedded {len(result.ids)} snippets (dim {result.hidden_size}, "
        f"kind {args.kind}, {len(result.truncated)} truncated, "
        f"{len(result.skipped)} skipped) -> {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
