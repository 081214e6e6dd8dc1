"""Command-line entry point wiring all modules together.

Subcommands: synth, fit, apply, eval code2code, eval text2code, probe, pca,
ablate size. Every run writes a JSON run-manifest (inputs with content
hashes, flags, seed, versions) next to its primary output so results are
reproducible from the manifest alone. Exit codes: 0 success, 1 validation
or usage error, 2 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, components, probe, retrieval, synth
from .data import (
    file_sha256,
    load_estimation_dir,
    read_embx,
    read_parallel_corpus,
    write_embx,
    write_estimation_dir,
    write_parallel_corpus,
)
from .errors import FormatError, ValidationError

CODE2CODE_DB = {
    "monolingual": "monolingual",
    "source-excluded": "source_excluded_multilingual",
    "source-included": "source_included_multilingual",
}
TEXT2CODE_DB = {
    "monolingual": "text2code_monolingual",
    "multilingual": "text2code_multilingual",
}
METHOD_FLAGS = {"centering": "centering", "lrd": "lrd", "cs-lrd": "cs_lrd"}
DEFAULT_RANKS = {"lrd": 10, "cs_lrd": 9}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("LACE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ValidationError(f"LACE_THREADS={env!r} is not an integer") from exc
    return os.cpu_count() or 1


def _write_run_manifest(primary_output, command: str, args, inputs, seed=None) -> None:
    flags = {
        k: v
        for k, v in vars(args).items()
        if k != "func" and isinstance(v, (str, int, float, bool, list, type(None)))
    }
    manifest = {
        "command": command,
        "flags": flags,
        "inputs": {
            str(p): file_sha256(p) for p in inputs if p is not None and Path(p).is_file()
        },
        "seed": seed,
        "versions": {
            "lace": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    path = Path(str(primary_output) + ".run.json")
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_synth(args) -> int:
    spec = synth.SynthSpec.from_json(args.spec)
    probe_test = args.probe_test
    gen_spec = spec
    if probe_test:
        gen_spec = dataclasses.replace(
            spec, estimation_per_language=spec.estimation_n + probe_test
        )
    result = synth.generate(gen_spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    estimation = result.estimation
    if probe_test:
        keep = spec.estimation_n
        from .data import EstimationSet

        estimation = EstimationSet(
            sets={
                lang: result.estimation.sets[lang].take(range(keep))
                for lang in result.estimation.languages
            }
        )
        test = EstimationSet(
            sets={
                lang: result.estimation.sets[lang].take(
                    range(keep, keep + probe_test)
                )
                for lang in result.estimation.languages
            }
        )
        write_estimation_dir(test, out / "probe_test")
    write_estimation_dir(estimation, out / "estimation")
    manifest_path = write_parallel_corpus(result.corpus, out / "corpus")
    synth.write_ground_truth(result.truth, out / "ground_truth.lace-gt")
    (out / "synth-spec.json").write_text(
        json.dumps(spec.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    _write_run_manifest(out / "synth-spec.json", "synth", args, [args.spec], seed=spec.seed)
    print(f"wrote estimation, corpus ({manifest_path}), ground truth under {out}")
    return 0


def _resolve_rank(method: str, rank, est, mode: str):
    """Default and clamp ranks per method; returns (rank, warning or None)."""
    if method == "centering":
        return None, None
    if rank is None:
        rank = DEFAULT_RANKS[method]
    if method == "cs_lrd" and mode == "means":
        max_rank = min(len(est.languages) - 1, est.dim)
        if rank > max_rank:
            warning = (
                f"rank {rank} exceeds the means-mode limit {max_rank} for "
                f"{len(est.languages)} languages; clamped to {max_rank} "
                "(use --cs-mode pooled for higher ranks)"
            )
            return max_rank, warning
    return rank, None


def _fit_from_dir(method_flag: str, rank, cs_mode: str, estimation_dir):
    method = METHOD_FLAGS[method_flag]
    est = load_estimation_dir(estimation_dir)
    rank, warning = _resolve_rank(method, rank, est, cs_mode)
    if warning:
        print(f"warning: {warning}", file=sys.stderr)
    if method == "centering":
        model = components.fit_centering(est)
    elif method == "lrd":
        model = components.fit_lrd(est, rank)
    else:
        model = components.fit_cs_lrd(est, rank, mode=cs_mode)
    if warning:
        model = dataclasses.replace(
            model, metadata={**model.metadata, "clamp_warning": warning}
        )
    return model


def _cmd_fit(args) -> int:
    model = _fit_from_dir(args.method, args.rank, args.cs_mode, args.estimation_dir)
    components.write_model(model, args.out)
    inputs = sorted(Path(args.estimation_dir).glob("*.embx"))
    _write_run_manifest(args.out, "fit", args, inputs)
    print(f"fit {model.describe()} on {len(model.languages)} languages -> {args.out}")
    return 0


def _cmd_apply(args) -> int:
    model = components.read_model(args.model)
    emb_set = read_embx(args.input)
    out_set = components.apply_set(model, emb_set, invert=args.invert_removal)
    write_embx(out_set, args.out)
    _write_run_manifest(args.out, "apply", args, [args.model, args.input])
    print(f"applied {model.describe()} to {emb_set.n} embeddings -> {args.out}")
    return 0


def _finish_eval(report, args) -> int:
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(report.to_json(), encoding="utf-8")
    text = report.to_text()
    if args.text:
        Path(args.text).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    inputs = [args.corpus, args.model]
    if args.estimation_dir:
        inputs += sorted(Path(args.estimation_dir).glob("*.embx"))
    _write_run_manifest(args.report, "eval", args, inputs)
    return 0


def _resolve_eval_model(args):
    """Either a prefitted --model file or an inline fit via --method."""
    if args.model and args.method:
        raise ValidationError("give either --model or --method, not both")
    if args.model:
        return components.read_model(args.model)
    if args.method:
        if not args.estimation_dir:
            raise ValidationError("--method needs --estimation-dir to fit on")
        return _fit_from_dir(args.method, args.rank, args.cs_mode, args.estimation_dir)
    return None


def _cmd_eval_code2code(args) -> int:
    corpus = read_parallel_corpus(args.corpus)
    model = _resolve_eval_model(args)
    report = retrieval.eval_code2code(
        corpus,
        model,
        db_config=CODE2CODE_DB[args.db],
        similarity=args.similarity,
        exclude_parallel=not args.keep_parallel_translations,
        any_translation_relevant=args.count_any_translation_relevant,
        invert=args.invert_removal,
        threads=_threads(args),
    )
    return _finish_eval(report, args)


def _cmd_eval_text2code(args) -> int:
    corpus = read_parallel_corpus(args.corpus)
    model = _resolve_eval_model(args)
    report = retrieval.eval_text2code(
        corpus,
        model,
        db_config=TEXT2CODE_DB[args.db],
        transform_query=args.transform_query,
        similarity=args.similarity,
        invert=args.invert_removal,
        threads=_threads(args),
    )
    return _finish_eval(report, args)


def _cmd_probe(args) -> int:
    train = load_estimation_dir(args.train_dir)
    test = load_estimation_dir(args.test_dir)
    hyper = probe.ProbeHyper(lr=args.lr, epochs=args.epochs, l2=args.l2, seed=args.seed)
    out = {"before": probe.probe_accuracy_report(train, test, None, hyper)}
    if args.model:
        model = components.read_model(args.model)
        out["after"] = probe.probe_accuracy_report(train, test, model, hyper)
    Path(args.report).write_text(
        json.dumps(out, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    _write_run_manifest(args.report, "probe", args, [args.model], seed=args.seed)
    line = f"probe accuracy before removal: {out['before']['accuracy']:.2f}"
    if "after" in out:
        line += f", after: {out['after']['accuracy']:.2f}"
    print(line)
    return 0


def _cmd_pca(args) -> int:
    sets = [read_embx(p) for p in args.inputs]
    if args.model:
        model = components.read_model(args.model)
        sets = [components.apply_set(model, s) for s in sets]
    probe.write_pca_csv(sets, args.components, args.out)
    _write_run_manifest(args.out, "pca", args, list(args.inputs) + [args.model])
    print(f"wrote {sum(s.n for s in sets)} PCA rows -> {args.out}")
    return 0


def _cmd_ablate_size(args) -> int:
    corpus = read_parallel_corpus(args.corpus)
    estimation = load_estimation_dir(args.estimation_dir)
    method = METHOD_FLAGS[args.method]
    rank, warning = _resolve_rank(method, args.rank, estimation, args.cs_mode)
    if warning:
        print(f"warning: {warning}", file=sys.stderr)
    rows = retrieval.ablation_estimation_size(
        corpus,
        estimation,
        sizes=args.sizes,
        seeds=args.seeds,
        method=method,
        rank=rank,
        mode=args.cs_mode,
        db_config=CODE2CODE_DB[args.db],
        similarity=args.similarity,
        threads=_threads(args),
    )
    Path(args.report).write_text(
        json.dumps({"method": method, "rank": rank, "rows": rows}, sort_keys=True, indent=2)
        + "\n",
        encoding="utf-8",
    )
    _write_run_manifest(args.report, "ablate-size", args, [args.corpus])
    for row in rows:
        print(
            f"size {row['size']:>6}: mean delta {row['mean_delta']:+.3f}, "
            f"variance {row['variance']:.5f} over {len(row['deltas'])} seeds"
        )
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_eval_common(sub):
    sub.add_argument("--corpus", required=True, help="corpus manifest JSON")
    sub.add_argument("--model", default=None, help="fitted model file (.lace)")
    sub.add_argument("--method", choices=sorted(METHOD_FLAGS), default=None,
                     help="fit inline on --estimation-dir instead of loading --model")
    sub.add_argument("--rank", type=int, default=None)
    sub.add_argument("--cs-mode", choices=components.CS_LRD_MODES, default="means")
    sub.add_argument("--estimation-dir", default=None)
    sub.add_argument("--similarity", choices=retrieval.SIMILARITIES, default="cosine")
    sub.add_argument("--invert-removal", action="store_true",
                     help="keep the projection instead of the residual (debug)")
    sub.add_argument("--threads", type=int, default=None,
                     help="worker threads (default: LACE_THREADS or all cores)")
    sub.add_argument("--report", required=True, help="output report JSON path")
    sub.add_argument("--text", default=None, help="also write the aligned-text report here")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lace", description=__doc__)
    parser.add_argument("--version", action="version", version=f"lace {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = commands.add_parser("synth",
                            help="generate a synthetic corpus from a spec file")
    p.add_argument("--spec", required=True, help="synth.json spec file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--probe-test", type=int, default=0,
                   help="also emit a held-out probe_test split of this size per language")
    p.set_defaults(func=_cmd_synth)

    p = commands.add_parser("fit", help="fit a removal model")
    p.add_argument("--method", choices=sorted(METHOD_FLAGS), required=True)
    p.add_argument("--rank", type=int, default=None,
                   help="subspace rank (default: 10 for lrd, 9 for cs-lrd)")
    p.add_argument("--cs-mode", choices=components.CS_LRD_MODES, default="means")
    p.add_argument("--estimation-dir", required=True,
                   help="directory of per-language .embx files")
    p.add_argument("--out", required=True, help="output model path (.lace)")
    p.set_defaults(func=_cmd_fit)

    p = commands.add_parser("apply",
                            help="apply a fitted model to an embedding file")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="input .embx")
    p.add_argument("--out", required=True, help="output .embx")
    p.add_argument("--invert-removal", action="store_true")
    p.set_defaults(func=_cmd_apply)

    p = commands.add_parser("eval", help="retrieval evaluation")
    eval_sub = p.add_subparsers(dest="eval_task", required=True, parser_class=_Parser)
    c2c = eval_sub.add_parser("code2code")
    c2c.add_argument("--db", choices=sorted(CODE2CODE_DB), default="source-included")
    c2c.add_argument("--count-any-translation-relevant", action="store_true",
                     help="also score any parallel translation as relevant")
    c2c.add_argument("--keep-parallel-translations", action="store_true",
                     help="keep the query's non-target translations in the database")
    _add_eval_common(c2c)
    c2c.set_defaults(func=_cmd_eval_code2code)
    t2c = eval_sub.add_parser("text2code")
    t2c.add_argument("--db", choices=sorted(TEXT2CODE_DB), default="monolingual")
    t2c.add_argument("--transform-query", action=argparse.BooleanOptionalAction,
                     default=True, help="also remove the english component from queries")
    _add_eval_common(t2c)
    t2c.set_defaults(func=_cmd_eval_text2code)

    p = commands.add_parser("probe",
                            help="language-identification probe before/after removal")
    p.add_argument("--train-dir", required=True)
    p.add_argument("--test-dir", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", required=True)
    p.set_defaults(func=_cmd_probe)

    p = commands.add_parser("pca", help="export PCA coordinates")
    p.add_argument("--inputs", nargs="+", required=True, help=".embx files to pool")
    p.add_argument("-k", "--components", type=int, default=2)
    p.add_argument("--model", default=None, help="apply this removal model first")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=_cmd_pca)

    p = commands.add_parser("ablate", help="ablation studies")
    ablate_sub = p.add_subparsers(dest="ablate_task", required=True, parser_class=_Parser)
    size = ablate_sub.add_parser("size",
                                 help="estimation-set size ablation")
    size.add_argument("--corpus", required=True)
    size.add_argument("--estimation-dir", required=True)
    size.add_argument("--method", choices=sorted(METHOD_FLAGS), required=True)
    size.add_argument("--rank", type=int, default=None)
    size.add_argument("--cs-mode", choices=components.CS_LRD_MODES, default="means")
    size.add_argument("--sizes", type=_int_list, required=True,
                      help="comma-separated estimation sizes, e.g. 100,1000")
    size.add_argument("--seeds", type=_int_list, required=True,
                      help="comma-separated seeds, e.g. 0,1,2,3,4")
    size.add_argument("--db", choices=sorted(CODE2CODE_DB), default="source-included")
    size.add_argument("--similarity", choices=retrieval.SIMILARITIES, default="cosine")
    size.add_argument("--threads", type=int, default=None)
    size.add_argument("--report", required=True)
    size.set_defaults(func=_cmd_ablate_size)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ValidationError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
