"""Batched embedding extraction from pretrained encoders.

Three ways to collapse an encoder's last hidden states (t, d) to one vector:

* ``mean``   - average of the last hidden states; padding positions are
               excluded via the attention mask unless ``include_padding``
               asks for the literal unmasked mean.
* ``cls``    - the first-token hidden state.
* ``pooler`` - the model's pooler head applied to the first token; only
               available on models that expose one.

Inference runs in eval mode with gradients off, so extraction is
deterministic for a fixed model, inputs, and kind.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EMBEDDING_KINDS = ("mean", "cls", "pooler")


class ExtractionError(ValueError):
    """Bad job configuration (unknown kind, missing pooler head, ...)."""


@dataclass(frozen=True)
class Snippet:
    snippet_id: str
    text: str


@dataclass(frozen=True)
class ExtractionJob:
    model_name: str               # hub id or local path
    language: str
    kind: str
    snippets: tuple[Snippet, ...]
    max_length: int = 512
    batch_size: int = 16
    include_padding: bool = False

    def __post_init__(self):
        if self.kind not in EMBEDDING_KINDS:
            raise ExtractionError(f"kind {self.kind!r} not one of {EMBEDDING_KINDS}")
        if self.max_length < 2 or self.batch_size < 1:
            raise ExtractionError("max_length must be >= 2 and batch_size >= 1")
        ids = [s.snippet_id for s in self.snippets]
        if len(set(ids)) != len(ids):
            raise ExtractionError("duplicate snippet ids")


@dataclass(frozen=True)
class ExtractionResult:
    ids: tuple[str, ...]
    vectors: np.ndarray = field(repr=False)   # (n, d) float32
    truncated: tuple[str, ...]                # snippet ids cut at max_length
    skipped: tuple[str, ...]                  # empty snippets, absent from ids
    hidden_size: int


def read_snippet_files(paths) -> list[Snippet]:
    """One snippet per UTF-8 text file; the file stem is the snippet id."""
    return [
        Snippet(snippet_id=Path(p).stem, text=Path(p).read_text(encoding="utf-8"))
        for p in paths
    ]


def read_snippets_jsonl(path) -> list[Snippet]:
    """JSONL snippets: one ``{"id": ..., "text": ...}`` object per line."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            try:
                out.append(Snippet(snippet_id=str(rec["id"]), text=str(rec["text"])))
            except KeyError as exc:
                raise ExtractionError(f"{path}:{lineno}: missing field {exc}") from exc
    return out


def _load_encoder(model_name: str):
    import torch
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_name)
    model = AutoModel.from_pretrained(model_name)
    model.eval()
    torch.set_grad_enabled(False)
    return tokenizer, model


def extract(job: ExtractionJob) -> ExtractionResult:
    """Run the job and return one embedding per non-empty snippet, in input
    order. Empty (whitespace-only) snippets are skipped with a warning."""
    import torch

    tokenizer, model = _load_encoder(job.model_name)

    kept, skipped = [], []
    for snippet in job.snippets:
        if snippet.text.strip():
            kept.append(snippet)
        else:
            skipped.append(snippet.snippet_id)
            print(
                f"warning: skipping empty snippet {snippet.snippet_id!r}",
                file=sys.stderr,
            )
    if not kept:
        raise ExtractionError("no non-empty snippets to embed")

    rows, truncated = [], []
    for start in range(0, len(kept), job.batch_size):
        batch = kept[start : start + job.batch_size]
        encoded = tokenizer(
            [s.text for s in batch],
            return_tensors="pt",
            padding=True,
            truncation=True,
            max_length=job.max_length,
        )
        lengths = encoded["attention_mask"].sum(dim=1)
        for snippet, length in zip(batch, lengths):
            # a sequence cut to exactly max_length was (or may have been)
            # truncated; record it so downstream runs can tell
            if int(length) >= job.max_length:
                truncated.append(snippet.snippet_id)
        outputs = model(**encoded)
        hidden = outputs.last_hidden_state          # (b, t, d)
        if job.kind == "cls":
            vectors = hidden[:, 0, :]
        elif job.kind == "pooler":
            pooled = getattr(outputs, "pooler_output", None)
            if pooled is None:
                raise ExtractionError(
                    f"model {job.model_name!r} has no pooler head; "
                    "use kind 'mean' or 'cls'"
                )
            vectors = pooled
        elif job.include_padding:
            vectors = hidden.mean(dim=1)
        else:
            mask = encoded["attention_mask"].unsqueeze(-1).to(hidden.dtype)
            vectors = (hidden * mask).sum(dim=1) / mask.sum(dim=1)
        rows.append(vectors.to(torch.float32).cpu().numpy())

    stacked = np.concatenate(rows, axis=0)
    return ExtractionResult(
        ids=tuple(s.snippet_id for s in kept),
        vectors=stacked,
        truncated=tuple(truncated),
        skipped=tuple(skipped),
        hidden_size=stacked.shape[1],
    )


def extract_to_embx(job: ExtractionJob, out_path) -> ExtractionResult:
    from .embx import write_embx

    result = extract(job)
    write_embx(
        out_path,
        language=job.language,
        kind=job.kind,
        model_name=job.model_name,
        ids=list(result.ids),
        vectors=result.vectors,
        extra={"truncated": list(result.truncated)},
    )
    return result
