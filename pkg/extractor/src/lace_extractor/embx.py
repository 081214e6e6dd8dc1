"""EMBX v1 writer.

The interchange format consumed by the analysis toolkit: one UTF-8 JSON
manifest line (version, dim, count, language, kind, model_name, ids)
terminated by a newline, then a raw little-endian float32 row-major blob of
count x dim values. Extra manifest keys (e.g. the list of truncated
snippets) are permitted and ignored by readers that don't know them.
"""

from __future__ import annotations

import json

import numpy as np

EMBX_VERSION = 1


def write_embx(
    path,
    language: str,
    kind: str,
    model_name: str,
    ids: list[str],
    vectors: np.ndarray,
    extra: dict | None = None,
) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2 or vectors.shape[0] != len(ids):
        raise ValueError(
            f"vectors shape {vectors.shape} does not match {len(ids)} ids"
        )
    if not np.isfinite(vectors).all():
        raise ValueError("vectors contain NaN or Inf")
    manifest = {
        "version": EMBX_VERSION,
        "dim": int(vectors.shape[1]),
        "count": int(vectors.shape[0]),
        "language": language,
        "kind": kind,
        "model_name": model_name,
        "ids": list(ids),
    }
    if extra:
        overlap = set(extra) & set(manifest)
        if overlap:
            raise ValueError(f"extra keys shadow manifest fields: {sorted(overlap)}")
        manifest.update(extra)
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(vectors.tobytes())
