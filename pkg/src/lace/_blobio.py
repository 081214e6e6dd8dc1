"""Shared layout for binary artifacts: one JSON manifest line followed by
named little-endian float64 blobs, in manifest order."""

from __future__ import annotations

import json

import numpy as np

from .errors import FormatError


def write_manifest_blobs(path, manifest: dict, arrays: list[tuple[str, np.ndarray]]) -> None:
    manifest = dict(manifest)
    manifest["arrays"] = [
        {"name": name, "rows": a.shape[0], "cols": a.shape[1]} for name, a in arrays
    ]
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_manifest_blobs(path, expect_format: str, expect_version: int):
    with open(path, "rb") as fh:
        header = fh.readline()
        blob = fh.read()
    try:
        manifest = json.loads(header.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable manifest line: {exc}") from exc
    if manifest.get("format") != expect_format or manifest.get("version") != expect_version:
        raise FormatError(f"{path}: not a {expect_format} v{expect_version} file")
    arrays = {}
    offset = 0
    for entry in manifest.get("arrays", []):
        size = entry["rows"] * entry["cols"] * 8
        chunk = blob[offset : offset + size]
        if len(chunk) != size:
            raise FormatError(
                f"{path}: blob too short for array {entry['name']!r}: "
                f"expected {size} bytes at offset {offset}, got {len(chunk)}"
            )
        arrays[entry["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(
            entry["rows"], entry["cols"]
        )
        offset += size
    if offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - offset} trailing bytes after arrays")
    return manifest, arrays
