"""On-disk formats and in-memory containers for embedding data.

EMBX v1 is the interchange format: one UTF-8 JSON manifest line (version,
dim, count, language, kind, model_name, ids, optional transform) terminated
by a newline, followed by a raw little-endian float32 row-major blob of
count x dim values. It is streamable, language neutral, and bit exact for
float32 payloads. A JSONL fallback exists for hand-written fixtures, and a
corpus manifest (plain JSON) ties per-language EMBX files to a concept
alignment table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .validation import check_finite

__all__ = [
    "EMBEDDING_KINDS",
    "EmbeddingSet",
    "EstimationSet",
    "ParallelCorpus",
    "write_embx",
    "read_embx",
    "read_embeddings_jsonl",
    "read_parallel_corpus",
    "write_parallel_corpus",
    "load_estimation_dir",
]

EMBX_VERSION = 1
EMBEDDING_KINDS = ("mean", "cls", "pooler")


def _frozen_array(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EmbeddingSet:
    """A labeled (n, d) block of embeddings for one language.

    ``transform`` records the removal method applied to the vectors, if any;
    it is None for raw model output.
    """

    language: str
    kind: str
    model_name: str
    ids: tuple[str, ...]
    vectors: np.ndarray = field(repr=False)
    transform: str | None = None

    def __post_init__(self):
        if self.kind not in EMBEDDING_KINDS:
            raise ValidationError(
                f"kind {self.kind!r} not one of {EMBEDDING_KINDS}"
            )
        vectors = np.asarray(self.vectors)
        if vectors.ndim != 2:
            raise ValidationError(f"vectors must be 2-D, got shape {vectors.shape}")
        check_finite(vectors, f"{self.language} vectors")
        ids = tuple(str(i) for i in self.ids)
        if len(ids) != vectors.shape[0]:
            raise ValidationError(
                f"{len(ids)} ids for {vectors.shape[0]} vector rows"
            )
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate snippet ids in {self.language!r} set")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "vectors", _frozen_array(vectors))

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def row(self, snippet_id: str) -> np.ndarray:
        return self.vectors[self.index_of(snippet_id)]

    def index_of(self, snippet_id: str) -> int:
        try:
            return self._index[snippet_id]
        except AttributeError:
            object.__setattr__(
                self, "_index", {s: i for i, s in enumerate(self.ids)}
            )
            return self._index[snippet_id]

    def take(self, indices) -> "EmbeddingSet":
        """Row subset with metadata preserved."""
        indices = np.asarray(indices, dtype=int)
        return replace(
            self,
            ids=tuple(self.ids[i] for i in indices),
            vectors=self.vectors[indices],
        )


@dataclass(frozen=True)
class EstimationSet:
    """Per-language embedding sets used to fit removal models.

    The member sets share one dimensionality, cover at least two languages,
    and are never required to be parallel translations of one another.
    """

    sets: dict[str, EmbeddingSet]

    def __post_init__(self):
        if len(self.sets) < 2:
            raise ValidationError("estimation set needs at least 2 languages")
        dims = {s.dim for s in self.sets.values()}
        if len(dims) != 1:
            raise ValidationError(f"inconsistent dimensions across languages: {dims}")
        for lang, s in self.sets.items():
            if lang != s.language:
                raise ValidationError(
                    f"set for key {lang!r} is labeled {s.language!r}"
                )
            if s.n < 1:
                raise ValidationError(f"language {lang!r} has no snippets")
        object.__setattr__(self, "sets", dict(self.sets))

    @property
    def languages(self) -> list[str]:
        return sorted(self.sets)

    @property
    def dim(self) -> int:
        return next(iter(self.sets.values())).dim

    def matrix(self, lang: str) -> np.ndarray:
        return np.asarray(self.sets[lang].vectors, dtype=np.float64)


@dataclass(frozen=True)
class ParallelCorpus:
    """Concept-aligned snippets across languages for retrieval evaluation.

    Each concept maps a language to at most one snippet id, every referenced
    id must exist in the corresponding set, and ids are globally unique so
    that ranking tie-breaks by id are well defined.
    """

    concepts: tuple[dict[str, str], ...]
    sets: dict[str, EmbeddingSet]

    def __post_init__(self):
        dims = {s.dim for s in self.sets.values()}
        if len(dims) > 1:
            raise ValidationError(f"inconsistent dimensions across languages: {dims}")
        seen: set[str] = set()
        for lang, s in self.sets.items():
            if lang != s.language:
                raise ValidationError(f"set for key {lang!r} is labeled {s.language!r}")
            dup = seen.intersection(s.ids)
            if dup:
                raise ValidationError(
                    f"snippet ids reused across languages: {sorted(dup)[:5]}"
                )
            seen.update(s.ids)
        concepts = tuple(dict(c) for c in self.concepts)
        for i, concept in enumerate(concepts):
            for lang, snippet_id in concept.items():
                if lang not in self.sets:
                    raise ValidationError(
                        f"concept {i} references unknown language {lang!r}"
                    )
                if snippet_id not in set(self.sets[lang].ids):
                    raise ValidationError(
                        f"concept {i} references missing snippet "
                        f"{snippet_id!r} in language {lang!r}"
                    )
        object.__setattr__(self, "concepts", concepts)
        object.__setattr__(self, "sets", dict(self.sets))

    @property
    def languages(self) -> list[str]:
        return sorted(self.sets)

    @property
    def dim(self) -> int:
        return next(iter(self.sets.values())).dim

    def vector(self, lang: str, snippet_id: str) -> np.ndarray:
        return self.sets[lang].row(snippet_id)

    def with_sets(self, sets: dict[str, EmbeddingSet]) -> "ParallelCorpus":
        return ParallelCorpus(concepts=self.concepts, sets=sets)


# ---------------------------------------------------------------------------
# EMBX v1


def write_embx(emb_set: EmbeddingSet, path) -> None:
    """Write one EmbeddingSet as an EMBX v1 file.

    The payload is stored as little-endian float32; float32 inputs round
    trip bit exactly, wider dtypes are quantized on write.
    """
    manifest = {
        "version": EMBX_VERSION,
        "dim": emb_set.dim,
        "count": emb_set.n,
        "language": emb_set.language,
        "kind": emb_set.kind,
        "model_name": emb_set.model_name,
        "ids": list(emb_set.ids),
    }
    if emb_set.transform is not None:
        manifest["transform"] = emb_set.transform
    blob = np.ascontiguousarray(emb_set.vectors, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(blob)


def read_embx(path) -> EmbeddingSet:
    """Read an EMBX v1 file, enforcing every structural invariant."""
    with open(path, "rb") as fh:
        header = fh.readline()
        blob = fh.read()
    try:
        manifest = json.loads(header.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable EMBX manifest line: {exc}") from exc
    version = manifest.get("version")
    if version != EMBX_VERSION:
        raise FormatError(f"{path}: unknown EMBX version {version!r}")
    missing = {"dim", "count", "language", "kind", "model_name", "ids"} - set(manifest)
    if missing:
        raise FormatError(f"{path}: manifest missing fields {sorted(missing)}")
    count, dim = int(manifest["count"]), int(manifest["dim"])
    expected = count * dim * 4
    if len(blob) != expected:
        raise FormatError(
            f"{path}: payload length mismatch, expected {expected} bytes "
            f"({count}x{dim} float32), got {len(blob)}"
        )
    vectors = np.frombuffer(blob, dtype="<f4").reshape(count, dim)
    if not np.isfinite(vectors).all():
        raise ValidationError(f"{path}: payload contains NaN or Inf")
    return EmbeddingSet(
        language=manifest["language"],
        kind=manifest["kind"],
        model_name=manifest["model_name"],
        ids=tuple(manifest["ids"]),
        vectors=vectors,
        transform=manifest.get("transform"),
    )


def read_embeddings_jsonl(path, kind: str = "mean", model_name: str = "") -> EmbeddingSet:
    """JSONL fallback reader: one ``{"id":..., "lang":..., "vec":[...]}`` per line.

    All records must share a single language; vectors are parsed to float32
    so a fixture written from float32 values matches its binary twin exactly.
    """
    ids, langs, rows = [], set(), []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            try:
                ids.append(str(rec["id"]))
                langs.add(str(rec["lang"]))
                rows.append(rec["vec"])
            except KeyError as exc:
                raise FormatError(f"{path}:{lineno}: missing field {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: no records")
    if len(langs) != 1:
        raise ValidationError(f"{path}: mixed languages in one file: {sorted(langs)}")
    vectors = np.asarray(rows, dtype=np.float32)
    return EmbeddingSet(
        language=langs.pop(),
        kind=kind,
        model_name=model_name,
        ids=tuple(ids),
        vectors=vectors,
    )


# ---------------------------------------------------------------------------
# Corpus manifest


def read_parallel_corpus(manifest_path) -> ParallelCorpus:
    """Load a corpus manifest: language -> EMBX path plus a concept table.

    Paths are resolved relative to the manifest location. Dangling snippet
    references are rejected with the offending concept named.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: bad corpus manifest: {exc}") from exc
    for key in ("languages", "concepts"):
        if key not in manifest:
            raise FormatError(f"{manifest_path}: manifest missing {key!r}")
    sets = {}
    for lang, rel in sorted(manifest["languages"].items()):
        emb_path = manifest_path.parent / rel
        if not emb_path.exists():
            raise FormatError(f"{manifest_path}: missing embedding file {emb_path}")
        sets[lang] = read_embx(emb_path)
    return ParallelCorpus(concepts=tuple(manifest["concepts"]), sets=sets)


def write_parallel_corpus(corpus: ParallelCorpus, out_dir, manifest_name="manifest.json") -> Path:
    """Write per-language EMBX files plus the manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    languages = {}
    for lang in corpus.languages:
        rel = f"{lang}.embx"
        write_embx(corpus.sets[lang], out_dir / rel)
        languages[lang] = rel
    manifest = {"languages": languages, "concepts": list(corpus.concepts)}
    manifest_path = out_dir / manifest_name
    manifest_path.write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return manifest_path


def load_estimation_dir(directory) -> EstimationSet:
    """Build an EstimationSet from every ``*.embx`` file in a directory."""
    directory = Path(directory)
    paths = sorted(directory.glob("*.embx"))
    if not paths:
        raise FormatError(f"{directory}: no .embx files")
    sets = {}
    for p in paths:
        s = read_embx(p)
        if s.language in sets:
            raise ValidationError(f"{directory}: duplicate language {s.language!r}")
        sets[s.language] = s
    return EstimationSet(sets=sets)


def write_estimation_dir(est: EstimationSet, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for lang in est.languages:
        write_embx(est.sets[lang], directory / f"{lang}.embx")


def file_sha256(path) -> str:
    import hashlib

    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
