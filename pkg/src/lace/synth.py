"""Synthetic embedding corpora with a known semantic/language decomposition.

Every embedding is built as ``semantic + language_component + noise`` with
all planted language structure kept orthogonal to the semantic subspace (one
orthonormal frame, deterministically derived from the seed, is partitioned
between the two). Three planting modes mirror the three removal methods:

* ``constant_offset``       - one fixed offset vector per language.
* ``per_language_subspace`` - per-language rank-r subspaces; each snippet
                              draws its own coefficient around a language-
                              level center so languages are linearly
                              separable before removal.
* ``shared_subspace``       - one rank-r subspace shared by all languages
                              plus a small common mean orthogonal to it;
                              languages differ by their coefficient center.

Semantic coefficients are explicitly de-meaned (per language for estimation
data, across concepts for the corpus) so that mean-based recovery is exact
at zero noise instead of merely consistent. Generation is seed-deterministic:
the same spec yields bitwise-identical data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import EmbeddingSet, EstimationSet, ParallelCorpus
from .errors import RangeError, ValidationError
from .linalg import OrthonormalBasis

__all__ = ["MODES", "ENGLISH", "SynthSpec", "GroundTruth", "SynthResult", "generate"]

MODES = ("constant_offset", "per_language_subspace", "shared_subspace")
ENGLISH = "english"

# Relative scales of the within-language structure, as fractions of
# syntax_scale. Chosen so that for each mode the matched estimator leaves
# the smallest residual. In shared mode the per-snippet scatter must stay
# below the per-coordinate semantic level (otherwise a per-language fit
# spans the shared subspace too and matches the joint fit), and the common
# mean, which subspace removal keeps by design, must stay below what the
# mismatched estimators leave behind.
_LOCAL_SCATTER = 0.4         # per-snippet coefficient scatter, per_language_subspace
_SHARED_SCATTER = 0.05       # per-snippet coefficient scatter, shared_subspace
_COMMON_MEAN_SCALE = 0.02    # norm of the shared-subspace common mean


@dataclass(frozen=True)
class SynthSpec:
    dim: int
    languages: tuple[str, ...]
    concepts: int
    mode: str
    rank: int = 2
    semantic_scale: float = 1.0
    syntax_scale: float = 3.0
    noise_scale: float = 0.0
    seed: int = 0
    include_english: bool = False
    estimation_per_language: int | None = None  # defaults to `concepts`

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode {self.mode!r} not one of {MODES}")
        langs = self.languages
        if isinstance(langs, int):
            langs = tuple(f"lang{i:02d}" for i in range(langs))
        else:
            langs = tuple(str(l) for l in langs)
        if len(langs) < 2:
            raise ValidationError("need at least 2 languages")
        if len(set(langs)) != len(langs):
            raise ValidationError("duplicate language names")
        if ENGLISH in langs:
            raise ValidationError(
                f"{ENGLISH!r} is reserved; enable include_english instead"
            )
        object.__setattr__(self, "languages", langs)
        if self.concepts < 1:
            raise ValidationError("need at least 1 concept")
        for name in ("semantic_scale", "syntax_scale", "noise_scale"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.mode != "constant_offset" and not 1 <= self.rank <= self.dim - 1:
            raise RangeError(f"rank={self.rank} outside [1, {self.dim - 1}]")
        reserved = self._reserved_dims()
        if reserved + 2 > self.dim:
            raise ValidationError(
                f"dim={self.dim} too small: {reserved} dims reserved for language "
                "structure, need at least 2 more for semantics"
            )

    @property
    def all_languages(self) -> tuple[str, ...]:
        return self.languages + ((ENGLISH,) if self.include_english else ())

    def _reserved_dims(self) -> int:
        n = len(self.all_languages)
        if self.mode == "constant_offset":
            return n
        if self.mode == "per_language_subspace":
            return n * self.rank
        return self.rank + 1  # shared subspace + common-mean direction

    @property
    def estimation_n(self) -> int:
        return self.estimation_per_language or self.concepts

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthSpec":
        known = {
            "dim", "languages", "concepts", "mode", "rank", "semantic_scale",
            "syntax_scale", "noise_scale", "seed", "include_english",
            "estimation_per_language",
        }
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown synth spec fields: {sorted(unknown)}")
        raw = dict(raw)
        if isinstance(raw.get("languages"), int):
            raw["languages"] = tuple(f"lang{i:02d}" for i in range(raw["languages"]))
        return cls(**raw)

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "languages": list(self.languages),
            "concepts": self.concepts,
            "mode": self.mode,
            "rank": self.rank,
            "semantic_scale": self.semantic_scale,
            "syntax_scale": self.syntax_scale,
            "noise_scale": self.noise_scale,
            "seed": self.seed,
            "include_english": self.include_english,
            "estimation_per_language": self.estimation_per_language,
        }


@dataclass(frozen=True)
class GroundTruth:
    """Everything that was planted, for oracle checks.

    ``corpus_semantics`` row i is the ideal language-agnostic embedding of
    concept i (shared by every language); the per-language syntax matrices
    hold the exact component each removal method is supposed to strip.
    """

    mode: str
    semantic_basis: np.ndarray = field(repr=False)          # (d, d_sem)
    corpus_semantics: np.ndarray = field(repr=False)        # (concepts, d)
    corpus_syntax: dict[str, np.ndarray] = field(repr=False, default_factory=dict)
    estimation_semantics: dict[str, np.ndarray] = field(repr=False, default_factory=dict)
    estimation_syntax: dict[str, np.ndarray] = field(repr=False, default_factory=dict)
    offsets: dict[str, np.ndarray] | None = None            # constant_offset
    bases: dict[str, OrthonormalBasis] | None = None        # per_language_subspace
    shared_basis: OrthonormalBasis | None = None            # shared_subspace
    common_mean: np.ndarray | None = None
    language_coefficients: dict[str, np.ndarray] | None = None


@dataclass(frozen=True)
class SynthResult:
    spec: SynthSpec
    estimation: EstimationSet
    corpus: ParallelCorpus
    truth: GroundTruth


def _orthonormal_frame(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _spread_unit_vectors(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    """Unit vectors with a large minimum pairwise distance.

    Rejection-sampled (deterministically, from the shared stream); if the
    target spread is infeasible the best candidate set seen is kept.
    """
    best, best_min = None, -np.inf
    for _ in range(64):
        cand = _unit_rows(rng, count, d)
        dists = np.linalg.norm(cand[:, None, :] - cand[None, :, :], axis=-1)
        np.fill_diagonal(dists, np.inf)
        d_min = float(dists.min())
        if d_min >= 1.0:
            return cand
        if d_min > best_min:
            best, best_min = cand, d_min
    return best


def generate(spec: SynthSpec) -> SynthResult:
    """Generate an estimation set, a fully parallel corpus, and ground truth."""
    rng = np.random.default_rng(spec.seed)
    d = spec.dim
    langs = list(spec.all_languages)
    reserved = spec._reserved_dims()
    frame = _orthonormal_frame(rng, d)
    semantic_basis = frame[:, reserved:]
    d_sem = semantic_basis.shape[1]

    offsets = bases = shared_basis = common_mean = lang_coeffs = None
    if spec.mode == "constant_offset":
        offsets = {
            lang: spec.syntax_scale * frame[:, i] for i, lang in enumerate(langs)
        }
    elif spec.mode == "per_language_subspace":
        bases = {
            lang: OrthonormalBasis(frame[:, i * spec.rank : (i + 1) * spec.rank])
            for i, lang in enumerate(langs)
        }
        centers = _spread_unit_vectors(rng, len(langs), spec.rank)
        lang_coeffs = {
            lang: spec.syntax_scale * centers[i] for i, lang in enumerate(langs)
        }
    else:
        shared_basis = OrthonormalBasis(frame[:, : spec.rank])
        common_mean = _COMMON_MEAN_SCALE * spec.syntax_scale * frame[:, spec.rank]
        centers = _spread_unit_vectors(rng, len(langs), spec.rank)
        lang_coeffs = {
            lang: spec.syntax_scale * centers[i] for i, lang in enumerate(langs)
        }

    def syntax_rows(lang: str, count: int) -> np.ndarray:
        if spec.mode == "constant_offset":
            return np.tile(offsets[lang], (count, 1))
        if spec.mode == "per_language_subspace":
            scatter = (_LOCAL_SCATTER * spec.syntax_scale / np.sqrt(spec.rank)
                       ) * rng.standard_normal((count, spec.rank))
            coeff = lang_coeffs[lang] + scatter
            return coeff @ bases[lang].columns.T
        scatter = (_SHARED_SCATTER * spec.syntax_scale / np.sqrt(spec.rank)
                   ) * rng.standard_normal((count, spec.rank))
        coeff = lang_coeffs[lang] + scatter
        return common_mean + coeff @ shared_basis.columns.T

    def semantic_rows(count: int, demean: bool) -> np.ndarray:
        coeff = spec.semantic_scale * _unit_rows(rng, count, d_sem)
        if demean:
            coeff = coeff - coeff.mean(axis=0)
        return coeff @ semantic_basis.T

    def noise_rows(count: int) -> np.ndarray:
        if spec.noise_scale == 0:
            return np.zeros((count, d))
        return spec.noise_scale * rng.standard_normal((count, d))

    model_name = f"synth/{spec.mode}"

    # Estimation data: independent, non-parallel semantics per language.
    est_sets, est_semantics, est_syntax = {}, {}, {}
    n_est = spec.estimation_n
    for lang in langs:
        sem = semantic_rows(n_est, demean=True)
        syn = syntax_rows(lang, n_est)
        vectors = sem + syn + noise_rows(n_est)
        est_semantics[lang] = sem
        est_syntax[lang] = syn
        est_sets[lang] = EmbeddingSet(
            language=lang,
            kind="mean",
            model_name=model_name,
            ids=tuple(f"{lang}:e{i:05d}" for i in range(n_est)),
            vectors=vectors,
        )

    # Corpus: one semantic vector per concept, shared by all languages.
    corpus_sem = semantic_rows(spec.concepts, demean=True)
    corpus_sets, corpus_syntax = {}, {}
    for lang in langs:
        syn = syntax_rows(lang, spec.concepts)
        vectors = corpus_sem + syn + noise_rows(spec.concepts)
        corpus_syntax[lang] = syn
        corpus_sets[lang] = EmbeddingSet(
            language=lang,
            kind="mean",
            model_name=model_name,
            ids=tuple(f"{lang}:c{i:04d}" for i in range(spec.concepts)),
            vectors=vectors,
        )
    concepts = tuple(
        {lang: f"{lang}:c{i:04d}" for lang in langs} for i in range(spec.concepts)
    )

    truth = GroundTruth(
        mode=spec.mode,
        semantic_basis=semantic_basis,
        corpus_semantics=corpus_sem,
        corpus_syntax=corpus_syntax,
        estimation_semantics=est_semantics,
        estimation_syntax=est_syntax,
        offsets=offsets,
        bases=bases,
        shared_basis=shared_basis,
        common_mean=common_mean,
        language_coefficients=lang_coeffs,
    )
    return SynthResult(
        spec=spec,
        estimation=EstimationSet(sets=est_sets),
        corpus=ParallelCorpus(concepts=concepts, sets=corpus_sets),
        truth=truth,
    )


GROUND_TRUTH_FORMAT = "lace-ground-truth"
GROUND_TRUTH_VERSION = 1


def write_ground_truth(truth: GroundTruth, path) -> None:
    """Persist the planted quantities needed for oracle evaluation.

    Corpus-level semantics/syntax and the planted structures are stored;
    the per-language estimation draws are generation-time details and are
    not serialized.
    """
    from ._blobio import write_manifest_blobs

    arrays = [
        ("semantic_basis", truth.semantic_basis),
        ("corpus_semantics", truth.corpus_semantics),
    ]
    for lang in sorted(truth.corpus_syntax):
        arrays.append((f"syntax:{lang}", truth.corpus_syntax[lang]))
    if truth.offsets is not None:
        for lang in sorted(truth.offsets):
            arrays.append((f"offset:{lang}", truth.offsets[lang][None, :]))
    if truth.bases is not None:
        for lang in sorted(truth.bases):
            arrays.append((f"basis:{lang}", truth.bases[lang].columns))
    if truth.shared_basis is not None:
        arrays.append(("shared_basis", truth.shared_basis.columns))
        arrays.append(("common_mean", truth.common_mean[None, :]))
    if truth.language_coefficients is not None:
        for lang in sorted(truth.language_coefficients):
            arrays.append((f"coeff:{lang}", truth.language_coefficients[lang][None, :]))
    write_manifest_blobs(
        path,
        {"format": GROUND_TRUTH_FORMAT, "version": GROUND_TRUTH_VERSION, "mode": truth.mode},
        arrays,
    )


def read_ground_truth(path) -> GroundTruth:
    from ._blobio import read_manifest_blobs

    manifest, arrays = read_manifest_blobs(path, GROUND_TRUTH_FORMAT, GROUND_TRUTH_VERSION)

    def group(prefix: str) -> dict[str, np.ndarray]:
        return {
            name.split(":", 1)[1]: a
            for name, a in arrays.items()
            if name.startswith(prefix)
        }

    offsets = {lang: a[0] for lang, a in group("offset:").items()} or None
    bases = {lang: OrthonormalBasis(a) for lang, a in group("basis:").items()} or None
    coeffs = {lang: a[0] for lang, a in group("coeff:").items()} or None
    return GroundTruth(
        mode=manifest["mode"],
        semantic_basis=arrays["semantic_basis"],
        corpus_semantics=arrays["corpus_semantics"],
        corpus_syntax=group("syntax:"),
        offsets=offsets,
        bases=bases,
        shared_basis=(
            OrthonormalBasis(arrays["shared_basis"]) if "shared_basis" in arrays else None
        ),
        common_mean=arrays["common_mean"][0] if "common_mean" in arrays else None,
        language_coefficients=coeffs,
    )


def oracle_corpus(corpus: ParallelCorpus, truth: GroundTruth) -> ParallelCorpus:
    """The same corpus with every embedding replaced by its planted semantic
    vector: the ideal language-agnostic representation."""
    id_to_concept = {
        sid: i
        for i, concept in enumerate(corpus.concepts)
        for sid in concept.values()
    }
    sets = {}
    for lang, emb_set in corpus.sets.items():
        rows = np.array(
            [truth.corpus_semantics[id_to_concept[sid]] for sid in emb_set.ids]
        )
        sets[lang] = EmbeddingSet(
            language=lang,
            kind=emb_set.kind,
            model_name=emb_set.model_name,
            ids=emb_set.ids,
            vectors=rows,
            transform="oracle",
        )
    return corpus.with_sets(sets)
