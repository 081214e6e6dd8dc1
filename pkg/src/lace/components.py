"""Fitting and applying language-component removal.

Three estimators of the language-specific part of an embedding, all fit
from non-parallel per-language estimation data:

* ``centering``  - one mean vector per language; removal subtracts it.
* ``lrd``        - one rank-r subspace per language (top right singular
                   vectors of that language's embedding matrix); removal
                   projects the subspace out.
* ``cs_lrd``     - a single rank-r subspace shared by every language, fit
                   jointly with a common mean constrained to be orthogonal
                   to the subspace; removal projects the shared subspace out
                   and therefore also applies to languages never seen during
                   fitting.

Fitted models are immutable and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._blobio import read_manifest_blobs, write_manifest_blobs
from .data import EmbeddingSet, EstimationSet
from .errors import (
    CorruptionError,
    RangeError,
    UnknownLanguageError,
    ValidationError,
)
from .linalg import OrthonormalBasis, project_rows, topk_svd
from .validation import as_vector

__all__ = [
    "METHODS",
    "CS_LRD_MODES",
    "ComponentModel",
    "fit_centering",
    "fit_lrd",
    "fit_cs_lrd",
    "apply",
    "apply_set",
    "write_model",
    "read_model",
]

METHODS = ("centering", "lrd", "cs_lrd")
CS_LRD_MODES = ("means", "pooled")

CS_LRD_MAX_ITER = 50
CS_LRD_OBJECTIVE_TOL = 1e-10
MODEL_FORMAT = "lace-model"
MODEL_VERSION = 1
BASIS_CORRUPTION_TOL = 1e-6


@dataclass(frozen=True)
class ComponentModel:
    """A fitted language-component estimator.

    Exactly one family of fields is populated per method: ``means`` for
    centering, ``bases`` for lrd, and (``shared_basis``, ``common_mean``,
    ``coefficients``) for cs_lrd. The cs_lrd common mean is orthogonal to
    every column of the shared basis.
    """

    method: str
    languages: tuple[str, ...]
    dim: int
    rank: int | None = None
    means: dict[str, np.ndarray] | None = None
    bases: dict[str, OrthonormalBasis] | None = None
    shared_basis: OrthonormalBasis | None = None
    common_mean: np.ndarray | None = None
    coefficients: np.ndarray | None = None   # (n_languages, rank), fit residual info
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"method {self.method!r} not one of {METHODS}")
        object.__setattr__(self, "languages", tuple(self.languages))
        if self.method == "centering":
            if self.means is None or set(self.means) != set(self.languages):
                raise ValidationError("centering model needs one mean per language")
        elif self.method == "lrd":
            if self.bases is None or set(self.bases) != set(self.languages):
                raise ValidationError("lrd model needs one basis per language")
        else:
            if self.shared_basis is None or self.common_mean is None:
                raise ValidationError("cs_lrd model needs shared basis and common mean")
            dots = self.shared_basis.columns.T @ self.common_mean
            if dots.size and np.abs(dots).max() > 1e-8:
                raise ValidationError(
                    "cs_lrd common mean is not orthogonal to the shared subspace"
                )

    def describe(self) -> str:
        if self.method == "centering":
            return "centering"
        return f"{self.method}(r={self.rank})"


def fit_centering(est: EstimationSet) -> ComponentModel:
    """Per-language arithmetic mean of the estimation embeddings."""
    means = {lang: est.matrix(lang).mean(axis=0) for lang in est.languages}
    return ComponentModel(
        method="centering",
        languages=tuple(est.languages),
        dim=est.dim,
        means=means,
    )


def fit_lrd(est: EstimationSet, rank: int) -> ComponentModel:
    """Per-language top-``rank`` right singular vectors of the embedding matrix."""
    bases = {}
    for lang in est.languages:
        mat = est.matrix(lang)
        limit = min(mat.shape)
        if not 1 <= rank <= limit:
            raise RangeError(
                f"rank={rank} outside [1, {limit}] for language {lang!r} "
                f"({mat.shape[0]} snippets, dim {mat.shape[1]})"
            )
        bases[lang] = OrthonormalBasis(topk_svd(mat, rank).vt.T)
    return ComponentModel(
        method="lrd",
        languages=tuple(est.languages),
        dim=est.dim,
        rank=rank,
        bases=bases,
    )


def _cs_lrd_objective(m: np.ndarray, common: np.ndarray, basis_cols: np.ndarray) -> float:
    centered = m - common[:, None]
    residual = centered - basis_cols @ (basis_cols.T @ centered)
    return float(np.sum(residual**2))


def fit_cs_lrd(est: EstimationSet, rank: int, mode: str = "means") -> ComponentModel:
    """Shared syntactic subspace across all languages.

    ``means`` mode works on the d x n_languages matrix of per-language mean
    embeddings and jointly fits a common mean plus a rank-r subspace under
    the constraint common_mean orthogonal to the subspace, by alternating
    exact minimization steps (each step provably does not increase the
    objective). ``pooled`` mode stacks the per-language mean-centered
    embedding matrices instead, drops the common-mean term, and admits
    ranks up to the embedding dimension.
    """
    if mode not in CS_LRD_MODES:
        raise ValidationError(f"mode {mode!r} not one of {CS_LRD_MODES}")
    languages = est.languages
    n_langs = len(languages)
    d = est.dim
    mean_matrix = np.column_stack([est.matrix(lang).mean(axis=0) for lang in languages])

    if mode == "pooled":
        if not 1 <= rank <= d:
            raise RangeError(f"rank={rank} outside [1, {d}] in pooled mode")
        pooled = np.hstack(
            [(est.matrix(lang) - est.matrix(lang).mean(axis=0)).T for lang in languages]
        )
        basis = OrthonormalBasis(topk_svd(pooled, rank).u)
        common = np.zeros(d)
        coeffs = (mean_matrix - common[:, None]).T @ basis.columns
        metadata = {"mode": mode, "iterations": 0, "converged": True, "objective": []}
        return ComponentModel(
            method="cs_lrd",
            languages=tuple(languages),
            dim=d,
            rank=rank,
            shared_basis=basis,
            common_mean=common,
            coefficients=coeffs,
            metadata=metadata,
        )

    max_rank = min(n_langs - 1, d)
    if not 1 <= rank <= max_rank:
        raise RangeError(
            f"rank={rank} outside [1, {max_rank}] in means mode "
            f"({n_langs} languages, dim {d})"
        )

    col_mean = mean_matrix.mean(axis=1)
    # Naive initializer: center at the plain column mean, then truncated SVD.
    common = col_mean.copy()
    basis_cols = topk_svd(mean_matrix - common[:, None], rank).u
    objective = _cs_lrd_objective(mean_matrix, common, basis_cols)
    history = [objective]
    converged = False
    iterations = 0
    for iterations in range(1, CS_LRD_MAX_ITER + 1):
        common = col_mean - basis_cols @ (basis_cols.T @ col_mean)
        basis_cols = topk_svd(mean_matrix - common[:, None], rank).u
        new_objective = _cs_lrd_objective(mean_matrix, common, basis_cols)
        history.append(new_objective)
        if abs(objective - new_objective) < CS_LRD_OBJECTIVE_TOL:
            objective = new_objective
            converged = True
            break
        objective = new_objective
    # One last exact mean step so the orthogonality constraint holds for the
    # final basis; it can only lower the objective further.
    common = col_mean - basis_cols @ (basis_cols.T @ col_mean)
    history.append(_cs_lrd_objective(mean_matrix, common, basis_cols))

    basis = OrthonormalBasis(basis_cols)
    coeffs = (mean_matrix - common[:, None]).T @ basis.columns
    metadata = {
        "mode": mode,
        "iterations": iterations,
        "converged": converged,
        "objective": history,
    }
    if not converged:
        metadata["warning"] = (
            f"alternating fit did not converge in {CS_LRD_MAX_ITER} iterations; "
            "best iterate returned"
        )
    return ComponentModel(
        method="cs_lrd",
        languages=tuple(languages),
        dim=d,
        rank=rank,
        shared_basis=basis,
        common_mean=common,
        coefficients=coeffs,
        metadata=metadata,
    )


def _basis_for(model: ComponentModel, lang: str) -> OrthonormalBasis:
    if model.method == "lrd":
        try:
            return model.bases[lang]
        except KeyError:
            raise UnknownLanguageError(
                f"language {lang!r} not in model languages {list(model.languages)}"
            ) from None
    return model.shared_basis


def apply(model: ComponentModel, e, lang: str, invert: bool = False) -> np.ndarray:
    """Remove the fitted language component from one embedding.

    ``invert`` keeps the projection onto the subspace instead of the
    residual, for lrd and cs_lrd only; it exists for comparison experiments
    and is a no-op for centering.
    """
    e = as_vector(e, "e")
    if e.shape[0] != model.dim:
        raise ValidationError(
            f"embedding length {e.shape[0]} does not match model dim {model.dim}"
        )
    if model.method == "centering":
        try:
            return e - model.means[lang]
        except KeyError:
            raise UnknownLanguageError(
                f"language {lang!r} not in model languages {list(model.languages)}"
            ) from None
    basis = _basis_for(model, lang)
    projection = basis.columns @ (basis.columns.T @ e) if basis.rank else np.zeros_like(e)
    return projection if invert else e - projection


def apply_set(model: ComponentModel, emb_set: EmbeddingSet, invert: bool = False) -> EmbeddingSet:
    """Row-wise :func:`apply` over a whole EmbeddingSet.

    Ids and metadata are preserved; the output's ``transform`` field records
    the removal method.
    """
    vectors = np.asarray(emb_set.vectors, dtype=np.float64)
    if emb_set.dim != model.dim:
        raise ValidationError(
            f"set dim {emb_set.dim} does not match model dim {model.dim}"
        )
    if model.method == "centering":
        if emb_set.language not in model.means:
            raise UnknownLanguageError(
                f"language {emb_set.language!r} not in model languages "
                f"{list(model.languages)}"
            )
        out = vectors - model.means[emb_set.language]
    else:
        basis = _basis_for(model, emb_set.language)
        projection = project_rows(vectors, basis)
        out = projection if invert else vectors - projection
    label = model.describe() + (",inverted" if invert else "")
    return replace(emb_set, vectors=out.astype(emb_set.vectors.dtype), transform=label)


# ---------------------------------------------------------------------------
# Model files: one JSON manifest line, then named float64 blobs.


def _array_entries(model: ComponentModel):
    if model.method == "centering":
        for lang in model.languages:
            yield f"mean:{lang}", np.asarray(model.means[lang], dtype=np.float64)[None, :]
    elif model.method == "lrd":
        for lang in model.languages:
            yield f"basis:{lang}", np.asarray(model.bases[lang].columns, dtype=np.float64)
    else:
        yield "shared_basis", np.asarray(model.shared_basis.columns, dtype=np.float64)
        yield "common_mean", np.asarray(model.common_mean, dtype=np.float64)[None, :]
        yield "coefficients", np.asarray(model.coefficients, dtype=np.float64)


def write_model(model: ComponentModel, path) -> None:
    """Serialize a model losslessly (float64 payload)."""
    manifest = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "method": model.method,
        "dim": model.dim,
        "languages": list(model.languages),
        "metadata": model.metadata,
    }
    if model.rank is not None:
        manifest["rank"] = model.rank
    write_manifest_blobs(path, manifest, list(_array_entries(model)))


def read_model(path) -> ComponentModel:
    """Load a model file, re-validating basis orthonormality on the way in."""
    path = Path(path)
    manifest, arrays = read_manifest_blobs(path, MODEL_FORMAT, MODEL_VERSION)

    def checked_basis(name: str) -> OrthonormalBasis:
        cols = arrays[name]
        gram = cols.T @ cols
        deviation = np.abs(gram - np.eye(cols.shape[1])).max() if gram.size else 0.0
        if deviation > BASIS_CORRUPTION_TOL:
            raise CorruptionError(
                f"{path}: basis {name!r} fails orthonormality by {deviation:.3e}"
            )
        return OrthonormalBasis(cols)

    method = manifest["method"]
    languages = tuple(manifest["languages"])
    kwargs = dict(
        method=method,
        languages=languages,
        dim=manifest["dim"],
        rank=manifest.get("rank"),
        metadata=manifest.get("metadata", {}),
    )
    if method == "centering":
        kwargs["means"] = {lang: arrays[f"mean:{lang}"][0] for lang in languages}
    elif method == "lrd":
        kwargs["bases"] = {lang: checked_basis(f"basis:{lang}") for lang in languages}
    else:
        kwargs["shared_basis"] = checked_basis("shared_basis")
        kwargs["common_mean"] = arrays["common_mean"][0]
        kwargs["coefficients"] = arrays["coefficients"]
    return ComponentModel(**kwargs)
