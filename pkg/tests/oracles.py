"""Independent oracle implementations used to cross-check the library.

Each oracle takes a different computational route than the code under test
(eigendecompositions instead of SVD, normal equations instead of the SVD
pseudo-inverse, explicit sorting instead of comparison counting, scalar
accumulation instead of vectorized means) so agreement is meaningful.
"""

from __future__ import annotations

import math

import numpy as np


def gram_singular_values(a: np.ndarray) -> np.ndarray:
    """Singular values of ``a`` via the eigenvalues of the Gram matrix A^T A."""
    gram = np.asarray(a, dtype=np.float64).T @ np.asarray(a, dtype=np.float64)
    eigvals = np.linalg.eigvalsh(gram)
    return np.sqrt(np.clip(eigvals, 0.0, None))[::-1]


def normal_equations_pinv(a: np.ndarray) -> np.ndarray:
    """(A^T A)^-1 A^T for a full-column-rank matrix, via a direct solve."""
    a = np.asarray(a, dtype=np.float64)
    return np.linalg.solve(a.T @ a, a.T)


def covariance_eigen_pca(x: np.ndarray, k: int):
    """PCA via eigendecomposition of the sample covariance matrix.

    Returns (components (d, k), coords (n, k), explained_variance (k,)).
    """
    x = np.asarray(x, dtype=np.float64)
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (x.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    components = eigvecs[:, order]
    return components, centered @ components, eigvals[order]


def largest_principal_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Largest canonical angle (radians) between two orthonormal bases."""
    overlap = np.asarray(u).T @ np.asarray(v)
    smallest_cosine = np.linalg.svd(overlap, compute_uv=False).min()
    return float(np.arccos(np.clip(smallest_cosine, -1.0, 1.0)))


def scalar_mean(rows) -> np.ndarray:
    """Per-coordinate mean via math.fsum over Python floats."""
    rows = [list(map(float, r)) for r in rows]
    n = len(rows)
    return np.array([math.fsum(r[j] for r in rows) / n for j in range(len(rows[0]))])


def mrr_oracle(ranks) -> float:
    return 100.0 * math.fsum(1.0 / r for r in ranks) / len(ranks)


def full_sort_rank(query, db_rows, gold_id, similarity="cosine") -> int:
    """Rank of gold by explicitly sorting (similarity desc, id asc)."""

    def sim(vec):
        q = np.asarray(query, dtype=np.float64)
        v = np.asarray(vec, dtype=np.float64)
        if similarity == "dot":
            return float(q @ v)
        qn = np.linalg.norm(q) or 1.0
        vn = np.linalg.norm(v) or 1.0
        return float(q @ v) / (qn * vn)

    scored = sorted(
        ((sim(vec), sid) for sid, _lang, vec in db_rows),
        key=lambda pair: (-pair[0], pair[1]),
    )
    for position, (_s, sid) in enumerate(scored, start=1):
        if sid == gold_id:
            return position
    raise AssertionError(f"gold {gold_id!r} not present")


def brute_force_db_members(corpus, config, source, target, concept_index,
                           exclude_parallel=True) -> set[tuple[str, str]]:
    """Expected database membership as a set comprehension over the corpus."""
    concept = corpus.concepts[concept_index]
    code_langs = {l for l in corpus.sets if l != "english"}
    if config in ("monolingual", "text2code_monolingual"):
        langs = {target}
    elif config == "source_excluded_multilingual":
        langs = code_langs - {source}
    else:
        langs = code_langs
    members = {
        (sid, lang)
        for lang in langs
        for sid in corpus.sets[lang].ids
    }
    if config == "source_included_multilingual" and source in concept:
        members -= {(concept[source], source)}
    if exclude_parallel and config in (
        "source_excluded_multilingual",
        "source_included_multilingual",
    ):
        members -= {
            (sid, lang)
            for lang, sid in concept.items()
            if lang != target and lang in langs
        }
    return members


def confusion_matrix_accuracy(true_labels, predicted_labels, classes) -> float:
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=int)
    for t, p in zip(true_labels, predicted_labels):
        counts[index[t], index[p]] += 1
    return 100.0 * np.trace(counts) / counts.sum()
