"""Scikit-learn style wrappers around the fitting and probing primitives.

These let the removal step drop into sklearn pipelines: ``fit(X, y)`` takes
an (n, d) matrix with per-row language labels, ``transform(X, y)`` removes
the fitted language component. Language labels stay required at transform
time for the per-language methods (centering, lrd); the shared-subspace
method transforms unlabeled data too.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import components, probe
from .data import EmbeddingSet, EstimationSet
from .errors import ValidationError
from .validation import as_matrix

__all__ = ["LanguageComponentRemover", "LanguageProbe"]

DEFAULT_RANKS = {"lrd": 10, "cs_lrd": 9}


def _grouped_sets(X, y) -> EstimationSet:
    X = as_matrix(X, "X")
    y = np.asarray(y)
    if y.shape[0] != X.shape[0]:
        raise ValidationError(f"{y.shape[0]} labels for {X.shape[0]} rows")
    sets = {}
    for lang in sorted({str(l) for l in y}):
        rows = np.nonzero(y.astype(str) == lang)[0]
        sets[lang] = EmbeddingSet(
            language=lang,
            kind="mean",
            model_name="in-memory",
            ids=tuple(f"r{i:07d}" for i in rows),
            vectors=X[rows],
        )
    return EstimationSet(sets=sets)


class LanguageComponentRemover(BaseEstimator, TransformerMixin):
    """Removes the language-specific component from embeddings.

    Parameters
    ----------
    method:
        "centering", "lrd", or "cs_lrd".
    rank:
        Subspace rank for lrd / cs_lrd. None picks the conventional default
        (10 for lrd, 9 for cs_lrd); for cs_lrd in means mode the rank is
        clamped to n_languages - 1 with a warning when it is too large.
    mode:
        cs_lrd fitting mode, "means" or "pooled".
    invert:
        Keep the projection instead of the residual (debugging aid).
    """

    def __init__(self, method: str = "cs_lrd", rank: int | None = None,
                 mode: str = "means", invert: bool = False):
        self.method = method
        self.rank = rank
        self.mode = mode
        self.invert = invert

    def fit(self, X, y):
        est = _grouped_sets(X, y)
        rank = self.rank if self.rank is not None else DEFAULT_RANKS.get(self.method)
        if self.method == "cs_lrd" and self.mode == "means":
            max_rank = min(len(est.languages) - 1, est.dim)
            if rank > max_rank:
                warnings.warn(
                    f"cs_lrd rank {rank} exceeds the means-mode limit "
                    f"{max_rank}; clamping (use mode='pooled' for higher ranks)",
                    UserWarning,
                    stacklevel=2,
                )
                rank = max_rank
        if self.method == "centering":
            self.model_ = components.fit_centering(est)
        elif self.method == "lrd":
            self.model_ = components.fit_lrd(est, rank)
        elif self.method == "cs_lrd":
            self.model_ = components.fit_cs_lrd(est, rank, mode=self.mode)
        else:
            raise ValidationError(f"unknown method {self.method!r}")
        self.languages_ = list(self.model_.languages)
        self.n_features_in_ = est.dim
        return self

    def transform(self, X, y=None):
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit before transform")
        X = as_matrix(X, "X")
        model = self.model_
        if model.method == "cs_lrd":
            basis = model.shared_basis
            projection = (X @ basis.columns) @ basis.columns.T
            return projection if self.invert else X - projection
        if y is None:
            raise ValidationError(
                f"{model.method} transform needs per-row language labels"
            )
        y = np.asarray(y).astype(str)
        if y.shape[0] != X.shape[0]:
            raise ValidationError(f"{y.shape[0]} labels for {X.shape[0]} rows")
        out = np.empty_like(X, dtype=np.float64)
        for lang in np.unique(y):
            rows = np.nonzero(y == lang)[0]
            if model.method == "centering":
                if lang not in model.means:
                    raise ValidationError(f"unknown language {lang!r}")
                out[rows] = X[rows] - model.means[lang]
            else:
                if lang not in model.bases:
                    raise ValidationError(f"unknown language {lang!r}")
                basis = model.bases[lang]
                projection = (X[rows] @ basis.columns) @ basis.columns.T
                out[rows] = projection if self.invert else X[rows] - projection
        return out


class LanguageProbe(BaseEstimator, ClassifierMixin):
    """Linear language-identification probe with sklearn fit/predict."""

    def __init__(self, lr: float = 0.1, epochs: int = 200, l2: float = 1e-4,
                 seed: int = 0):
        self.lr = lr
        self.epochs = epochs
        self.l2 = l2
        self.seed = seed

    def fit(self, X, y):
        est = _grouped_sets(X, y)
        hyper = probe.ProbeHyper(lr=self.lr, epochs=self.epochs, l2=self.l2,
                                 seed=self.seed)
        self.probe_ = probe.train_probe(est, hyper)
        self.classes_ = np.array(self.probe_.languages)
        self.n_features_in_ = est.dim
        return self

    def predict(self, X):
        if not hasattr(self, "probe_"):
            raise NotFittedError("call fit before predict")
        return np.array(self.probe_.predict(as_matrix(X, "X")))

    def decision_function(self, X):
        if not hasattr(self, "probe_"):
            raise NotFittedError("call fit before predict")
        return self.probe_.logits(as_matrix(X, "X"))
