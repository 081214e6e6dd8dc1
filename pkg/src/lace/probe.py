"""Linear language-identification probe and PCA cluster export.

The probe is multinomial logistic regression trained by full-batch gradient
descent from zero-initialized weights, so training is deterministic and the
recorded per-step losses are monotone non-increasing at the default learning
rate. How well it identifies languages before and after removal measures how
much language identity survives in the embeddings. The PCA export emits
plot-ready coordinates (no figures are produced here).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import components
from .data import EmbeddingSet, EstimationSet
from .errors import ValidationError
from .linalg import pca

__all__ = [
    "ProbeHyper",
    "ProbeModel",
    "train_probe",
    "eval_probe",
    "probe_accuracy_report",
    "export_pca",
    "write_pca_csv",
]

# Defaults for full-scale runs; synthetic acceptance fixtures use 1000/200/500.
DEFAULT_SPLIT_SIZES = {"train": 24_000, "val": 6_000, "test": 10_000}


@dataclass(frozen=True)
class ProbeHyper:
    lr: float = 0.1
    epochs: int = 200
    l2: float = 1e-4
    seed: int = 0


@dataclass(frozen=True)
class ProbeModel:
    """Linear classifier over languages: logits = x @ weights.T + bias."""

    weights: np.ndarray = field(repr=False)   # (n_languages, d)
    bias: np.ndarray = field(repr=False)      # (n_languages,)
    languages: tuple[str, ...]
    metadata: dict = field(default_factory=dict)

    def logits(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.weights.shape[1]:
            raise ValidationError(
                f"feature dim {x.shape[-1]} does not match probe dim "
                f"{self.weights.shape[1]}"
            )
        return x @ self.weights.T + self.bias

    def predict(self, x: np.ndarray) -> list[str]:
        # argmax takes the first maximum, i.e. ties go to the first language.
        idx = np.argmax(self.logits(x), axis=-1)
        return [self.languages[i] for i in np.atleast_1d(idx)]


def _stack(data: EstimationSet) -> tuple[np.ndarray, np.ndarray, list[str]]:
    languages = data.languages
    xs = [data.matrix(lang) for lang in languages]
    ys = [np.full(x.shape[0], i) for i, x in enumerate(xs)]
    return np.vstack(xs), np.concatenate(ys), languages


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def train_probe(train: EstimationSet, hyper: ProbeHyper | None = None) -> ProbeModel:
    """Full-batch gradient descent on softmax cross-entropy with L2.

    Inputs are rescaled to unit mean squared norm during optimization (the
    scale is folded back into the returned weights), which keeps the default
    learning rate inside the stable region for any input magnitude.
    Initialization is zero, so the seed only labels the run.
    """
    hyper = hyper or ProbeHyper()
    x, y, languages = _stack(train)
    if len(languages) < 2:
        raise ValidationError("probe needs at least 2 languages")
    n, d = x.shape
    n_classes = len(languages)
    scale = float(np.sqrt(np.mean(np.sum(x**2, axis=1))))
    scale = scale if scale > 0 else 1.0
    xs = x / scale
    onehot = np.eye(n_classes)[y]

    weights = np.zeros((n_classes, d))
    bias = np.zeros(n_classes)
    losses = []

    def loss_of(w, b) -> float:
        p = _softmax(xs @ w.T + b)
        ce = -np.mean(np.log(np.clip(p[np.arange(n), y], 1e-300, None)))
        return float(ce + 0.5 * hyper.l2 * np.sum(w**2))

    for _ in range(hyper.epochs):
        losses.append(loss_of(weights, bias))
        probs = _softmax(xs @ weights.T + bias)
        g = (probs - onehot) / n
        weights = weights - hyper.lr * (g.T @ xs + hyper.l2 * weights)
        bias = bias - hyper.lr * g.sum(axis=0)
    final_loss = loss_of(weights, bias)
    losses.append(final_loss)

    return ProbeModel(
        weights=weights / scale,
        bias=bias,
        languages=tuple(languages),
        metadata={
            "epochs": hyper.epochs,
            "lr": hyper.lr,
            "l2": hyper.l2,
            "seed": hyper.seed,
            "final_loss": final_loss,
            "losses": losses,
        },
    )


def eval_probe(model: ProbeModel, test: EstimationSet) -> float:
    """Argmax accuracy as a percentage; ties go to the first language."""
    unknown = set(test.languages) - set(model.languages)
    if unknown:
        raise ValidationError(f"test languages unknown to the probe: {sorted(unknown)}")
    correct = 0
    total = 0
    lang_index = {lang: i for i, lang in enumerate(model.languages)}
    for lang in test.languages:
        x = test.matrix(lang)
        pred = np.argmax(model.logits(x), axis=1)
        correct += int(np.count_nonzero(pred == lang_index[lang]))
        total += x.shape[0]
    if total == 0:
        raise ValidationError("empty test set")
    return 100.0 * correct / total


def probe_accuracy_report(
    train: EstimationSet,
    test: EstimationSet,
    removal_model: components.ComponentModel | None = None,
    hyper: ProbeHyper | None = None,
) -> dict:
    """Train and evaluate a probe, optionally after removal.

    The removal model is applied exactly once per split, to train and test
    alike, so the probe always sees a consistently transformed space.
    """
    if removal_model is not None:
        train = EstimationSet(
            sets={
                lang: components.apply_set(removal_model, train.sets[lang])
                for lang in train.languages
            }
        )
        test = EstimationSet(
            sets={
                lang: components.apply_set(removal_model, test.sets[lang])
                for lang in test.languages
            }
        )
    hyper = hyper or ProbeHyper()
    probe = train_probe(train, hyper)
    accuracy = eval_probe(probe, test)
    return {
        "accuracy": accuracy,
        "chance": 100.0 / len(probe.languages),
        "languages": list(probe.languages),
        "method": removal_model.describe() if removal_model is not None else None,
        "final_loss": probe.metadata["final_loss"],
        "hyper": {
            "lr": hyper.lr,
            "epochs": hyper.epochs,
            "l2": hyper.l2,
            "seed": hyper.seed,
        },
    }


def export_pca(sets: list[EmbeddingSet], k: int) -> tuple[list[str], list[tuple]]:
    """PCA coordinates of the pooled (label-blind) data.

    Returns the CSV header and one ``(id, lang, pc1..pck)`` row per point,
    in input order.
    """
    if not sets:
        raise ValidationError("no embedding sets given")
    pooled = np.vstack([np.asarray(s.vectors, dtype=np.float64) for s in sets])
    result = pca(pooled, k)
    header = ["id", "lang"] + [f"pc{i + 1}" for i in range(k)]
    rows = []
    offset = 0
    for s in sets:
        for i, sid in enumerate(s.ids):
            rows.append((sid, s.language, *result.coords[offset + i]))
        offset += s.n
    return header, rows


def write_pca_csv(sets: list[EmbeddingSet], k: int, path) -> None:
    header, rows = export_pca(sets, k)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([row[0], row[1], *(repr(float(v)) for v in row[2:])])
