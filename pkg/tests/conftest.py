import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lace.data import EmbeddingSet, EstimationSet
from lace.synth import SynthSpec, generate


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def make_set(lang, vectors, kind="mean", prefix=None, model_name="test"):
    vectors = np.asarray(vectors, dtype=np.float64)
    prefix = prefix or lang
    return EmbeddingSet(
        language=lang,
        kind=kind,
        model_name=model_name,
        ids=tuple(f"{prefix}:{i:04d}" for i in range(vectors.shape[0])),
        vectors=vectors,
    )


def make_estimation(**lang_vectors) -> EstimationSet:
    return EstimationSet(
        sets={lang: make_set(lang, vecs) for lang, vecs in lang_vectors.items()}
    )


@pytest.fixture(scope="session")
def shared_synth():
    """A mid-size shared-subspace world reused by several test modules."""
    spec = SynthSpec(
        dim=32,
        languages=tuple(f"lang{i}" for i in range(4)),
        concepts=60,
        mode="shared_subspace",
        rank=3,
        semantic_scale=1.0,
        syntax_scale=3.0,
        noise_scale=0.05,
        seed=11,
        estimation_per_language=300,
    )
    return generate(spec)
