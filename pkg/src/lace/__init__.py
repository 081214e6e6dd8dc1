"""lace: language-agnostic code embeddings.

Decomposes multilingual code embeddings into a language-specific and a
language-agnostic part, removes the language-specific part (per-language
centering, per-language low-rank subspaces, or one shared subspace), and
evaluates the effect with probing and cross-lingual retrieval protocols.
"""

from .components import (
    ComponentModel,
    apply,
    apply_set,
    fit_centering,
    fit_cs_lrd,
    fit_lrd,
    read_model,
    write_model,
)
from .data import (
    EmbeddingSet,
    EstimationSet,
    ParallelCorpus,
    read_embx,
    read_parallel_corpus,
    write_embx,
    write_parallel_corpus,
)
from .errors import (
    CorruptionError,
    FormatError,
    RangeError,
    UnknownLanguageError,
    ValidationError,
)
from .estimators import LanguageComponentRemover, LanguageProbe
from .linalg import OrthonormalBasis, PcaResult, SvdResult, pca, pseudo_inverse, remove_projection, topk_svd
from .probe import ProbeHyper, ProbeModel, eval_probe, export_pca, train_probe
from .retrieval import (
    RetrievalReport,
    RetrievalTask,
    ablation_estimation_size,
    build_database,
    eval_code2code,
    eval_text2code,
    ground_truth_mrr,
    mrr,
    rank_of_gold,
)
from .synth import GroundTruth, SynthResult, SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ComponentModel",
    "EmbeddingSet",
    "EstimationSet",
    "GroundTruth",
    "LanguageComponentRemover",
    "LanguageProbe",
    "OrthonormalBasis",
    "ParallelCorpus",
    "PcaResult",
    "ProbeHyper",
    "ProbeModel",
    "RetrievalReport",
    "RetrievalTask",
    "SvdResult",
    "SynthResult",
    "SynthSpec",
    "ValidationError",
    "RangeError",
    "FormatError",
    "CorruptionError",
    "UnknownLanguageError",
    "ablation_estimation_size",
    "apply",
    "apply_set",
    "build_database",
    "eval_code2code",
    "eval_probe",
    "eval_text2code",
    "export_pca",
    "fit_centering",
    "fit_cs_lrd",
    "fit_lrd",
    "generate",
    "ground_truth_mrr",
    "mrr",
    "pca",
    "pseudo_inverse",
    "rank_of_gold",
    "read_embx",
    "read_model",
    "read_parallel_corpus",
    "remove_projection",
    "topk_svd",
    "train_probe",
    "write_embx",
    "write_model",
    "write_parallel_corpus",
]
