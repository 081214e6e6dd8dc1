"""lace-extractor: EMBX v1 embedding files from pretrained encoders."""

from .embx import write_embx
from .extract import (
    EMBEDDING_KINDS,
    ExtractionError,
    ExtractionJob,
    ExtractionResult,
    Snippet,
    extract,
    extract_to_embx,
    read_snippet_files,
    read_snippets_jsonl,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "EMBEDDING_KINDS",
    "ExtractionError",
    "ExtractionJob",
    "ExtractionResult",
    "Snippet",
    "extract",
    "extract_to_embx",
    "read_snippet_files",
    "read_snippets_jsonl",
    "write_embx",
]
