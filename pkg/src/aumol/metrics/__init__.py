"""Evaluation stack: transcript normalisation, WER and entity WER."""

from .normalize import normalize, normalize_text, number_to_words
from .scoring import (
    EditOp,
    EntitySpan,
    ErrorCounts,
    EvalReport,
    TranscriptRecord,
    corpus_wer,
    evaluate,
    ewer,
    levenshtein_align,
    wer,
)

__all__ = [
    "EditOp",
    "EntitySpan",
    "ErrorCounts",
    "EvalReport",
    "TranscriptRecord",
    "corpus_wer",
    "evaluate",
    "ewer",
    "levenshtein_align",
    "normalize",
    "normalize_text",
    "number_to_words",
    "wer",
]
