"""Word-level Levenshtein alignment, WER and entity word error rate (EWER)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..errors import ContractError
from .normalize import normalize

MATCH, SUB, DEL, INS = "match", "sub", "del", "ins"


@dataclass(frozen=True)
class EditOp:
    op: str
    ref_index: int | None
    hyp_index: int | None


def edit_distance_table(ref: Sequence[str], hyp: Sequence[str]) -> list[list[int]]:
    n, m = len(ref), len(hyp)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        d[i][0] = i
    for j in range(1, m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            d[i][j] = min(d[i - 1][j - 1] + cost, d[i - 1][j] + 1, d[i][j - 1] + 1)
    return d


def levenshtein_align(ref: Sequence[str], hyp: Sequence[str]) -> list[EditOp]:
    """Minimal unit-cost edit script from ``ref`` to ``hyp``, in reading order.

    Backtrace ties prefer match, then substitution, then deletion, then insertion.
    """
    d = edit_distance_table(ref, hyp)
    i, j = len(ref), len(hyp)
    ops: list[EditOp] = []
    while i or j:
        if i and j and ref[i - 1] == hyp[j - 1] and d[i][j] == d[i - 1][j - 1]:
            ops.append(EditOp(MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i and j and d[i][j] == d[i - 1][j - 1] + 1:
            ops.append(EditOp(SUB, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i and d[i][j] == d[i - 1][j] + 1:
            ops.append(EditOp(DEL, i - 1, None))
            i -= 1
        else:
            ops.append(EditOp(INS, None, j - 1))
            j -= 1
    ops.reverse()
    return ops


@dataclass(frozen=True)
class ErrorCounts:
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    ref_len: int = 0

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        if self.ref_len == 0:
            raise ContractError("WER is undefined for an empty reference")
        return self.errors / self.ref_len

    def __add__(self, other: ErrorCounts) -> ErrorCounts:
        return ErrorCounts(self.substitutions + other.substitutions, self.deletions + other.deletions,
                           self.insertions + other.insertions, self.ref_len + other.ref_len)


def count_edits(ops: Iterable[EditOp], ref_len: int) -> ErrorCounts:
    kinds = [op.op for op in ops]
    return ErrorCounts(kinds.count(SUB), kinds.count(DEL), kinds.count(INS), ref_len)


def wer(ref: Sequence[str], hyp: Sequence[str]) -> ErrorCounts:
    """Counts and rate (``.wer``) for one normalised reference/hypothesis pair."""
    if not ref:
        raise ContractError("WER needs a non-empty reference")
    return count_edits(levenshtein_align(ref, hyp), len(ref))


def corpus_wer(pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> ErrorCounts:
    """Micro-average: summed edits over summed reference length."""
    total = ErrorCounts()
    for ref, hyp in pairs:
        total = total + wer(ref, hyp)
    return total


@dataclass(frozen=True)
class EntitySpan:
    words: tuple[str, ...]
    position: int

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if not self.words:
            raise ContractError("an entity needs at least one word")


@dataclass
class TranscriptRecord:
    utterance_id: str
    reference: str
    hypothesis: str
    entities: list[EntitySpan] = field(default_factory=list)

    @classmethod
    def from_annotations(cls, utterance_id: str, reference: str, hypothesis: str,
                         entities: Iterable[dict] = ()) -> TranscriptRecord:
        """Build from raw entity annotations ``{text, start_token}``.

        Entity text goes through the same normalisation as the reference. When
        ``start_token`` is missing the first occurrence in the reference is used.
        """
        ref_tokens = normalize(reference)
        spans = []
        for ent in entities:
            words = tuple(normalize(ent["text"]))
            if not words:
                raise ContractError(f"{utterance_id}: entity {ent['text']!r} normalises to nothing")
            start = ent.get("start_token")
            if start is None:
                start = _find(ref_tokens, words)
                if start is None:
                    raise ContractError(f"{utterance_id}: entity {ent['text']!r} not found in reference")
            spans.append(EntitySpan(words, int(start)))
        return cls(utterance_id, reference, hypothesis, spans)


def _find(tokens: Sequence[str], words: Sequence[str]) -> int | None:
    k = len(words)
    for i in range(len(tokens) - k + 1):
        if tuple(tokens[i:i + k]) == tuple(words):
            return i
    return None


@dataclass(frozen=True)
class EntityCounts:
    words_total: int = 0
    words_errored: int = 0

    @property
    def ewer(self) -> float | None:
        return self.words_errored / self.words_total if self.words_total else None

    def __add__(self, other: EntityCounts) -> EntityCounts:
        return EntityCounts(self.words_total + other.words_total, self.words_errored + other.words_errored)


@dataclass(frozen=True)
class UtteranceScore:
    utterance_id: str
    counts: ErrorCounts
    entities: EntityCounts
    entity_rates: tuple[float, ...] = ()

    def as_row(self) -> dict:
        return {
            "id": self.utterance_id,
            "substitutions": self.counts.substitutions,
            "deletions": self.counts.deletions,
            "insertions": self.counts.insertions,
            "ref_len": self.counts.ref_len,
            "wer": self.counts.wer,
            "entity_words_total": self.entities.words_total,
            "entity_words_errored": self.entities.words_errored,
            "ewer": self.entities.ewer,
        }


def entity_errors(ref_tokens: Sequence[str], hyp_tokens: Sequence[str], spans: Sequence[EntitySpan],
                  utterance_id: str = "") -> list[list[bool]]:
    """Per entity, per word: True if the word is not matched exactly in the alignment."""
    matched = set()
    for op in levenshtein_align(ref_tokens, hyp_tokens):
        if op.op == MATCH:
            matched.add(op.ref_index)
    out = []
    for span in spans:
        end = span.position + len(span.words)
        if span.position < 0 or end > len(ref_tokens) or tuple(ref_tokens[span.position:end]) != span.words:
            raise ContractError(
                f"{utterance_id}: entity {' '.join(span.words)!r} does not match the reference at token {span.position}"
            )
        out.append([pos not in matched for pos in range(span.position, end)])
    return out


def score_record(record: TranscriptRecord) -> UtteranceScore:
    ref = normalize(record.reference)
    hyp = normalize(record.hypothesis)
    if not ref:
        raise ContractError(f"{record.utterance_id}: reference is empty after normalisation")
    counts = wer(ref, hyp)
    flags = entity_errors(ref, hyp, record.entities, record.utterance_id)
    ent = EntityCounts(sum(len(f) for f in flags), sum(sum(f) for f in flags))
    rates = tuple(sum(f) / len(f) for f in flags)
    return UtteranceScore(record.utterance_id, counts, ent, rates)


@dataclass
class EvalReport:
    utterances: list[UtteranceScore]
    aggregate: str = "micro"

    @property
    def counts(self) -> ErrorCounts:
        total = ErrorCounts()
        for u in self.utterances:
            total = total + u.counts
        return total

    @property
    def entity_counts(self) -> EntityCounts:
        total = EntityCounts()
        for u in self.utterances:
            total = total + u.entities
        return total

    @property
    def wer(self) -> float:
        return self.counts.wer

    @property
    def ewer(self) -> float | None:
        if self.aggregate == "macro":
            rates = [r for u in self.utterances for r in u.entity_rates]
            return sum(rates) / len(rates) if rates else None
        return self.entity_counts.ewer

    def summary(self) -> dict:
        c, e = self.counts, self.entity_counts
        return {
            "utterances": len(self.utterances),
            "substitutions": c.substitutions,
            "deletions": c.deletions,
            "insertions": c.insertions,
            "ref_len": c.ref_len,
            "wer": c.wer,
            "entity_words_total": e.words_total,
            "entity_words_errored": e.words_errored,
            "ewer": self.ewer,
            "ewer_aggregate": self.aggregate,
        }


def ewer(records: Iterable[TranscriptRecord], aggregate: str = "micro") -> tuple[float | None, EntityCounts]:
    """Corpus EWER and pooled entity-word counts.

    ``micro`` divides errored entity words by all entity words; ``macro``
    averages the per-entity rates. The rate is None when there are no entities.
    """
    report = evaluate(records, aggregate)
    return report.ewer, report.entity_counts


def evaluate(records: Iterable[TranscriptRecord], aggregate: str = "micro") -> EvalReport:
    if aggregate not in ("micro", "macro"):
        raise ContractError(f"aggregate must be 'micro' or 'macro', got {aggregate!r}")
    return EvalReport([score_record(r) for r in records], aggregate)
