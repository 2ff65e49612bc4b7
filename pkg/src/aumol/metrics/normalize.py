"""Transcript normalisation applied to references and hypotheses before scoring.

Steps, in order:

1. drop fillers ("um", "ummm", "ahh", ...)
2. spell out standalone integers 0-999999 ("16" -> "sixteen")
3. lowercase, strip punctuation, collapse whitespace
4. British -> American spelling
5. split hyphenated words into separate tokens
"""

from __future__ import annotations

import re
import unicodedata

from .spelling import americanize

FILLERS = frozenset({"um", "umm", "ummm", "uh", "uhh", "ah", "ahh", "er", "hmm"})
# lexicon entries with letter runs squeezed; an elongated token ("ummmmm", "errr")
# is a filler when it has a run of 3+ letters and squeezes onto one of these
_FILLER_CANON = frozenset(re.sub(r"(.)\1+", r"\1", f) for f in FILLERS)
_LONG_RUN = re.compile(r"(.)\1\1")

MAX_SPELLED = 999_999

_ONES = ("zero one two three four five six seven eight nine ten eleven twelve thirteen "
         "fourteen fifteen sixteen seventeen eighteen nineteen").split()
_TENS = "_ _ twenty thirty forty fifty sixty seventy eighty ninety".split()

# digits not touching letters/digits and not part of a decimal like "2.5"
_INTEGER = re.compile(r"(?<![^\W_])(?<!\d\.)(\d{1,3}(?:,\d{3})+|\d+)(?![^\W_])(?!\.\d)")
_HYPHENS = "-‐‑"
_APOSTROPHES = "'’ʼ"


def _below_thousand(n: int) -> list[str]:
    words = []
    if n >= 100:
        words += [_ONES[n // 100], "hundred"]
        n %= 100
        if n == 0:
            return words
    if n < 20:
        words.append(_ONES[n])
    else:
        words.append(_TENS[n // 10])
        if n % 10:
            words.append(_ONES[n % 10])
    return words


def number_to_words(n: int) -> str:
    """Cardinal in words without "and": 115 -> "one hundred fifteen"."""
    if not 0 <= n <= MAX_SPELLED:
        raise ValueError(f"{n} outside 0..{MAX_SPELLED}")
    if n < 1000:
        return " ".join(_below_thousand(n))
    thousands, rest = divmod(n, 1000)
    words = _below_thousand(thousands) + ["thousand"]
    if rest:
        words += _below_thousand(rest)
    return " ".join(words)


def _is_filler_token(token: str) -> bool:
    if token in FILLERS:
        return True
    return bool(token.isalpha() and _LONG_RUN.search(token)
                and re.sub(r"(.)\1+", r"\1", token) in _FILLER_CANON)


def remove_disfluencies(text: str) -> str:
    """Drop filler words, including filler halves of hyphenated words ("uh-huh" -> "huh").

    A word that contains a filler is replaced by its cleaned, filler-free
    sub-tokens so the result is stable under a second pass.
    """
    kept = []
    for word in text.split():
        parts = [p for p in re.split(r"[\s-]+", strip_punctuation(word)) if p]
        if not any(_is_filler_token(p) for p in parts):
            kept.append(word)
            continue
        kept.extend(p for p in parts if not _is_filler_token(p))
    return " ".join(kept)


def spell_numbers(text: str) -> str:
    def repl(m: re.Match) -> str:
        value = int(m.group(1).replace(",", ""))
        return number_to_words(value) if value <= MAX_SPELLED else m.group(1).replace(",", "")

    return _INTEGER.sub(repl, text)


def strip_punctuation(text: str) -> str:
    """Lowercase; keep letters, digits, hyphens and decimal points; collapse spaces.

    Apostrophes are deleted ("patient's" -> "patients"); every other
    punctuation or symbol character becomes a space.
    """
    out = []
    text = unicodedata.normalize("NFC", text).lower()
    for i, ch in enumerate(text):
        if ch.isalnum() or ch.isspace():
            out.append(ch)
        elif ch in _HYPHENS:
            out.append("-")
        elif ch in _APOSTROPHES:
            continue
        elif ch == "." and 0 < i < len(text) - 1 and text[i - 1].isdigit() and text[i + 1].isdigit():
            out.append(ch)
        else:
            out.append(" ")
    return " ".join("".join(out).split())


def _americanize_token(token: str) -> str:
    return "-".join(americanize(part) for part in token.split("-"))


def split_hyphens(tokens: list[str]) -> list[str]:
    return [part for token in tokens for part in token.split("-") if part]


def normalize(text: str) -> list[str]:
    """Full normalisation pipeline; returns the token list."""
    text = remove_disfluencies(text)
    text = spell_numbers(text)
    text = strip_punctuation(text)
    tokens = [_americanize_token(t) for t in text.split()]
    return split_hyphens(tokens)


def normalize_text(text: str) -> str:
    return " ".join(normalize(text))
