"""Seeded synthetic corpus: each character of a transcript is voiced as a short tone.

Lets the whole pipeline (featurize, train, transcribe, evaluate) run without
downloading speech data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .frontend import SAMPLE_RATE, AudioBuffer, hz_to_mel, mel_to_hz, write_wav

WORDS = (
    "take", "dose", "pain", "rest", "ten", "mg", "iv", "bid", "heart", "lung",
    "scan", "test", "fever", "cough", "knee", "back", "daily", "oral", "sugar", "rash",
    "left", "right", "eye", "ear", "skin", "bone", "cyst", "ulcer", "gout", "flu",
)
TONE_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789'-.,:?"


def char_frequency(ch: str, f_lo: float = 250.0, f_hi: float = 6000.0) -> float:
    """Tone frequency for ``ch``; characters are spread evenly on the Mel scale."""
    i = TONE_ALPHABET.index(ch)
    mels = np.linspace(hz_to_mel(f_lo), hz_to_mel(f_hi), len(TONE_ALPHABET))
    return float(mel_to_hz(mels[i]))


def render(text: str, rng: np.random.Generator, duration_s: float = 1.0, char_ms: float = 70.0,
           sample_rate: int = SAMPLE_RATE, noise: float = 0.005) -> AudioBuffer:
    """Tone sequence for ``text`` (silence for spaces) padded with silence to ``duration_s``."""
    seg = int(sample_rate * char_ms / 1000)
    n_total = int(sample_rate * duration_s)
    if seg * len(text) > n_total:
        raise ValueError(f"{text!r} needs {seg * len(text) / sample_rate:.2f}s, more than {duration_s}s")
    t = np.arange(seg) / sample_rate
    taper = np.hanning(seg)
    out = np.zeros(n_total)
    for k, ch in enumerate(text):
        if ch == " ":
            continue
        phase = rng.uniform(0, 2 * np.pi)
        out[k * seg:(k + 1) * seg] = 0.5 * taper * np.sin(2 * np.pi * char_frequency(ch) * t + phase)
    out += noise * rng.standard_normal(n_total)
    return AudioBuffer(np.clip(out, -1.0, 1.0), sample_rate)


@dataclass(frozen=True)
class SynthUtterance:
    utterance_id: str
    transcript: str
    audio: AudioBuffer


def make_corpus(n: int, seed: int = 0, max_chars: int = 12, duration_s: float = 1.0) -> list[SynthUtterance]:
    """``n`` distinct two-word utterances, deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    texts: list[str] = []
    while len(texts) < n:
        a, b = rng.choice(len(WORDS), size=2, replace=False)
        text = f"{WORDS[a]} {WORDS[b]}"
        if len(text) <= max_chars and text not in texts:
            texts.append(text)
    return [SynthUtterance(f"utt{i:04d}", text, render(text, rng, duration_s)) for i, text in enumerate(texts)]


def write_corpus(out_dir: str | Path, n: int, seed: int = 0, duration_s: float = 1.0) -> Path:
    """Write WAVs plus a ``manifest.jsonl`` ({id, audio_path, transcript}); returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.jsonl"
    with manifest.open("w", encoding="utf-8") as fh:
        for utt in make_corpus(n, seed, duration_s=duration_s):
            wav = out_dir / f"{utt.utterance_id}.wav"
            write_wav(wav, utt.audio)
            fh.write(json.dumps({"id": utt.utterance_id, "audio_path": wav.name, "transcript": utt.transcript}) + "\n")
    return manifest
