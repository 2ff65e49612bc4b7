"""Audio frontend: resampling, STFT, Mel projection and normalised log-Mel features."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from math import gcd
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import EmptyAudio, InvalidAudio, InvalidConfig, ShortAudio

SAMPLE_RATE = 16_000
N_MELS = 80
FULL_SCALE_FRAMES = 3000
LOG_EPS = 1e-10
# bins with a smaller standard deviation are treated as constant
CONSTANT_BIN_STD = 1e-10

FEATURE_MAGIC = b"AUML"
FEATURE_VERSION = 1


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidAudio(f"audio must be mono, got array of shape {samples.shape}")
        if int(self.sample_rate_hz) <= 0:
            raise InvalidAudio(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class StftConfig:
    window_ms: float = 25.0
    hop_ms: float = 10.0
    n_fft: int = 400
    window_fn: str = "hann"
    sample_rate_hz: int = SAMPLE_RATE

    def __post_init__(self):
        if self.hop_ms <= 0 or self.window_ms <= 0:
            raise InvalidConfig("window and hop durations must be positive")
        if self.hop_ms > self.window_ms:
            raise InvalidConfig(f"hop ({self.hop_ms} ms) exceeds window ({self.window_ms} ms)")
        if self.n_fft < self.win_length:
            raise InvalidConfig(f"n_fft={self.n_fft} shorter than the {self.win_length}-sample window")
        if self.window_fn not in _WINDOWS:
            raise InvalidConfig(f"unknown window function {self.window_fn!r}")

    @property
    def win_length(self) -> int:
        return int(round(self.window_ms * self.sample_rate_hz / 1000))

    @property
    def hop_length(self) -> int:
        return int(round(self.hop_ms * self.sample_rate_hz / 1000))

    def window(self) -> np.ndarray:
        win = _WINDOWS[self.window_fn](self.win_length)
        pad = self.n_fft - self.win_length
        return np.pad(win, (pad // 2, pad - pad // 2))


def _periodic_hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


_WINDOWS = {"hann": _periodic_hann, "rectangular": np.ones}


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray
    f_min: float
    f_max: float
    sample_rate_hz: int

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]

    @property
    def n_fft(self) -> int:
        return 2 * (self.weights.shape[1] - 1)


@dataclass
class LogMelFeatures:
    values: np.ndarray
    mean: np.ndarray = field(repr=False)
    std: np.ndarray = field(repr=False)

    @property
    def n_mels(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _check_audio(audio: AudioBuffer) -> None:
    if len(audio.samples) == 0:
        raise EmptyAudio("audio buffer has no samples")
    if not np.all(np.isfinite(audio.samples)):
        raise InvalidAudio("audio contains NaN or infinite samples")


def resample(audio: AudioBuffer, target_hz: int = SAMPLE_RATE) -> AudioBuffer:
    """Band-limited polyphase (Kaiser windowed-sinc) resampling to ``target_hz``."""
    _check_audio(audio)
    if target_hz <= 0:
        raise InvalidConfig(f"target rate must be positive, got {target_hz}")
    if audio.sample_rate_hz == target_hz:
        return audio
    g = gcd(audio.sample_rate_hz, target_hz)
    up, down = target_hz // g, audio.sample_rate_hz // g
    out = resample_poly(audio.samples, up, down, window=("kaiser", 5.0))
    return AudioBuffer(out, target_hz)


def frame_stft(audio: AudioBuffer, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Magnitude STFT of shape ``(n_fft // 2 + 1, len // hop)``.

    The signal is reflect-padded by ``n_fft // 2`` on both sides so frame ``i``
    is centred on sample ``i * hop``; the trailing partial frame is dropped, so a
    30 s clip at 16 kHz with a 10 ms hop gives exactly 3000 frames.
    """
    _check_audio(audio)
    hop = cfg.hop_length
    n_frames = len(audio.samples) // hop
    if n_frames < 1:
        raise ShortAudio(f"audio of {len(audio.samples)} samples is shorter than one hop ({hop})")
    half = cfg.n_fft // 2
    padded = np.pad(audio.samples, half, mode="reflect")
    frames = np.lib.stride_tricks.sliding_window_view(padded, cfg.n_fft)[::hop][:n_frames]
    spectrum = np.fft.rfft(frames * cfg.window(), n=cfg.n_fft, axis=-1)
    return np.abs(spectrum).T


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def build_mel_filterbank(
    n_mels: int = N_MELS,
    n_fft: int = 400,
    sample_rate_hz: int = SAMPLE_RATE,
    f_min: float = 0.0,
    f_max: float | None = None,
) -> MelFilterbank:
    """Triangular filters with centres equally spaced on the HTK Mel scale."""
    f_max = sample_rate_hz / 2 if f_max is None else f_max
    if n_mels < 1 or n_fft < 2:
        raise InvalidConfig(f"need n_mels >= 1 and n_fft >= 2, got {n_mels}, {n_fft}")
    if not (0 <= f_min < f_max <= sample_rate_hz / 2):
        raise InvalidConfig(f"frequency bounds must satisfy 0 <= f_min < f_max <= {sample_rate_hz / 2}")
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    bins = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate_hz)
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins - lower) / (center - lower)
    falling = (upper - bins) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(weights.max(axis=1) <= 0)
    if empty.size:
        raise InvalidConfig(
            f"Mel filters {empty.tolist()} cover no FFT bin; lower n_mels or raise n_fft"
        )
    return MelFilterbank(weights, float(f_min), float(f_max), sample_rate_hz)


def log_mel(audio: AudioBuffer, cfg: StftConfig, fb: MelFilterbank) -> np.ndarray:
    """Un-normalised ``log(mel_power + eps)`` of shape ``(n_mels, len // hop)``."""
    power = frame_stft(audio, cfg) ** 2
    return np.log(fb.weights @ power + LOG_EPS)


def normalize_bins(values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-row z-score; rows with (numerically) zero spread map to zeros."""
    mean = values.mean(axis=1, keepdims=True)
    centered = values - mean
    std = np.sqrt((centered * centered).mean(axis=1, keepdims=True))
    constant = std < CONSTANT_BIN_STD
    out = np.where(constant, 0.0, centered / np.where(constant, 1.0, std))
    return out, mean[:, 0], std[:, 0]


def featurize(
    audio: AudioBuffer,
    cfg: StftConfig | None = None,
    fb: MelFilterbank | None = None,
    target_frames: int = FULL_SCALE_FRAMES,
) -> LogMelFeatures:
    """Fixed-length, per-bin normalised log-Mel features for a 16 kHz clip.

    Short clips are padded with the log floor ``log(eps)`` (silence) before
    normalisation; long clips are truncated.
    """
    cfg = cfg or StftConfig()
    fb = fb or build_mel_filterbank(n_fft=cfg.n_fft, sample_rate_hz=cfg.sample_rate_hz)
    if audio.sample_rate_hz != cfg.sample_rate_hz:
        raise InvalidAudio(
            f"audio at {audio.sample_rate_hz} Hz; resample to {cfg.sample_rate_hz} Hz first"
        )
    values = log_mel(audio, cfg, fb)
    n = values.shape[1]
    if n >= target_frames:
        values = values[:, :target_frames]
    else:
        values = np.pad(values, ((0, 0), (0, target_frames - n)), constant_values=np.log(LOG_EPS))
    normed, mean, std = normalize_bins(values)
    return LogMelFeatures(normed, mean, std)


# ---------------------------------------------------------------------------
# file formats


def read_wav(path: str | Path) -> AudioBuffer:
    """Read 16-bit PCM WAV, averaging channels down to mono."""
    import wave

    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            width, channels, rate = wf.getsampwidth(), wf.getnchannels(), wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise InvalidAudio(f"{path}: not a readable WAV file ({exc})") from exc
    if width != 2:
        raise InvalidAudio(f"{path}: expected 16-bit PCM, got {8 * width}-bit samples")
    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if channels > 1:
        pcm = pcm[: len(pcm) - len(pcm) % channels].reshape(-1, channels).mean(axis=1)
    audio = AudioBuffer(pcm, rate)
    _check_audio(audio)
    return audio


def write_wav(path: str | Path, audio: AudioBuffer) -> None:
    import wave

    pcm = np.clip(np.round(audio.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(audio.sample_rate_hz)
        wf.writeframes(pcm.tobytes())


def write_feature_dump(path: str | Path, features: LogMelFeatures | np.ndarray) -> None:
    values = features.values if isinstance(features, LogMelFeatures) else np.asarray(features)
    n_mels, n_frames = values.shape
    header = FEATURE_MAGIC + struct.pack("<III", FEATURE_VERSION, n_mels, n_frames)
    Path(path).write_bytes(header + np.ascontiguousarray(values, dtype="<f4").tobytes())


def read_feature_dump(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != FEATURE_MAGIC:
        raise InvalidAudio(f"{path}: missing AUML feature header")
    version, n_mels, n_frames = struct.unpack("<III", blob[4:16])
    if version != FEATURE_VERSION:
        raise InvalidAudio(f"{path}: unsupported feature dump version {version}")
    body = np.frombuffer(blob[16:], dtype="<f4")
    if body.size != n_mels * n_frames:
        raise InvalidAudio(f"{path}: truncated feature payload")
    return body.reshape(n_mels, n_frames).astype(np.float64)
