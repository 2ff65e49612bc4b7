import time

import numpy as np
import pytest

from aumol.errors import EmptyAudio, InvalidAudio, InvalidConfig, ShortAudio
from aumol.frontend import (
    LOG_EPS, AudioBuffer, StftConfig, build_mel_filterbank, featurize, frame_stft, hz_to_mel, log_mel, mel_to_hz,
    normalize_bins, read_feature_dump, read_wav, resample, write_feature_dump, write_wav,
)


def sine(freq, seconds, sr=16000, amp=0.5):
    t = np.arange(int(seconds * sr)) / sr
    return AudioBuffer(amp * np.sin(2 * np.pi * freq * t), sr)


def test_audio_buffer_rejects_bad_input():
    with pytest.raises(EmptyAudio):
        resample(AudioBuffer(np.zeros(0), 16000), 16000)
    with pytest.raises(InvalidAudio):
        resample(AudioBuffer(np.array([0.0, np.nan]), 16000), 16000)
    with pytest.raises((InvalidAudio, ValueError)):
        AudioBuffer(np.zeros((10, 2)), 16000)


def test_resample_identity_returns_same_samples():
    audio = sine(440, 0.1)
    out = resample(audio, 16000)
    assert out.sample_rate_hz == 16000
    assert np.array_equal(out.samples, audio.samples)


def test_resample_doubles_length():
    audio = sine(1000, 0.25, sr=8000)
    out = resample(audio, 16000)
    assert abs(len(out.samples) - 2 * len(audio.samples)) <= 1
    assert abs(out.duration_s - audio.duration_s) <= 1 / 8000


def test_resample_preserves_tone_frequency():
    out = resample(sine(1000, 1.0, sr=8000), 16000)
    mag = np.abs(np.fft.rfft(out.samples))
    freqs = np.fft.rfftfreq(len(out.samples), 1 / 16000)
    assert freqs[np.argmax(mag)] == pytest.approx(1000, abs=2)
    # nothing leaks above the old Nyquist
    assert mag[freqs > 4100].max() < 1e-2 * mag.max()


def test_frame_count_law():
    for seconds in (0.5, 1.0, 3.3, 30.0):
        n = int(seconds * 16000)
        mag = frame_stft(AudioBuffer(np.random.default_rng(0).uniform(-1, 1, n), 16000))
        assert mag.shape == (201, n // 160)
        assert (mag >= 0).all()


def test_silence_gives_zero_magnitude():
    assert not frame_stft(AudioBuffer(np.zeros(1600), 16000)).any()


def test_short_audio_rejected():
    with pytest.raises(ShortAudio):
        frame_stft(AudioBuffer(np.ones(100) * 0.1, 16000))


def test_bin_centred_sine_concentrates_energy():
    k = 25  # bin 25 of a 400-point DFT at 16 kHz = 1000 Hz
    mag = frame_stft(sine(k * 16000 / 400, 0.2))
    col = mag[:, mag.shape[1] // 2] ** 2
    assert col[k - 1:k + 2].sum() / col.sum() > 0.9
    # oracle: direct DFT of the same windowed frame
    cfg = StftConfig()
    x = np.pad(sine(k * 40, 0.2).samples, 200, mode="reflect")
    start = (mag.shape[1] // 2) * 160
    frame = x[start:start + 400] * cfg.window()
    n = np.arange(400)
    direct = np.abs([np.sum(frame * np.exp(-2j * np.pi * b * n / 400)) for b in range(201)])
    assert np.allclose(direct, mag[:, mag.shape[1] // 2], atol=1e-8)


def test_filterbank_shape_and_properties():
    fb = build_mel_filterbank(80, 400, 16000)
    w = fb.weights
    assert w.shape == (80, 201)
    assert (w >= 0).all()
    assert (w.max(axis=1) > 0).all()
    centres = np.argmax(w, axis=1)
    assert (np.diff(centres) >= 0).all()
    # adjacent triangles overlap: filter i+1 starts at filter i's centre, before filter i ends
    edges = mel_to_hz(np.linspace(hz_to_mel(fb.f_min), hz_to_mel(fb.f_max), 82))
    assert (edges[1:81] < edges[2:82]).all()
    # wherever both sampled rows are non-empty above 1 kHz they share bins
    hi = [i for i in range(79) if edges[i] > 1000]
    assert all(np.any((w[i] > 0) & (w[i + 1] > 0)) for i in hi)
    # every FFT bin strictly inside (f_min, f_max) receives weight
    freqs = np.arange(201) * 16000 / 400
    inside = (freqs > fb.f_min) & (freqs < fb.f_max)
    assert (w[:, inside].sum(axis=0) > 0).all()


def test_filterbank_linearity_and_mel_formula():
    fb = build_mel_filterbank(80, 400, 16000)
    assert np.allclose(fb.weights @ np.ones(201), fb.weights.sum(axis=1))
    assert hz_to_mel(700.0) == pytest.approx(2595 * np.log10(2), abs=1e-9)
    assert hz_to_mel(700.0) == pytest.approx(781.17, abs=0.01)


@pytest.mark.parametrize("kwargs", [dict(f_min=5000, f_max=4000), dict(f_max=9000), dict(n_mels=0),
                                    dict(f_min=-1.0)])
def test_filterbank_bad_bounds(kwargs):
    with pytest.raises(InvalidConfig):
        build_mel_filterbank(**{"n_mels": 80, "n_fft": 400, "sample_rate_hz": 16000, **kwargs})


def test_featurize_full_scale_shape_and_moments():
    audio = AudioBuffer(np.random.default_rng(3).normal(0, 0.1, 480000), 16000)
    t0 = time.perf_counter()
    feats = featurize(audio)
    assert time.perf_counter() - t0 < 5
    assert feats.values.shape == (80, 3000)
    assert np.isfinite(feats.values).all()
    assert np.abs(feats.values.mean(axis=1)).max() < 1e-6
    assert np.abs(feats.values.std(axis=1) - 1).max() < 1e-6


def test_featurize_pads_short_audio_with_floor():
    audio = AudioBuffer(np.random.default_rng(4).normal(0, 0.1, 160000), 16000)
    feats = featurize(audio)
    assert feats.values.shape == (80, 3000)
    raw = log_mel(audio, StftConfig(), build_mel_filterbank())
    padded = np.pad(raw, ((0, 0), (0, 2000)), constant_values=np.log(LOG_EPS))
    expected = (padded - feats.mean[:, None]) / feats.std[:, None]
    assert np.allclose(feats.values[:, 1000:], expected[:, 1000:])
    # every padded column of a bin holds the same value
    assert np.ptp(feats.values[:, 1000:], axis=1).max() == 0


def test_constant_bins_map_to_zero():
    values = np.vstack([np.full(10, 3.0), np.arange(10.0)])
    out, _, _ = normalize_bins(values)
    assert not out[0].any()
    assert out[1].std() == pytest.approx(1.0)


def test_renormalization_is_stable():
    feats = featurize(sine(300, 1.0), target_frames=100)
    again, _, _ = normalize_bins(feats.values)
    assert np.abs(again - feats.values).max() < 1e-6


def test_energy_monotonicity():
    fb = build_mel_filterbank()
    audio = AudioBuffer(np.random.default_rng(5).normal(0, 0.05, 16000), 16000)
    louder = AudioBuffer(audio.samples * 3.0, 16000)
    assert (log_mel(louder, StftConfig(), fb) >= log_mel(audio, StftConfig(), fb)).all()


def test_wav_and_feature_dump_roundtrip(tmp_path):
    audio = sine(500, 0.5)
    write_wav(tmp_path / "a.wav", audio)
    back = read_wav(tmp_path / "a.wav")
    assert back.sample_rate_hz == 16000
    assert np.abs(back.samples - audio.samples).max() < 1e-4
    feats = featurize(back, target_frames=50)
    write_feature_dump(tmp_path / "f.bin", feats)
    blob = (tmp_path / "f.bin").read_bytes()
    assert blob[:4] == b"AUML" and len(blob) == 16 + 80 * 50 * 4
    assert np.allclose(read_feature_dump(tmp_path / "f.bin"), feats.values, atol=1e-6)


def test_corrupt_wav_names_file(tmp_path):
    bad = tmp_path / "broken.wav"
    bad.write_bytes(b"not a wav")
    with pytest.raises(InvalidAudio, match="broken.wav"):
        read_wav(bad)
