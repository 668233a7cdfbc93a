"""Log-mel filterbank features for the DTW baseline, plus a 16-bit PCM reader."""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .corpus import FeatureSequence, SAMPLE_RATE_HZ
from .errors import ContractError, ParseError


@dataclass(frozen=True)
class MelConfig:
    window_s: float = 0.025
    hop_s: float = 0.020
    n_mels: int = 40
    sample_rate_hz: int = SAMPLE_RATE_HZ
    floor: float = 1e-10
    fmin_hz: float = 0.0
    fmax_hz: float | None = None

    def __post_init__(self):
        if not 0 < self.hop_s <= self.window_s:
            raise ContractError("INVALID_CONFIG", f"need 0 < hop_s <= window_s, got {self.hop_s}, {self.window_s}")
        if self.n_mels < 1 or self.floor <= 0:
            raise ContractError("INVALID_CONFIG", "n_mels >= 1 and floor > 0 required")

    @property
    def window_samples(self):
        return int(round(self.window_s * self.sample_rate_hz))

    @property
    def hop_samples(self):
        return int(round(self.hop_s * self.sample_rate_hz))

    @property
    def n_fft(self):
        return 1 << (self.window_samples - 1).bit_length()


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(n_mels, n_fft, sample_rate_hz, fmin_hz=0.0, fmax_hz=None):
    """Triangular filters on the HTK mel scale, shape (n_mels, n_fft // 2 + 1)."""
    fmax_hz = sample_rate_hz / 2.0 if fmax_hz is None else fmax_hz
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_mels + 2))
    bins = np.fft.rfftfreq(n_fft, 1.0 / sample_rate_hz)
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins - lower) / (centre - lower)
    falling = (upper - bins) / (upper - centre)
    return np.maximum(0.0, np.minimum(rising, falling))


def frame_signal(audio, window, hop):
    n = 1 + (len(audio) - window) // hop
    idx = np.arange(window)[None, :] + hop * np.arange(n)[:, None]
    return audio[idx]


def extract_logmel(audio, cfg=None):
    cfg = cfg or MelConfig()
    audio = np.asarray(audio, dtype=float)
    if audio.ndim != 1 or not np.all(np.isfinite(audio)):
        raise ContractError("INVALID_AUDIO", "audio must be a finite 1-D sample array")
    win, hop = cfg.window_samples, cfg.hop_samples
    if len(audio) < win:
        raise ContractError("AUDIO_TOO_SHORT", f"{len(audio)} samples < window of {win}")
    frames = frame_signal(audio, win, hop) * np.hanning(win + 1)[:-1]
    power = np.abs(np.fft.rfft(frames, n=cfg.n_fft, axis=1)) ** 2
    fbank = mel_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate_hz, cfg.fmin_hz, cfg.fmax_hz)
    return FeatureSequence(1.0 / cfg.hop_s, np.log(power @ fbank.T + cfg.floor))


def read_pcm(path, sample_rate_hz=None):
    """Read 16-bit little-endian PCM, either a WAV container or raw samples.

    Raw files need ``sample_rate_hz``. Returns ``(samples in [-1, 1), rate)``.
    """
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == b"RIFF":
        with wave.open(str(path), "rb") as w:
            if w.getsampwidth() != 2:
                raise ParseError("MALFORMED_HEADER", f"{w.getsampwidth() * 8}-bit WAV, need 16-bit")
            rate, channels = w.getframerate(), w.getnchannels()
            data = np.frombuffer(w.readframes(w.getnframes()), dtype="<i2")
        if channels > 1:
            data = data.reshape(-1, channels).mean(axis=1)
        if sample_rate_hz is not None and sample_rate_hz != rate:
            raise ContractError("SAMPLE_RATE_MISMATCH", f"file is {rate} Hz, expected {sample_rate_hz} Hz")
        return data.astype(float) / 32768.0, rate
    if sample_rate_hz is None:
        raise ParseError("MALFORMED_HEADER", "raw PCM needs a declared sample rate")
    raw = np.fromfile(path, dtype="<i2")
    return raw.astype(float) / 32768.0, sample_rate_hz
