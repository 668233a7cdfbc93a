"""Domain types shared by the aligners and the evaluator.

Everything here is immutable once built. Times are float seconds; interval
comparisons use a 1 ms tolerance (``TIME_TOL_S``) to absorb aligner rounding.
"""

from __future__ import annotations

import enum
import math
import unicodedata
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ContractError

TIME_TOL_S = 0.001
DEFAULT_SILENCE_LABELS = frozenset({"sil", "sp", "#", ""})

SAMPLE_RATE_HZ = 16000
MRI_FRAME_RATE_HZ = 20.0
CLEAN_FRAME_RATE_HZ = 50.0
EMBEDDING_DIM = 768
PIXEL_SIZE_MM = 1.62
N_POINTS = 50

# Row order of the results tables.
ARTICULATORS = (
    "arytenoid_cartilage",
    "epiglottis",
    "lower_lip",
    "pharyngeal_wall",
    "velum",
    "tongue",
    "upper_lip",
    "vocal_folds",
)

ARTICULATOR_TITLES = {
    "arytenoid_cartilage": "Arytenoid cartilage",
    "epiglottis": "Epiglottis",
    "lower_lip": "Lower lip",
    "pharyngeal_wall": "Pharyngeal wall",
    "velum": "Velum",
    "tongue": "Tongue",
    "upper_lip": "Upper lip",
    "vocal_folds": "Vocal folds",
}

_APOSTROPHES = {"’": "'", "ʼ": "'"}


def _is_word_char(ch):
    return unicodedata.category(ch)[0] in "LNM"


def normalize_text(raw):
    """Normalize orthographic text for equality and similarity tests.

    NFC, lowercase, punctuation replaced by spaces (apostrophes and hyphens
    survive when flanked by word characters), whitespace collapsed.

    >>> normalize_text("Après  une HEURE.")
    'après une heure'
    >>> normalize_text("l'heure")
    "l'heure"
    """
    text = unicodedata.normalize("NFC", raw).lower()
    text = "".join(_APOSTROPHES.get(ch, ch) for ch in text)
    out = []
    for k, ch in enumerate(text):
        if _is_word_char(ch):
            out.append(ch)
        elif ch in "'-":
            inner = 0 < k < len(text) - 1
            if inner and _is_word_char(text[k - 1]) and _is_word_char(text[k + 1]):
                out.append(ch)
            else:
                out.append(" ")
        else:
            out.append(" ")
    return " ".join("".join(out).split())


def normalize_phone(raw):
    """Phone symbols are case- and punctuation-sensitive (``a~``, ``@``, ``E``)."""
    return unicodedata.normalize("NFC", raw).strip()


@dataclass(frozen=True)
class PhoneInterval:
    label: str
    start_s: float
    end_s: float

    @property
    def duration_s(self):
        return self.end_s - self.start_s


@dataclass(frozen=True)
class WordInterval:
    text: str
    start_s: float
    end_s: float
    phones: tuple[PhoneInterval, ...] = ()


@dataclass(frozen=True)
class SentenceInterval:
    text: str
    start_s: float
    end_s: float
    words: tuple[WordInterval, ...] = ()

    @property
    def duration_s(self):
        return self.end_s - self.start_s


@dataclass(frozen=True)
class UtteranceSet:
    """A corpus segmentation: sentences -> words -> phones.

    ``loose_phones`` holds phone-tier intervals that sit outside every word,
    typically pauses between words or sentences. Sentence ids are positions
    in ``sentences``.
    """

    sentences: tuple[SentenceInterval, ...]
    silence_labels: frozenset = DEFAULT_SILENCE_LABELS
    total_duration_s: float = 0.0
    loose_phones: tuple[PhoneInterval, ...] = ()

    def phone_spans(self):
        """All phones (in-word and loose) in time order.

        Returns a list of ``(phone, sentence_id)``; loose phones carry the id
        of the sentence containing them, or -1.
        """
        spans = []
        for sid, sentence in enumerate(self.sentences):
            for word in sentence.words:
                spans.extend((p, sid) for p in word.phones)
        for phone in self.loose_phones:
            spans.append((phone, self.sentence_at(phone.start_s, phone.end_s)))
        spans.sort(key=lambda item: (item[0].start_s, item[0].end_s))
        return spans

    def sentence_at(self, start_s, end_s):
        for sid, s in enumerate(self.sentences):
            if start_s >= s.start_s - TIME_TOL_S and end_s <= s.end_s + TIME_TOL_S:
                return sid
        return -1


@dataclass(frozen=True)
class FrameClock:
    """Frame timing. The frame period is stored in samples."""

    frame_rate_hz: float
    sample_rate_hz: float = SAMPLE_RATE_HZ
    frame_period_samples: int = field(init=False)

    def __post_init__(self):
        if not (self.frame_rate_hz > 0 and self.sample_rate_hz > 0):
            raise ContractError("INVALID_CLOCK", "rates must be positive")
        period = round(self.sample_rate_hz / self.frame_rate_hz)
        if period < 1:
            raise ContractError("INVALID_CLOCK", "frame rate exceeds sample rate")
        effective = self.sample_rate_hz / period
        if abs(effective - self.frame_rate_hz) > 1e-3 * self.frame_rate_hz:
            raise ContractError(
                "INVALID_CLOCK",
                f"{self.sample_rate_hz} Hz / {period} samples = {effective} Hz, "
                f"not within 0.1% of {self.frame_rate_hz} Hz",
            )
        object.__setattr__(self, "frame_period_samples", period)

    def index_of(self, t):
        """Frame index containing time ``t``: floor(t * f_s / period)."""
        return math.floor(t * self.sample_rate_hz / self.frame_period_samples)


def frame_mid_time(idx, clock):
    """Centre of frame ``idx`` in seconds, ``(idx + 0.5) / rate``."""
    return (idx + 0.5) / clock.frame_rate_hz


def frame_count(duration_s, clock):
    """Number of frames whose centre lies before ``duration_s``."""
    return max(0, math.ceil(duration_s * clock.frame_rate_hz - 0.5))


def frames_in_interval(start_s, end_s, clock):
    """Indices of frames whose centre lies in ``[start_s, end_s)``.

    A zero-length interval claims a frame centred exactly on it.
    """
    rate = clock.frame_rate_hz
    lo = max(0, math.floor(start_s * rate - 0.5) - 1)
    hi = max(0, math.ceil(end_s * rate) + 1)
    idx = np.arange(lo, hi)
    mids = (idx + 0.5) / rate
    if end_s == start_s:
        return idx[mids == start_s]
    return idx[(mids >= start_s) & (mids < end_s)]


class Method(str, enum.Enum):
    PHONETIC = "PHONETIC"
    DTW = "DTW"


UNMAPPED = -1


class MappingEntry(NamedTuple):
    source_idx: int
    target_idx: int
    method: Method
    phone: str = ""
    sentence_id: int = -1
    clamped: bool = False

    @property
    def mapped(self):
        return self.target_idx != UNMAPPED


@dataclass(frozen=True)
class FrameMapping:
    source_frame_rate_hz: float
    target_frame_rate_hz: float
    entries: tuple[MappingEntry, ...]

    def __post_init__(self):
        prev = -1
        for e in self.entries:
            if e.source_idx <= prev:
                raise ContractError("NON_MONOTONE_TIMES", f"source_idx {e.source_idx} after {prev}")
            if e.target_idx < UNMAPPED:
                raise ContractError("DIMENSION_MISMATCH", f"negative target_idx {e.target_idx}")
            prev = e.source_idx

    def __len__(self):
        return len(self.entries)

    @property
    def source_indices(self):
        return np.array([e.source_idx for e in self.entries], dtype=int)

    @property
    def target_indices(self):
        return np.array([e.target_idx for e in self.entries], dtype=int)

    def mapped_sources(self):
        return {e.source_idx for e in self.entries if e.mapped}

    def as_dict(self):
        """``source_idx -> target_idx`` for mapped entries only."""
        return {e.source_idx: e.target_idx for e in self.entries if e.mapped}


@dataclass(frozen=True)
class FeatureSequence:
    frame_rate_hz: float
    frames: np.ndarray

    def __post_init__(self):
        frames = np.array(self.frames, dtype=float)
        if frames.ndim == 1:
            frames = frames[:, None]
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ContractError("DIMENSION_MISMATCH", f"feature matrix shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ContractError("NON_FINITE_VALUE", "feature values must be finite")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self):
        return self.frames.shape[0]

    @property
    def dim(self):
        return self.frames.shape[1]


class Units(str, enum.Enum):
    NORMALIZED = "NORMALIZED"
    PIXELS = "PIXELS"
    MM = "MM"


@dataclass(frozen=True)
class ContourTrack:
    """Articulator contours, ``points`` shaped (frames, articulators, points, 2)."""

    frame_rate_hz: float
    points: np.ndarray
    articulators: tuple[str, ...] = ARTICULATORS
    units: Units = Units.NORMALIZED

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 4 or pts.shape[3] != 2 or pts.shape[1] != len(self.articulators):
            raise ContractError("DIMENSION_MISMATCH", f"contour array shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ContractError("NON_FINITE_VALUE", "contour coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "articulators", tuple(self.articulators))
        object.__setattr__(self, "units", Units(self.units))

    @property
    def n_frames(self):
        return self.points.shape[0]

    @property
    def n_points(self):
        return self.points.shape[2]


@dataclass(frozen=True)
class NormStats:
    """Per-articulator, per-axis z-score statistics in pixels, shaped (articulators, 2)."""

    mean: np.ndarray
    std: np.ndarray
    articulators: tuple[str, ...] = ARTICULATORS
    pixel_size_mm: float = PIXEL_SIZE_MM

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        std = np.array(self.std, dtype=float)
        shape = (len(self.articulators), 2)
        if mean.shape != shape or std.shape != shape:
            raise ContractError("DIMENSION_MISMATCH", f"stats shape {mean.shape}/{std.shape}, want {shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std))):
            raise ContractError("NON_FINITE_VALUE", "stats must be finite")
        if np.any(std <= 0):
            raise ContractError("INVALID_STATS", "std must be positive")
        if not self.pixel_size_mm > 0:
            raise ContractError("INVALID_STATS", "pixel_size_mm must be positive")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        object.__setattr__(self, "articulators", tuple(self.articulators))
