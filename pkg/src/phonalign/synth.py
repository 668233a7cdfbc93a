"""Synthetic parallel corpora with a known frame correspondence.

The "clean" corpus is the MRI corpus with every phone stretched by its own
random factor, sentences shuffled and pauses redrawn. Optionally some clean
sentences get word substitutions. Times are generated in whole
milliseconds so the written segmentations are exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields

import numpy as np

from .corpus import (
    CLEAN_FRAME_RATE_HZ,
    MRI_FRAME_RATE_HZ,
    FeatureSequence,
    FrameClock,
    FrameMapping,
    MappingEntry,
    Method,
    PhoneInterval,
    SentenceInterval,
    UNMAPPED,
    UtteranceSet,
    WordInterval,
    frame_count,
    frames_in_interval,
)
from .errors import ContractError, ParseError

# label -> spelling
PHONES = {
    "a": "a", "e": "é", "E": "è", "i": "i", "o": "o", "O": "au", "u": "ou", "y": "u",
    "2": "eu", "9": "oe", "@": "e", "a~": "an", "o~": "on", "e~": "in",
    "p": "p", "b": "b", "t": "t", "d": "d", "k": "k", "g": "g", "f": "f", "v": "v",
    "s": "s", "z": "z", "S": "ch", "Z": "j", "m": "m", "n": "n", "J": "gn", "l": "l",
    "R": "r", "j": "y", "w": "w", "H": "hu",
}
_VOWELS = ("a", "e", "E", "i", "o", "O", "u", "y", "2", "9", "@", "a~", "o~", "e~")
_CONSONANTS = tuple(p for p in PHONES if p not in _VOWELS)


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int = 0
    n_sentences: int = 50
    words_per_sentence: tuple[int, int] = (3, 8)
    phones_per_word: tuple[int, int] = (2, 6)
    phone_duration_s: tuple[float, float] = (0.04, 0.16)
    warp: tuple[float, float] = (0.5, 2.0)
    error_rate: float = 0.0
    silence_gap_s: tuple[float, float] = (0.2, 0.6)
    pause_rate: float = 0.1
    vocab_size: int = 120
    mri_rate_hz: float = MRI_FRAME_RATE_HZ
    clean_rate_hz: float = CLEAN_FRAME_RATE_HZ

    def __post_init__(self):
        for name in ("words_per_sentence", "phones_per_word", "phone_duration_s", "warp", "silence_gap_s"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ContractError("INVALID_SPEC", f"{name} must satisfy 0 < lo <= hi, got {(lo, hi)}")
        if not 0 <= self.error_rate <= 1 or not 0 <= self.pause_rate <= 1:
            raise ContractError("INVALID_SPEC", "rates must lie in [0, 1]")
        if self.n_sentences < 1 or self.vocab_size < 2:
            raise ContractError("INVALID_SPEC", "need n_sentences >= 1 and vocab_size >= 2")


@dataclass(frozen=True)
class SyntheticCorpus:
    mri: UtteranceSet
    clean: UtteranceSet
    truth: FrameMapping
    clean_id_of: tuple[int, ...]
    perturbed: frozenset

    def twin(self, mri_id):
        return self.clean_id_of[mri_id]


def parse_spec(text):
    """``key = value`` lines; ranges as ``lo, hi`` or ``[lo, hi]``; ``#`` comments."""
    types = {f.name: f.type for f in fields(SyntheticSpec)}
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("MALFORMED_LINE", f"expected key = value: {raw!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ParseError("MALFORMED_LINE", f"unknown key {key!r}", line=lineno)
        items = [v for v in re.split(r"[\s,]+", value.strip("[]() ")) if v]
        try:
            if types[key].startswith("tuple"):
                cast = int if "int" in types[key] else float
                if len(items) == 1:
                    items = items * 2
                if len(items) != 2:
                    raise ValueError
                kwargs[key] = (cast(items[0]), cast(items[1]))
            else:
                if len(items) != 1:
                    raise ValueError
                kwargs[key] = int(items[0]) if types[key] == "int" else float(items[0])
        except ValueError:
            raise ParseError("MALFORMED_LINE", f"bad value for {key}: {value!r}", line=lineno) from None
    return SyntheticSpec(**kwargs)


def _ms(seconds):
    return int(round(seconds * 1000))


def _vocabulary(rng, spec):
    words, seen = [], set()
    lo, hi = spec.phones_per_word
    while len(words) < spec.vocab_size:
        n = int(rng.integers(lo, hi + 1))
        phones = []
        for k in range(n):
            pool = _VOWELS if k % 2 else _CONSONANTS
            if k == 0 and rng.random() < 0.3:
                pool = _VOWELS
            phones.append(pool[int(rng.integers(len(pool)))])
        text = "".join(PHONES[p] for p in phones)
        if text not in seen:
            seen.add(text)
            words.append((text, tuple(phones)))
    return words


def _lay_out(sentences, rng, spec, durations):
    """Place sentences on a timeline (ms). Returns (UtteranceSet, per-sentence phone spans)."""
    gap_lo, gap_hi = _ms(spec.silence_gap_s[0]), _ms(spec.silence_gap_s[1])
    t = int(rng.integers(gap_lo, gap_hi + 1))
    loose = [PhoneInterval("sil", 0.0, t / 1000)]
    out, spans = [], []
    for words, durs in zip(sentences, durations):
        s_start = t
        word_objs, sent_spans = [], []
        for w, ((text, phones), wd) in enumerate(zip(words, durs)):
            if w and rng.random() < spec.pause_rate:
                pause = int(rng.integers(max(1, gap_lo // 4), max(2, gap_hi // 4) + 1))
                loose.append(PhoneInterval("sp", t / 1000, (t + pause) / 1000))
                t += pause
            w_start = t
            phone_objs = []
            for label, d in zip(phones, wd):
                phone_objs.append(PhoneInterval(label, t / 1000, (t + d) / 1000))
                t += d
            word_objs.append(WordInterval(text, w_start / 1000, t / 1000, tuple(phone_objs)))
            sent_spans.append(tuple(phone_objs))
        out.append(SentenceInterval(" ".join(text for text, _ in words), s_start / 1000, t / 1000,
                                    tuple(word_objs)))
        spans.append(sent_spans)
        gap = int(rng.integers(gap_lo, gap_hi + 1))
        loose.append(PhoneInterval("sil", t / 1000, (t + gap) / 1000))
        t += gap
    return UtteranceSet(tuple(out), total_duration_s=t / 1000, loose_phones=tuple(loose)), spans


def _draw_durations(rng, spec, phones):
    lo, hi = _ms(spec.phone_duration_s[0]), _ms(spec.phone_duration_s[1])
    return [int(rng.integers(lo, hi + 1)) for _ in phones]


def gen_synthetic(spec):
    """Generate ``SyntheticCorpus(mri, clean, truth, ...)``; deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    vocab = _vocabulary(rng, spec)
    wlo, whi = spec.words_per_sentence

    mri_sents, seen = [], set()
    attempts = 0
    while len(mri_sents) < spec.n_sentences:
        attempts += 1
        if attempts > 100 * spec.n_sentences:
            raise ContractError("INVALID_SPEC", "vocabulary too small for distinct sentences")
        n = int(rng.integers(wlo, whi + 1))
        words = [vocab[int(rng.integers(len(vocab)))] for _ in range(n)]
        key = " ".join(t for t, _ in words)
        if key not in seen:
            seen.add(key)
            mri_sents.append(words)
    mri_durs = [[_draw_durations(rng, spec, phones) for _, phones in words] for words in mri_sents]

    order = rng.permutation(spec.n_sentences)
    clean_id_of = [0] * spec.n_sentences
    clean_sents, clean_durs, substituted, perturbed = [], [], [], set()
    for cid, mid in enumerate(order):
        clean_id_of[mid] = cid
        words = list(mri_sents[mid])
        subs = set()
        if rng.random() < spec.error_rate:
            k = int(rng.integers(1, len(words) + 1))
            subs = set(rng.choice(len(words), size=k, replace=False).tolist())
            for w in sorted(subs):
                choices = [v for v in vocab if v[0] != words[w][0]]
                words[w] = choices[int(rng.integers(len(choices)))]
            perturbed.add(int(mid))
        durs = []
        for w, (_, phones) in enumerate(words):
            if w in subs:
                durs.append(_draw_durations(rng, spec, phones))
            else:
                durs.append([max(1, int(round(d * rng.uniform(*spec.warp)))) for d in mri_durs[mid][w]])
        clean_sents.append(words)
        clean_durs.append(durs)
        substituted.append(subs)

    mri, mri_spans = _lay_out(mri_sents, rng, spec, mri_durs)
    clean, clean_spans = _lay_out(clean_sents, rng, spec, clean_durs)

    pairs = []
    for mid in range(spec.n_sentences):
        cid = clean_id_of[mid]
        for w, (mp, cp) in enumerate(zip(mri_spans[mid], clean_spans[cid])):
            if w not in substituted[cid]:
                pairs.extend((m, c, mid) for m, c in zip(mp, cp))
    truth = truth_mapping(pairs, mri, clean, FrameClock(spec.mri_rate_hz), FrameClock(spec.clean_rate_hz))
    return SyntheticCorpus(mri, clean, truth, tuple(clean_id_of), frozenset(perturbed))


def truth_mapping(pairs, mri, clean, mri_clock, clean_clock, epsilon_s=0.001):
    """Ground-truth mapping from known ``(mri_phone, clean_phone, sentence_id)`` pairs.

    Each frame centre keeps its fractional position within the phone; the
    clean time is then quantized with the clean clock.
    """
    n_src = frame_count(mri.total_duration_s, mri_clock)
    n_tgt = max(1, frame_count(clean.total_duration_s, clean_clock))
    target = [UNMAPPED] * n_src
    label = [""] * n_src
    sid = [-1] * n_src
    clamped = [False] * n_src
    for m, c, s in pairs:
        for f in frames_in_interval(m.start_s, m.end_s, mri_clock):
            if f >= n_src or target[f] != UNMAPPED:
                continue
            mid = (f + 0.5) / mri_clock.frame_rate_hz
            frac = min(1.0, max(0.0, (mid - m.start_s) / max(m.end_s - m.start_s, epsilon_s)))
            t = c.start_s + frac * (c.end_s - c.start_s)
            idx = math.floor(t * clean_clock.sample_rate_hz / clean_clock.frame_period_samples)
            target[f] = min(max(idx, 0), n_tgt - 1)
            clamped[f] = target[f] != idx
            label[f], sid[f] = m.label, s
    for phone, s in mri.phone_spans():
        for f in frames_in_interval(phone.start_s, phone.end_s, mri_clock):
            if f < n_src and not label[f]:
                label[f], sid[f] = phone.label, s
    entries = tuple(
        MappingEntry(f, target[f], Method.PHONETIC, label[f], sid[f], clamped[f]) for f in range(n_src)
    )
    return FrameMapping(mri_clock.frame_rate_hz, clean_clock.frame_rate_hz, entries)


def synth_features(utts, clock, *, dim=16, seed=0, noise=0.0, similarity=0.0, labels=None):
    """Per-sentence feature sequences whose content is driven by the phone labels.

    A frame inside phone ``p`` at fractional position ``r`` gets
    ``base[p] + r * slope[p]`` plus Gaussian noise; silence is zero.
    ``similarity`` in [0, 1] pulls every label's vectors towards a shared
    one, making phones acoustically alike. Label vectors depend only on
    ``seed`` and the label, so two corpora built with the same seed agree.
    """
    rng = np.random.default_rng(seed)
    shared_base, shared_slope = rng.normal(size=dim), rng.normal(size=dim)
    vocab = sorted(labels if labels is not None else PHONES)
    table = {}
    for lab in vocab:
        base, slope = rng.normal(size=dim), rng.normal(size=dim)
        table[lab] = ((1 - similarity) * base + similarity * shared_base,
                      (1 - similarity) * slope + similarity * shared_slope)
    noise_rng = np.random.default_rng([seed, 1, int(round(utts.total_duration_s * 1000))])
    out = {}
    spans = [p for p, _ in utts.phone_spans()]
    starts = np.array([p.start_s for p in spans])
    for sid, sentence in enumerate(utts.sentences):
        frames = frames_in_interval(sentence.start_s, sentence.end_s, clock)
        feats = np.zeros((max(1, len(frames)), dim))
        for row, f in enumerate(frames):
            t = (f + 0.5) / clock.frame_rate_hz
            k = int(np.searchsorted(starts, t, side="right")) - 1
            if k < 0 or not t < spans[k].end_s or spans[k].label not in table:
                continue
            base, slope = table[spans[k].label]
            feats[row] = base + (t - spans[k].start_s) / spans[k].duration_s * slope
        if noise:
            feats = feats + noise_rng.normal(scale=noise, size=feats.shape)
        out[sid] = FeatureSequence(clock.frame_rate_hz, feats)
    return out
