"""Hierarchical sentence -> word -> phone alignment and phone-level time-stretching.

Each MRI frame whose centre falls in a paired phone is mapped to the same
relative position inside the paired clean phone, then quantized to a clean
frame index. Everything else stays unmapped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .corpus import (
    CLEAN_FRAME_RATE_HZ,
    MRI_FRAME_RATE_HZ,
    FrameClock,
    FrameMapping,
    MappingEntry,
    Method,
    PhoneInterval,
    UNMAPPED,
    frame_count,
    frame_mid_time,
    frames_in_interval,
)
from .errors import ContractError
from .similarity import similarity, similarity_upper_bound

EPSILON_S = 0.001
DEFAULT_THRESHOLD = 0.75


class SentencePair(NamedTuple):
    mri_id: int
    clean_id: int
    similarity: float


@dataclass(frozen=True)
class SentencePairing:
    pairs: tuple[SentencePair, ...]
    unmatched_mri: tuple[int, ...]
    threshold: float = DEFAULT_THRESHOLD


@dataclass(frozen=True)
class WordPairing:
    pairs: tuple[tuple[int, int], ...]
    unmatched_mri: tuple[int, ...]


class PhonePair(NamedTuple):
    mri: PhoneInterval
    clean: PhoneInterval
    mri_sentence_id: int = -1
    clean_sentence_id: int = -1


@dataclass(frozen=True)
class PhonePairing:
    pairs: tuple[PhonePair, ...]
    demoted: tuple[str, ...] = ()


@dataclass
class AlignmentReport:
    method: Method
    sentences_paired: int = 0
    sentences_unmatched: int = 0
    words_paired: int = 0
    words_unmatched: int = 0
    words_demoted: int = 0
    phones_paired: int = 0
    frames_mapped: int = 0
    frames_unmapped: int = 0
    frames_clamped: int = 0
    features: str = ""
    warnings: list[str] = field(default_factory=list)

    def count_frames(self, mapping):
        self.frames_mapped = sum(e.mapped for e in mapping.entries)
        self.frames_unmapped = len(mapping.entries) - self.frames_mapped
        self.frames_clamped = sum(e.clamped for e in mapping.entries)

    def to_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["method"] = self.method.value
        out["warnings"] = list(self.warnings)
        return out

    def to_text(self):
        lines = [f"alignment method: {self.method.value}"]
        if self.features:
            lines.append(f"features: {self.features}")
        lines.append(f"sentences: {self.sentences_paired} paired, {self.sentences_unmatched} unmatched")
        if self.method == Method.PHONETIC:
            lines += [
                f"words: {self.words_paired} paired, {self.words_unmatched} unmatched, {self.words_demoted} demoted",
                f"phones: {self.phones_paired} paired",
            ]
        lines.append(
            f"frames: {self.frames_mapped} mapped, {self.frames_unmapped} unmapped, {self.frames_clamped} clamped")
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class AlignConfig:
    threshold: float = DEFAULT_THRESHOLD
    mri_clock: FrameClock = field(default_factory=lambda: FrameClock(MRI_FRAME_RATE_HZ))
    clean_clock: FrameClock = field(default_factory=lambda: FrameClock(CLEAN_FRAME_RATE_HZ))
    clean_n_frames: int | None = None
    mri_n_frames: int | None = None
    epsilon_s: float = EPSILON_S
    one_to_one: bool = False


def pair_sentences(mri, clean, threshold=DEFAULT_THRESHOLD, one_to_one=False):
    """Pair every MRI sentence with its most similar clean sentence.

    Many-to-one by default; ``one_to_one`` assigns greedily by descending
    similarity instead, each clean sentence used once.
    """
    if not 0 < threshold <= 1:
        raise ContractError("INVALID_THRESHOLD", f"threshold {threshold} not in (0, 1]")
    clean_texts = [s.text for s in clean.sentences]
    if one_to_one:
        return _pair_one_to_one(mri, clean_texts, threshold)
    pairs, unmatched = [], []
    for mid, sentence in enumerate(mri.sentences):
        best_id, best = -1, -1.0
        for cid, text in enumerate(clean_texts):
            bound = similarity_upper_bound(sentence.text, text)
            if bound <= best or bound < threshold:
                continue
            score = similarity(sentence.text, text)
            if score > best:
                best_id, best = cid, score
        if best_id >= 0 and best >= threshold:
            pairs.append(SentencePair(mid, best_id, best))
        else:
            unmatched.append(mid)
    return SentencePairing(tuple(pairs), tuple(unmatched), threshold)


def _pair_one_to_one(mri, clean_texts, threshold):
    scored = []
    for mid, sentence in enumerate(mri.sentences):
        for cid, text in enumerate(clean_texts):
            if similarity_upper_bound(sentence.text, text) < threshold:
                continue
            score = similarity(sentence.text, text)
            if score >= threshold:
                scored.append((-score, mid, cid))
    scored.sort()
    used_m, used_c, pairs = set(), set(), []
    for neg, mid, cid in scored:
        if mid in used_m or cid in used_c:
            continue
        used_m.add(mid)
        used_c.add(cid)
        pairs.append(SentencePair(mid, cid, -neg))
    pairs.sort()
    unmatched = tuple(m for m in range(len(mri.sentences)) if m not in used_m)
    return SentencePairing(tuple(pairs), unmatched, threshold)


def relative_position(word, sentence):
    """Start of ``word`` as a fraction of ``sentence``'s span, clamped to [0, 1]."""
    span = sentence.end_s - sentence.start_s
    if not span > 0:
        raise ContractError("ZERO_DURATION_SENTENCE", f"sentence {sentence.text!r}")
    r = (word.start_s - sentence.start_s) / span
    return min(1.0, max(0.0, r))


def pair_words(mri_s, clean_s):
    """Pair words by text equality, resolving repeats by relative position.

    A clean word is consumed once chosen; ties go to the earlier candidate.
    """
    clean_pos = [relative_position(w, clean_s) for w in clean_s.words]
    used = set()
    pairs, unmatched = [], []
    for mi, word in enumerate(mri_s.words):
        r = relative_position(word, mri_s)
        best, best_d = None, math.inf
        for ci, cand in enumerate(clean_s.words):
            if ci in used or cand.text != word.text:
                continue
            d = abs(r - clean_pos[ci])
            if d < best_d:
                best, best_d = ci, d
        if best is None:
            unmatched.append(mi)
        else:
            used.add(best)
            pairs.append((mi, best))
    return WordPairing(tuple(pairs), tuple(unmatched))


def pair_phones(word_pair):
    """Pair phones by index; demote the word pair on any count or label mismatch."""
    mri_w, clean_w = word_pair
    a, b = mri_w.phones, clean_w.phones
    if len(a) != len(b):
        return PhonePairing((), (f"word {mri_w.text!r}: {len(a)} vs {len(b)} phones",))
    for pa, pb in zip(a, b):
        if pa.label != pb.label:
            return PhonePairing((), (f"word {mri_w.text!r}: phone {pa.label!r} vs {pb.label!r}",))
    return PhonePairing(tuple(PhonePair(pa, pb) for pa, pb in zip(a, b)))


def stretch_time(t_mid, mri_phone, clean_phone, epsilon_s=EPSILON_S):
    """Carry a time's relative position in ``mri_phone`` over to ``clean_phone``."""
    duration = max(mri_phone.end_s - mri_phone.start_s, epsilon_s)
    r = (t_mid - mri_phone.start_s) / duration
    r = min(1.0, max(0.0, r))
    return clean_phone.start_s + r * (clean_phone.end_s - clean_phone.start_s)


def map_frames(pairing, mri_clock, clean_clock, clean_n_frames, *,
               n_source_frames=None, source=None, epsilon_s=EPSILON_S):
    """Frame-level mapping from paired phones.

    Produces one entry per source frame ``0 .. n_source_frames - 1``. When
    ``source`` (the MRI segmentation) is given, unmapped frames still carry
    the label and sentence of the phone they fall in.
    """
    if not isinstance(mri_clock, FrameClock) or not isinstance(clean_clock, FrameClock):
        raise ContractError("INVALID_CLOCK", "clocks must be FrameClock instances")
    if clean_n_frames < 1:
        raise ContractError("INVALID_CLOCK", "clean_n_frames must be >= 1")
    if n_source_frames is None:
        ends = [p.mri.end_s for p in pairing.pairs]
        if source is not None:
            ends.append(source.total_duration_s)
        n_source_frames = frame_count(max(ends, default=0.0), mri_clock)

    target = np.full(n_source_frames, UNMAPPED, dtype=int)
    labels = [""] * n_source_frames
    sids = [-1] * n_source_frames
    clamped = np.zeros(n_source_frames, dtype=bool)
    taken = np.zeros(n_source_frames, dtype=bool)

    for pair in pairing.pairs:
        for f in frames_in_interval(pair.mri.start_s, pair.mri.end_s, mri_clock):
            if f >= n_source_frames or taken[f]:
                continue
            taken[f] = True
            t = stretch_time(frame_mid_time(f, mri_clock), pair.mri, pair.clean, epsilon_s)
            idx = clean_clock.index_of(t)
            if idx < 0 or idx > clean_n_frames - 1:
                idx = min(max(idx, 0), clean_n_frames - 1)
                clamped[f] = True
            target[f] = idx
            labels[f] = pair.mri.label
            sids[f] = pair.mri_sentence_id

    if source is not None:
        for phone, sid in source.phone_spans():
            for f in frames_in_interval(phone.start_s, phone.end_s, mri_clock):
                if f < n_source_frames and not taken[f]:
                    taken[f] = True
                    labels[f] = phone.label
                    sids[f] = sid

    entries = tuple(
        MappingEntry(f, int(target[f]), Method.PHONETIC, labels[f], sids[f], bool(clamped[f]))
        for f in range(n_source_frames)
    )
    return FrameMapping(mri_clock.frame_rate_hz, clean_clock.frame_rate_hz, entries)


def align_corpus(mri, clean, config=None):
    """Run the full hierarchy; returns ``(FrameMapping, AlignmentReport, SentencePairing)``."""
    config = config or AlignConfig()
    report = AlignmentReport(Method.PHONETIC)
    sentences = pair_sentences(mri, clean, config.threshold, config.one_to_one)
    report.sentences_paired = len(sentences.pairs)
    report.sentences_unmatched = len(sentences.unmatched_mri)
    for sid in sentences.unmatched_mri:
        report.warnings.append(f"MRI sentence {sid} ({mri.sentences[sid].text!r}) has no clean match")

    phone_pairs = []
    for sp in sentences.pairs:
        ms, cs = mri.sentences[sp.mri_id], clean.sentences[sp.clean_id]
        words = pair_words(ms, cs)
        report.words_unmatched += len(words.unmatched_mri)
        for mi, ci in words.pairs:
            phones = pair_phones((ms.words[mi], cs.words[ci]))
            if phones.demoted:
                report.words_demoted += 1
                report.warnings.extend(f"sentence {sp.mri_id}: {d}" for d in phones.demoted)
                continue
            report.words_paired += 1
            phone_pairs.extend(p._replace(mri_sentence_id=sp.mri_id, clean_sentence_id=sp.clean_id)
                               for p in phones.pairs)
    report.phones_paired = len(phone_pairs)

    clean_n = config.clean_n_frames
    if clean_n is None:
        clean_n = max(1, frame_count(clean.total_duration_s, config.clean_clock))
    n_source = config.mri_n_frames
    if n_source is None:
        n_source = frame_count(mri.total_duration_s, config.mri_clock)
    mapping = map_frames(
        PhonePairing(tuple(phone_pairs)), config.mri_clock, config.clean_clock, clean_n,
        n_source_frames=n_source, source=mri, epsilon_s=config.epsilon_s,
    )
    report.count_frames(mapping)
    return mapping, report, sentences
