"""Readers and writers for the on-disk formats.

Every ``parse_*`` accepts bytes, a binary file object or a path, and every
``write_*`` returns bytes in canonical form, so ``write(parse(x)) == x`` for
canonical ``x``. Parsers validate and reject; they never repair.
"""

from __future__ import annotations

import csv
import io
import math
import os
import re

import numpy as np

from .corpus import (
    ARTICULATORS,
    DEFAULT_SILENCE_LABELS,
    N_POINTS,
    TIME_TOL_S,
    ContourTrack,
    FeatureSequence,
    FrameMapping,
    MappingEntry,
    Method,
    NormStats,
    PhoneInterval,
    SentenceInterval,
    UNMAPPED,
    Units,
    UtteranceSet,
    WordInterval,
    normalize_phone,
    normalize_text,
)
from .errors import ContractError, ParseError

SEGMENTATION_HEADER = "tier\tstart_s\tend_s\tlabel"
CONTOUR_HEADER = "frame,articulator,point,x,y"
STATS_HEADER = "articulator,axis,mean,std"
MAPPING_HEADER = "source_idx,target_idx,method,phone,sentence_id,clamped"
PAIRING_HEADER = "mri_sentence_id,clean_sentence_id,similarity"

TIERS = ("sentence", "word", "phone")


def read_text(source):
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
        if isinstance(data, str):
            return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("MALFORMED_LINE", f"not UTF-8: {exc}") from None


def _lines(text):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [ln[:-1] if ln.endswith("\r") else ln for ln in lines]


def format_time(t):
    """Shortest round-tripping decimal with at least 3 fractional digits."""
    return np.format_float_positional(float(t), unique=True, min_digits=3, trim="k")


def format_real(v):
    return repr(float(v))


def _real(text, lineno, what="value"):
    try:
        v = float(text)
    except ValueError:
        raise ParseError("MALFORMED_LINE", f"bad {what} {text!r}", line=lineno) from None
    if not math.isfinite(v):
        raise ParseError("NON_FINITE_VALUE", f"{what} {text!r}", line=lineno)
    return v


def _int(text, lineno, what="index"):
    try:
        return int(text)
    except ValueError:
        raise ParseError("MALFORMED_LINE", f"bad {what} {text!r}", line=lineno) from None


# -- segmentations -----------------------------------------------------------


def parse_segmentation(source, format="tsv", silence_labels=DEFAULT_SILENCE_LABELS):
    """Parse a sentence/word/phone segmentation into an :class:`UtteranceSet`.

    ``format`` is ``"tsv"`` (the canonical 4-column file) or ``"textgrid"``
    (long-format Praat TextGrid restricted to interval tiers). Word and
    sentence intervals whose normalized label is a silence label are
    dropped; phone intervals outside every word are kept as loose phones.
    """
    text = read_text(source)
    fmt = format.lower()
    if fmt == "tsv":
        rows = _tsv_rows(text)
    elif fmt in ("textgrid", "textgrid_subset"):
        rows = _textgrid_rows(text)
    else:
        raise ValueError(f"unknown segmentation format {format!r}")
    return build_utterances(rows, silence_labels)


def _tsv_rows(text):
    lines = _lines(text)
    if not lines or lines[0].lstrip("﻿") != SEGMENTATION_HEADER:
        raise ParseError("MALFORMED_HEADER", f"expected {SEGMENTATION_HEADER!r}", line=1)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError("MALFORMED_LINE", f"expected 4 tab-separated fields, got {len(parts)}", line=lineno)
        tier, start, end, label = parts
        if tier not in TIERS:
            raise ParseError("MALFORMED_LINE", f"unknown tier {tier!r}", line=lineno)
        rows.append((tier, _real(start, lineno, "start_s"), _real(end, lineno, "end_s"), label, lineno))
    return rows


_TG_TIER_NAMES = {
    "sentence": ("sentence", "sentences", "utterance", "utterances", "utt", "phrase", "phrases"),
    "word": ("word", "words", "mot", "mots"),
    "phone": ("phone", "phones", "phoneme", "phonemes", "phon"),
}
_TG_KEY = re.compile(r'^\s*(\w+)\s*=\s*(.*?)\s*$')


def _tg_string(raw, lineno):
    if len(raw) < 2 or not (raw.startswith('"') and raw.endswith('"')):
        raise ParseError("MALFORMED_LINE", f"expected quoted string, got {raw!r}", line=lineno)
    return raw[1:-1].replace('""', '"')


def _textgrid_rows(text):
    lines = _lines(text)
    head = "\n".join(lines[:3])
    if 'ooTextFile' not in head or 'TextGrid' not in head:
        raise ParseError("MALFORMED_HEADER", "not a long-format ooTextFile TextGrid", line=1)
    rows = []
    tier = None
    skip_tier = True
    pending = {}
    for lineno, line in enumerate(lines, start=1):
        m = _TG_KEY.match(line)
        if not m:
            continue
        key, value = m.group(1), m.group(2)
        if key == "class":
            cls = _tg_string(value, lineno)
            if cls != "IntervalTier":
                raise ParseError("MALFORMED_LINE", f"unsupported tier class {cls!r}", line=lineno)
            tier, skip_tier = None, True
        elif key == "name":
            name = _tg_string(value, lineno).strip().lower()
            tier = next((t for t, names in _TG_TIER_NAMES.items() if name in names), None)
            skip_tier = tier is None
        elif key in ("xmin", "xmax") and tier is not None:
            pending[key] = (_real(value, lineno, key), lineno)
        elif key == "text" and tier is not None:
            label = _tg_string(value, lineno)
            if "xmin" not in pending or "xmax" not in pending:
                raise ParseError("MALFORMED_LINE", "interval text without bounds", line=lineno)
            rows.append((tier, pending["xmin"][0], pending["xmax"][0], label, pending["xmin"][1]))
            pending = {}
        elif key == "text" and skip_tier:
            pending = {}
    found = {r[0] for r in rows}
    missing = [t for t in TIERS if t not in found]
    if missing:
        raise ParseError("MALFORMED_HEADER", f"TextGrid lacks tier(s) {missing}")
    return rows


def build_utterances(rows, silence_labels=DEFAULT_SILENCE_LABELS):
    """Reconstruct nesting from flat ``(tier, start, end, label, lineno)`` rows."""
    silence = frozenset(silence_labels)
    tiers = {t: [] for t in TIERS}
    total = 0.0
    for tier, start, end, label, lineno in rows:
        if not end > start:
            raise ParseError("NON_MONOTONE_TIMES", f"{tier} interval [{start}, {end}]", line=lineno)
        total = max(total, end)
        if tier == "phone":
            norm = normalize_phone(label)
            if norm == "" and "" not in silence:
                raise ParseError("MALFORMED_LINE", "empty phone label", line=lineno)
        else:
            norm = normalize_text(label)
            if norm in silence:
                continue
        tiers[tier].append((start, end, norm, lineno))

    for tier, items in tiers.items():
        for prev, cur in zip(items, items[1:]):
            if cur[0] < prev[1] - TIME_TOL_S:
                raise ParseError(
                    "OVERLAPPING_INTERVALS",
                    f"{tier} [{cur[0]}, {cur[1]}] overlaps or precedes [{prev[0]}, {prev[1]}]",
                    line=cur[3],
                )
    if not tiers["sentence"]:
        raise ParseError("EMPTY_CORPUS", "no sentence intervals")

    words_of = _nest(tiers["word"], tiers["sentence"], "word", "sentence", orphans_ok=False)
    phones_of = _nest(tiers["phone"], tiers["word"], "phone", "word", orphans_ok=True)

    phone_objs = [PhoneInterval(lbl, s, e) for s, e, lbl, _ in tiers["phone"]]
    loose = tuple(phone_objs[i] for i in phones_of.pop(None, []))
    word_objs = []
    for k, (s, e, lbl, _) in enumerate(tiers["word"]):
        phones = tuple(phone_objs[i] for i in phones_of.get(k, []))
        word_objs.append(WordInterval(lbl, s, e, phones))
    sentences = []
    for k, (s, e, lbl, _) in enumerate(tiers["sentence"]):
        words = tuple(word_objs[w] for w in words_of.get(k, []))
        sentences.append(SentenceInterval(lbl, s, e, words))
    return UtteranceSet(tuple(sentences), silence, total, loose)


def _nest(children, parents, child_name, parent_name, orphans_ok):
    """Assign each child to the parent that contains it (1 ms tolerance).

    Both lists are time-ordered. Returns ``{parent_index: [child_index]}``;
    orphans go under ``None`` when allowed.
    """
    out = {}
    p = 0
    for ci, child in enumerate(children):
        start, end, _, lineno = child
        while p < len(parents) and parents[p][1] <= start + TIME_TOL_S and not (
            start >= parents[p][0] - TIME_TOL_S and end <= parents[p][1] + TIME_TOL_S
        ):
            p += 1
        inside = (
            p < len(parents)
            and start >= parents[p][0] - TIME_TOL_S
            and end <= parents[p][1] + TIME_TOL_S
        )
        if inside:
            out.setdefault(p, []).append(ci)
            continue
        if p < len(parents) and end > parents[p][0] + TIME_TOL_S:
            raise ParseError(
                "OVERLAPPING_INTERVALS",
                f"{child_name} [{start}, {end}] straddles {parent_name} [{parents[p][0]}, {parents[p][1]}]",
                line=lineno,
            )
        if not orphans_ok:
            raise ParseError("MALFORMED_LINE", f"{child_name} [{start}, {end}] outside every {parent_name}", line=lineno)
        out.setdefault(None, []).append(ci)
    return out


def write_segmentation(utts):
    """Canonical TSV: header, sentence rows, word rows, then phone rows."""
    out = [SEGMENTATION_HEADER]
    for s in utts.sentences:
        out.append(f"sentence\t{format_time(s.start_s)}\t{format_time(s.end_s)}\t{s.text}")
    for s in utts.sentences:
        for w in s.words:
            out.append(f"word\t{format_time(w.start_s)}\t{format_time(w.end_s)}\t{w.text}")
    for p, _ in utts.phone_spans():
        out.append(f"phone\t{format_time(p.start_s)}\t{format_time(p.end_s)}\t{p.label}")
    return ("\n".join(out) + "\n").encode("utf-8")


# -- contours and normalization statistics ----------------------------------


def parse_contours(source, *, units=Units.NORMALIZED, frame_rate_hz=20.0,
                   articulators=ARTICULATORS, n_points=N_POINTS):
    """Parse a contour CSV (``frame,articulator,point,x,y``).

    Rows must be exhaustive and sorted by (frame, articulator order, point).
    """
    lines = _lines(read_text(source))
    if not lines or lines[0].strip() != CONTOUR_HEADER:
        raise ParseError("MALFORMED_HEADER", f"expected {CONTOUR_HEADER!r}", line=1)
    art_index = {a: k for k, a in enumerate(articulators)}
    per_frame = len(articulators) * n_points
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) % per_frame:
        raise ContractError(
            "DIMENSION_MISMATCH",
            f"{len(body)} rows is not a whole number of frames of {per_frame} points",
        )
    n_frames = len(body) // per_frame
    pts = np.empty((n_frames, len(articulators), n_points, 2))
    for k, line in enumerate(body):
        lineno = k + 2
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError("MALFORMED_LINE", f"expected 5 fields, got {len(parts)}", line=lineno)
        frame = _int(parts[0], lineno, "frame")
        art = parts[1].strip()
        if art not in art_index:
            raise ParseError("MALFORMED_LINE", f"unknown articulator {art!r}", line=lineno)
        point = _int(parts[2], lineno, "point")
        expect = (k // per_frame, (k // n_points) % len(articulators), k % n_points)
        got = (frame, art_index[art], point)
        if got != expect:
            raise ContractError(
                "DIMENSION_MISMATCH",
                f"row {got} out of place; expected frame {expect[0]}, "
                f"{articulators[expect[1]]}, point {expect[2]}",
                line=lineno,
            )
        pts[expect] = (_real(parts[3], lineno, "x"), _real(parts[4], lineno, "y"))
    return ContourTrack(frame_rate_hz, pts, articulators, units)


def write_contours(track):
    out = [CONTOUR_HEADER]
    for f in range(track.n_frames):
        for a, name in enumerate(track.articulators):
            for p in range(track.n_points):
                x, y = track.points[f, a, p]
                out.append(f"{f},{name},{p},{format_real(x)},{format_real(y)}")
    return ("\n".join(out) + "\n").encode("utf-8")


def parse_norm_stats(source, articulators=ARTICULATORS):
    lines = _lines(read_text(source))
    if not lines or lines[0].strip() != STATS_HEADER:
        raise ParseError("MALFORMED_HEADER", f"expected {STATS_HEADER!r}", line=1)
    art_index = {a: k for k, a in enumerate(articulators)}
    mean = np.full((len(articulators), 2), np.nan)
    std = np.full((len(articulators), 2), np.nan)
    pixel = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        if parts[0] == "pixel_size_mm" and len(parts) == 2:
            pixel = _real(parts[1], lineno, "pixel_size_mm")
            continue
        if len(parts) != 4:
            raise ParseError("MALFORMED_LINE", f"expected 4 fields, got {len(parts)}", line=lineno)
        art, axis = parts[0], parts[1]
        if art not in art_index or axis not in ("x", "y"):
            raise ParseError("MALFORMED_LINE", f"unknown articulator/axis {art!r}/{axis!r}", line=lineno)
        k, ax = art_index[art], "xy".index(axis)
        mean[k, ax] = _real(parts[2], lineno, "mean")
        std[k, ax] = _real(parts[3], lineno, "std")
    if pixel is None:
        raise ParseError("MALFORMED_LINE", "missing pixel_size_mm line")
    if np.isnan(mean).any():
        missing = [f"{articulators[a]}/{'xy'[x]}" for a, x in zip(*np.nonzero(np.isnan(mean)))]
        raise ContractError("MISSING_STATS", ", ".join(missing))
    return NormStats(mean, std, articulators, pixel)


def write_norm_stats(stats):
    out = [STATS_HEADER]
    for k, name in enumerate(stats.articulators):
        for ax, axis in enumerate("xy"):
            out.append(f"{name},{axis},{format_real(stats.mean[k, ax])},{format_real(stats.std[k, ax])}")
    out.append(f"pixel_size_mm,{format_real(stats.pixel_size_mm)}")
    return ("\n".join(out) + "\n").encode("utf-8")


# -- feature sequences ------------------------------------------------------

_FEAT_HEADER = re.compile(r"^frames=(\d+) dim=(\d+) rate_hz=(\S+)$")


def parse_features(source):
    lines = _lines(read_text(source))
    m = _FEAT_HEADER.match(lines[0].strip()) if lines else None
    if not m:
        raise ParseError("MALFORMED_HEADER", "expected 'frames=<n> dim=<d> rate_hz=<r>'", line=1)
    n, dim = int(m.group(1)), int(m.group(2))
    rate = _real(m.group(3), 1, "rate_hz")
    if n < 1 or dim < 1 or rate <= 0:
        raise ContractError("DIMENSION_MISMATCH", f"frames={n} dim={dim} rate_hz={rate}")
    body = lines[1:]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != n:
        raise ContractError("DIMENSION_MISMATCH", f"header declares {n} frames, found {len(body)}")
    frames = np.empty((n, dim))
    for k, line in enumerate(body):
        values = line.split()
        if len(values) != dim:
            raise ContractError("DIMENSION_MISMATCH", f"{len(values)} values, expected {dim}", line=k + 2)
        frames[k] = [_real(v, k + 2) for v in values]
    return FeatureSequence(rate, frames)


def write_features(seq):
    out = [f"frames={seq.n_frames} dim={seq.dim} rate_hz={format_real(seq.frame_rate_hz)}"]
    out.extend(" ".join(format_real(v) for v in row) for row in seq.frames)
    return ("\n".join(out) + "\n").encode("utf-8")


# -- frame mappings ---------------------------------------------------------

_RATES_LINE = re.compile(r"^#\s*source_rate_hz=(\S+)\s+target_rate_hz=(\S+)\s*$")


def write_frame_mapping(mapping):
    """CSV with a leading ``# source_rate_hz=.. target_rate_hz=..`` comment."""
    buf = io.StringIO()
    buf.write(
        f"# source_rate_hz={format_real(mapping.source_frame_rate_hz)} "
        f"target_rate_hz={format_real(mapping.target_frame_rate_hz)}\n"
    )
    buf.write(MAPPING_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    for e in mapping.entries:
        writer.writerow([e.source_idx, e.target_idx, e.method.value, e.phone, e.sentence_id, int(e.clamped)])
    return buf.getvalue().encode("utf-8")


def parse_frame_mapping(source, source_rate_hz=None, target_rate_hz=None):
    lines = _lines(read_text(source))
    rates = (source_rate_hz, target_rate_hz)
    first = 0
    if lines and lines[0].startswith("#"):
        m = _RATES_LINE.match(lines[0])
        if not m:
            raise ParseError("MALFORMED_HEADER", "bad rate comment", line=1)
        rates = (_real(m.group(1), 1), _real(m.group(2), 1))
        first = 1
    if len(lines) <= first or lines[first].strip() != MAPPING_HEADER:
        raise ParseError("MALFORMED_HEADER", f"expected {MAPPING_HEADER!r}", line=first + 1)
    if rates[0] is None or rates[1] is None:
        raise ParseError("MALFORMED_HEADER", "frame rates neither in file nor given")
    entries = []
    reader = csv.reader(lines[first + 1:])
    for offset, row in enumerate(reader):
        lineno = first + 2 + offset
        if not row:
            continue
        if len(row) != 6:
            raise ParseError("MALFORMED_LINE", f"expected 6 fields, got {len(row)}", line=lineno)
        src, tgt = _int(row[0], lineno), _int(row[1], lineno)
        try:
            method = Method(row[2])
        except ValueError:
            raise ParseError("MALFORMED_LINE", f"unknown method {row[2]!r}", line=lineno) from None
        if row[5] not in ("0", "1"):
            raise ParseError("MALFORMED_LINE", f"clamped must be 0 or 1, got {row[5]!r}", line=lineno)
        if tgt < UNMAPPED:
            raise ParseError("MALFORMED_LINE", f"target_idx {tgt}", line=lineno)
        if entries and src <= entries[-1].source_idx:
            raise ParseError("NON_MONOTONE_TIMES", f"source_idx {src} not increasing", line=lineno)
        entries.append(MappingEntry(src, tgt, method, row[3], _int(row[4], lineno), row[5] == "1"))
    return FrameMapping(rates[0], rates[1], tuple(entries))


# -- sentence pairings ------------------------------------------------------


def write_pairing(pairing):
    """Paired rows, then unmatched MRI sentences with clean id -1."""
    out = [PAIRING_HEADER]
    for p in pairing.pairs:
        out.append(f"{p.mri_id},{p.clean_id},{format_real(p.similarity)}")
    for sid in pairing.unmatched_mri:
        out.append(f"{sid},-1,")
    return ("\n".join(out) + "\n").encode("utf-8")


def parse_pairing(source, threshold=0.75):
    from .phonetic import SentencePair, SentencePairing

    lines = _lines(read_text(source))
    if not lines or lines[0].strip() != PAIRING_HEADER:
        raise ParseError("MALFORMED_HEADER", f"expected {PAIRING_HEADER!r}", line=1)
    pairs, unmatched = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError("MALFORMED_LINE", f"expected 3 fields, got {len(parts)}", line=lineno)
        mri_id, clean_id = _int(parts[0], lineno), _int(parts[1], lineno)
        if clean_id == -1:
            unmatched.append(mri_id)
        else:
            pairs.append(SentencePair(mri_id, clean_id, _real(parts[2], lineno, "similarity")))
    return SentencePairing(tuple(pairs), tuple(unmatched), threshold)
