"""Dynamic time warping baseline.

Symmetric step set (1,0), (0,1), (1,1) with unit weights, Euclidean local
cost, optional Sakoe-Chiba band. Ties in the traceback prefer the diagonal,
then the (1,0) step, so paths are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .corpus import (
    FeatureSequence,
    FrameClock,
    FrameMapping,
    MappingEntry,
    Method,
    UNMAPPED,
    frame_count,
    frames_in_interval,
)
from .errors import ContractError, InfeasibleError
from .phonetic import AlignmentReport


@dataclass(frozen=True)
class WarpingPath:
    steps: tuple[tuple[int, int], ...]
    total_cost: float

    def __len__(self):
        return len(self.steps)


def _as_matrix(x):
    if isinstance(x, FeatureSequence):
        return x.frames
    arr = np.asarray(x, dtype=float)
    return arr[:, None] if arr.ndim == 1 else arr


def accumulated_cost(cost, band_radius=None):
    """Cumulative cost matrix for a local cost matrix (inf outside the band)."""
    n, m = cost.shape
    D = [[math.inf] * m for _ in range(n)]
    c = cost.tolist()
    for i in range(n):
        if band_radius is None:
            jlo, jhi = 0, m - 1
        else:
            centre = i * m / n
            jlo = max(0, math.ceil(centre - band_radius))
            jhi = min(m - 1, math.floor(centre + band_radius))
        row, ci = D[i], c[i]
        up = D[i - 1] if i else None
        for j in range(jlo, jhi + 1):
            if i == 0 and j == 0:
                row[0] = ci[0]
                continue
            best = math.inf
            if up is not None:
                best = up[j]
                if j and up[j - 1] < best:
                    best = up[j - 1]
            if j and row[j - 1] < best:
                best = row[j - 1]
            row[j] = ci[j] + best
    return np.array(D)


def _traceback(D):
    i, j = D.shape[0] - 1, D.shape[1] - 1
    steps = [(i, j)]
    while i or j:
        if i and j:
            options = ((D[i - 1, j - 1], i - 1, j - 1), (D[i - 1, j], i - 1, j), (D[i, j - 1], i, j - 1))
        elif i:
            options = ((D[i - 1, j], i - 1, j),)
        else:
            options = ((D[i, j - 1], i, j - 1),)
        best = options[0]
        for opt in options[1:]:
            if opt[0] < best[0]:
                best = opt
        _, i, j = best
        steps.append((i, j))
    steps.reverse()
    return tuple(steps)


def dtw(x, y, band_radius=None):
    """Minimum-cost warping path between two sequences (``FeatureSequence`` or arrays)."""
    a, b = _as_matrix(x), _as_matrix(y)
    if a.shape[1] != b.shape[1]:
        raise ContractError("DIMENSION_MISMATCH", f"feature dims {a.shape[1]} and {b.shape[1]}")
    if len(a) == 0 or len(b) == 0:
        raise ContractError("DIMENSION_MISMATCH", "empty sequence")
    D = accumulated_cost(cdist(a, b), band_radius)
    total = D[-1, -1]
    if not math.isfinite(total):
        raise InfeasibleError("BAND_INFEASIBLE", f"band radius {band_radius} for {len(a)}x{len(b)}")
    return WarpingPath(_traceback(D), float(total))


def path_to_frame_mapping(path, src_rate, tgt_rate, *, source_offset=0, target_offset=0,
                          sentence_id=-1, labels=None):
    """Collapse a path to one target per source index (lower median of its ``j``s)."""
    by_i = {}
    for i, j in path.steps:
        by_i.setdefault(i, []).append(j)
    entries = []
    for i in sorted(by_i):
        js = sorted(by_i[i])
        j = js[(len(js) - 1) // 2]
        label = labels[i] if labels is not None else ""
        entries.append(MappingEntry(source_offset + i, target_offset + j, Method.DTW, label, sentence_id))
    return FrameMapping(src_rate, tgt_rate, tuple(entries))


def _sentence_offsets(features, utts):
    """First global frame of each sentence: from the segmentation if given, else cumulative."""
    if utts is not None:
        out = {}
        for sid, seq in features.items():
            clock = FrameClock(seq.frame_rate_hz)
            frames = frames_in_interval(utts.sentences[sid].start_s, utts.sentences[sid].end_s, clock)
            out[sid] = int(frames[0]) if len(frames) else frame_count(utts.sentences[sid].start_s, clock)
        return out
    out, pos = {}, 0
    for sid in sorted(features):
        out[sid] = pos
        pos += features[sid].n_frames
    return out


def _common_rate(features, side):
    rates = {seq.frame_rate_hz for seq in features.values()}
    if len(rates) > 1:
        raise ContractError("INCONSISTENT_RATE", f"{side} features at rates {sorted(rates)}")
    return rates.pop() if rates else None


def align_corpus_dtw(mri_features, clean_features, pairing, *, band_radius=None,
                     mri=None, clean=None, n_source_frames=None, feature_note=""):
    """Per-sentence DTW stitched into one corpus-level mapping.

    ``mri_features`` / ``clean_features`` map sentence id to sequence. With
    the segmentations ``mri`` / ``clean`` supplied, sentence frames sit at
    their absolute positions (comparable to the phonetic mapping); without
    them sentences are concatenated in id order.
    Returns ``(FrameMapping, AlignmentReport)``.
    """
    report = AlignmentReport(Method.DTW, features=feature_note)
    for sp in pairing.pairs:
        if sp.mri_id not in mri_features:
            raise ContractError("MISSING_FEATURES", f"MRI sentence {sp.mri_id}")
        if sp.clean_id not in clean_features:
            raise ContractError("MISSING_FEATURES", f"clean sentence {sp.clean_id}")
    src_rate = _common_rate(mri_features, "MRI")
    tgt_rate = _common_rate(clean_features, "clean")
    src_off = _sentence_offsets(mri_features, mri)
    tgt_off = _sentence_offsets(clean_features, clean)

    if n_source_frames is None:
        if mri is not None:
            n_source_frames = frame_count(mri.total_duration_s, FrameClock(src_rate))
        else:
            n_source_frames = 0
        for sid, seq in mri_features.items():
            n_source_frames = max(n_source_frames, src_off[sid] + seq.n_frames)

    target = np.full(n_source_frames, UNMAPPED, dtype=int)
    sids = np.full(n_source_frames, -1, dtype=int)
    taken = np.zeros(n_source_frames, dtype=bool)
    for sp in pairing.pairs:
        x, y = mri_features[sp.mri_id], clean_features[sp.clean_id]
        path = dtw(x, y, band_radius)
        local = path_to_frame_mapping(path, src_rate, tgt_rate,
                                      source_offset=src_off[sp.mri_id], target_offset=tgt_off[sp.clean_id])
        for e in local.entries:
            if e.source_idx < n_source_frames and not taken[e.source_idx]:
                taken[e.source_idx] = True
                target[e.source_idx] = e.target_idx
                sids[e.source_idx] = sp.mri_id
        if mri is not None:
            span = len(frames_in_interval(mri.sentences[sp.mri_id].start_s,
                                          mri.sentences[sp.mri_id].end_s, FrameClock(src_rate)))
            if span != x.n_frames:
                report.warnings.append(
                    f"MRI sentence {sp.mri_id}: {x.n_frames} feature frames for a {span}-frame span")
    for sid in pairing.unmatched_mri:
        if sid in mri_features:
            lo = src_off[sid]
            hi = min(n_source_frames, lo + mri_features[sid].n_frames)
            sids[lo:hi] = np.where(taken[lo:hi], sids[lo:hi], sid)

    labels = [""] * n_source_frames
    if mri is not None:
        clock = FrameClock(src_rate)
        for phone, sid in mri.phone_spans():
            for f in frames_in_interval(phone.start_s, phone.end_s, clock):
                if f < n_source_frames and not labels[f]:
                    labels[f] = phone.label
                    if sids[f] < 0:
                        sids[f] = sid

    entries = tuple(
        MappingEntry(f, int(target[f]), Method.DTW, labels[f], int(sids[f]), False)
        for f in range(n_source_frames)
    )
    mapping = FrameMapping(src_rate, tgt_rate, entries)
    report.sentences_paired = len(pairing.pairs)
    report.sentences_unmatched = len(pairing.unmatched_mri)
    report.count_frames(mapping)
    return mapping, report
