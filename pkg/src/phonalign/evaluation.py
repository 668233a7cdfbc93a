"""Contour error metrics in millimetres and significance testing.

Per frame and articulator the error is the root mean squared Euclidean
displacement of that articulator's points, so a uniform (3, 4) mm shift
scores 5 mm. Reports summarize those cells per articulator and
globally (all kept cells weighted equally).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import special

from .corpus import ARTICULATOR_TITLES, ContourTrack, FrameClock, Units, frame_mid_time
from .errors import ContractError, InfeasibleError, ParseError
from .fileio import format_real, read_text

ALPHA = 0.05
GLOBAL = "mean"


def denormalize(track, stats):
    """NORMALIZED -> MM: ``(v * std + mean) * pixel_size_mm`` per articulator and axis."""
    if track.units != Units.NORMALIZED:
        raise ContractError("UNITS_MISMATCH", f"expected NORMALIZED contours, got {track.units.value}")
    idx = _stats_index(track, stats)
    pixels = track.points * stats.std[idx][None, :, None, :] + stats.mean[idx][None, :, None, :]
    return ContourTrack(track.frame_rate_hz, pixels * stats.pixel_size_mm, track.articulators, Units.MM)


def renormalize(track, stats):
    """Inverse of :func:`denormalize`."""
    if track.units != Units.MM:
        raise ContractError("UNITS_NOT_MM", f"expected MM contours, got {track.units.value}")
    idx = _stats_index(track, stats)
    pixels = track.points / stats.pixel_size_mm
    z = (pixels - stats.mean[idx][None, :, None, :]) / stats.std[idx][None, :, None, :]
    return ContourTrack(track.frame_rate_hz, z, track.articulators, Units.NORMALIZED)


def _stats_index(track, stats):
    where = {a: k for k, a in enumerate(stats.articulators)}
    missing = [a for a in track.articulators if a not in where]
    if missing:
        raise ContractError("MISSING_STATS", ", ".join(missing))
    return [where[a] for a in track.articulators]


def filter_silence(frames, seg, clock):
    """Keep frames whose centre lies in a non-silence phone ``[start, end)``."""
    spans = seg.phone_spans()
    starts = np.array([p.start_s for p, _ in spans])
    ends = np.array([p.end_s for p, _ in spans])
    speech = np.array([p.label not in seg.silence_labels for p, _ in spans], dtype=bool)
    kept = set()
    for f in frames:
        t = frame_mid_time(f, clock)
        k = np.searchsorted(starts, t, side="right") - 1
        # phones may overlap by up to the time tolerance: check the previous one as well
        for cand in (k, k - 1):
            if 0 <= cand < len(spans) and starts[cand] <= t < ends[cand]:
                if speech[cand]:
                    kept.add(int(f))
                break
    return kept


def _check_shapes(y, y_hat):
    if y.points.shape != y_hat.points.shape or y.articulators != y_hat.articulators:
        raise ContractError("SHAPE_MISMATCH", f"{y.points.shape} vs {y_hat.points.shape}")
    if y.units != y_hat.units:
        raise ContractError("SHAPE_MISMATCH", f"units {y.units.value} vs {y_hat.units.value}")


def mse(y, y_hat):
    """Mean squared coordinate difference over every frame, articulator, point and axis."""
    _check_shapes(y, y_hat)
    return float(np.mean((y.points - y_hat.points) ** 2))


@dataclass(frozen=True)
class FrameErrorTable:
    """RMSE in mm, shape (frames, articulators), with optional per-frame flags."""

    rmse: np.ndarray
    articulators: tuple[str, ...]
    silent: np.ndarray | None = None
    mapped: np.ndarray | None = None

    @property
    def n_frames(self):
        return self.rmse.shape[0]


def frame_rmse(y, y_hat):
    """Per (frame, articulator) RMS point displacement in mm.

    Squared displacement per point is summed over the two axes, so the mean
    of the squared table equals ``2 * mse(y, y_hat)``.
    """
    _check_shapes(y, y_hat)
    if y.units != Units.MM:
        raise ContractError("UNITS_NOT_MM", f"contours are {y.units.value}")
    sq = (y.points - y_hat.points) ** 2
    return FrameErrorTable(np.sqrt(sq.sum(axis=3).mean(axis=2)), y.articulators)


class Summary(NamedTuple):
    mean: float
    std: float
    median: float
    n: int


class TTestResult(NamedTuple):
    t: float
    p: float
    df: float
    significant: bool
    variant: str = "welch"


@dataclass
class EvalReport:
    """Per-articulator and global summaries plus the per-frame values they summarize."""

    articulators: tuple[str, ...]
    rows: dict[str, Summary]
    overall: Summary
    frames: np.ndarray
    values: np.ndarray
    comparisons: dict[str, dict[str, TTestResult]] = field(default_factory=dict)

    @property
    def n_frames_evaluated(self):
        return len(self.frames)

    def samples(self, articulator):
        if articulator == GLOBAL:
            return self.values.ravel()
        return self.values[:, self.articulators.index(articulator)]

    def to_dict(self):
        out = {
            "n_frames_evaluated": self.n_frames_evaluated,
            "articulators": {a: s._asdict() for a, s in self.rows.items()},
            GLOBAL: self.overall._asdict(),
        }
        if self.comparisons:
            out["comparisons"] = {
                name: {a: r._asdict() for a, r in res.items()} for name, res in self.comparisons.items()
            }
        return out


def _summary(values):
    return Summary(float(np.mean(values)), float(np.std(values)), float(np.median(values)), int(values.size))


def aggregate(table, keep):
    """Summaries over the kept frames (mean, population std, median)."""
    frames = np.array(sorted(int(f) for f in keep), dtype=int)
    if len(frames) == 0:
        raise InfeasibleError("EMPTY_SELECTION", "no frames left to evaluate")
    if frames[0] < 0 or frames[-1] >= table.n_frames:
        raise ContractError("DIMENSION_MISMATCH", "kept frame outside the error table")
    return _report(table.articulators, frames, table.rmse[frames])


def _report(articulators, frames, values):
    rows = {a: _summary(values[:, k]) for k, a in enumerate(articulators)}
    return EvalReport(tuple(articulators), rows, _summary(values), frames, values)


def evaluate(ref, pred, seg=None, *, stats=None, mapping=None):
    """Denormalize (if needed), score every frame, keep mapped non-silent frames, aggregate."""
    if ref.n_frames != pred.n_frames:
        raise ContractError("SHAPE_MISMATCH", f"{ref.n_frames} reference vs {pred.n_frames} predicted frames")
    if ref.units == Units.NORMALIZED:
        if stats is None:
            raise ContractError("MISSING_STATS", "normalized contours need norm stats")
        ref, pred = denormalize(ref, stats), denormalize(pred, stats)
    table = frame_rmse(ref, pred)
    keep = set(range(table.n_frames))
    silent = mapped = None
    if seg is not None:
        speech = filter_silence(keep, seg, FrameClock(ref.frame_rate_hz))
        silent = np.array([f not in speech for f in range(table.n_frames)])
        keep &= speech
    if mapping is not None:
        mapped_src = mapping.mapped_sources()
        mapped = np.array([f in mapped_src for f in range(table.n_frames)])
        keep &= mapped_src
    table = FrameErrorTable(table.rmse, table.articulators, silent, mapped)
    return aggregate(table, keep)


# -- significance ------------------------------------------------------------


def _t_two_sided(t, df):
    return float(special.stdtr(df, -abs(t)) * 2.0)


def welch_t_test(a, b, alpha=ALPHA):
    """Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ContractError("SAMPLE_TOO_SMALL", f"sizes {a.size} and {b.size}")
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0:
        if diff == 0:
            return TTestResult(0.0, 1.0, math.nan, False)
        raise ContractError("SINGULAR", "both samples constant with different means")
    t = diff / math.sqrt(se2)
    df = se2**2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1))
    p = _t_two_sided(t, df)
    return TTestResult(float(t), p, float(df), p < alpha)


def paired_t_test(a, b, alpha=ALPHA):
    """Two-sided paired t-test on ``a - b`` (same frames in both conditions)."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if d.size < 2:
        raise ContractError("SAMPLE_TOO_SMALL", f"{d.size} pairs")
    sd = d.std(ddof=1)
    if sd == 0:
        if d.mean() == 0:
            return TTestResult(0.0, 1.0, float(d.size - 1), False, "paired")
        raise ContractError("SINGULAR", "constant non-zero differences")
    t = d.mean() / (sd / math.sqrt(d.size))
    p = _t_two_sided(t, d.size - 1)
    return TTestResult(float(t), p, float(d.size - 1), p < alpha, "paired")


def compare(a, b, *, paired=False, alpha=ALPHA):
    """t-test of every articulator row and the global row between two reports."""
    if a.articulators != b.articulators:
        raise ContractError("SHAPE_MISMATCH", "reports cover different articulators")
    if paired:
        common, ia, ib = np.intersect1d(a.frames, b.frames, return_indices=True)
        if len(common) < 2:
            raise ContractError("SAMPLE_TOO_SMALL", f"{len(common)} frames in common")
        va, vb = a.values[ia], b.values[ib]
    else:
        va, vb = a.values, b.values
    test = paired_t_test if paired else welch_t_test
    out = {name: test(va[:, k], vb[:, k], alpha) for k, name in enumerate(a.articulators)}
    out[GLOBAL] = test(va.ravel(), vb.ravel(), alpha)
    return out


# -- report files -------------------------------------------------------------

SUMMARY_HEADER = "articulator,mean_rmse_mm,std_rmse_mm,median_rmse_mm,n"


def write_report_csv(report):
    out = [SUMMARY_HEADER]
    for name in report.articulators:
        s = report.rows[name]
        out.append(f"{name},{format_real(s.mean)},{format_real(s.std)},{format_real(s.median)},{s.n}")
    s = report.overall
    out.append(f"{GLOBAL},{format_real(s.mean)},{format_real(s.std)},{format_real(s.median)},{s.n}")
    return ("\n".join(out) + "\n").encode("utf-8")


def write_frame_errors_csv(report):
    """Per-frame RMSE of the kept frames: ``frame,<articulator>...``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", *report.articulators])
    for f, row in zip(report.frames, report.values):
        w.writerow([int(f), *(format_real(v) for v in row)])
    return buf.getvalue().encode("utf-8")


def parse_frame_errors(source):
    """Rebuild an :class:`EvalReport` from a per-frame error CSV."""
    rows = list(csv.reader(read_text(source).splitlines()))
    if not rows or rows[0][:1] != ["frame"] or len(rows[0]) < 2:
        raise ParseError("MALFORMED_HEADER", "expected 'frame,<articulator>...'", line=1)
    arts = tuple(rows[0][1:])
    frames, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(arts) + 1:
            raise ParseError("MALFORMED_LINE", f"expected {len(arts) + 1} fields", line=lineno)
        try:
            frames.append(int(row[0]))
            values.append([float(v) for v in row[1:]])
        except ValueError:
            raise ParseError("MALFORMED_LINE", "non-numeric field", line=lineno) from None
    values = np.array(values, dtype=float).reshape(-1, len(arts))
    if not np.all(np.isfinite(values)):
        raise ParseError("NON_FINITE_VALUE", "per-frame errors must be finite")
    if not frames:
        raise InfeasibleError("EMPTY_SELECTION", "no frames in error file")
    return _report(arts, np.array(frames, dtype=int), values)


def significance_marks(results, mark="*"):
    return {name: (mark if r.significant else "") for name, r in results.items()}


def format_table(conditions, marks=None, title="RMSE (mm) and Median (mm)"):
    """Text table: rows are articulators then Mean; per condition 'RMSE ± std' and 'Median'.

    ``conditions`` is a list of ``(name, EvalReport)``; ``marks`` maps a
    condition name to ``{row: marker}``.
    """
    marks = marks or {}
    names = [n for n, _ in conditions]
    arts = conditions[0][1].articulators
    labels = [ARTICULATOR_TITLES.get(a, a) for a in arts] + ["Mean"]
    keys = list(arts) + [GLOBAL]

    def cell(report, name, key):
        s = report.overall if key == GLOBAL else report.rows[key]
        star = marks.get(name, {}).get(key, "")
        return f"{s.mean:.2f}{star:<2} ± {s.std:.2f}", f"{s.median:.2f}"

    body = [[label] + [c for n, r in conditions for c in cell(r, n, k)] for label, k in zip(labels, keys)]
    head2 = [""] + ["RMSE", "Median"] * len(names)
    widths = [max(len(str(row[i])) for row in body + [head2]) for i in range(len(head2))]
    pair_w = [widths[1 + 2 * i] + 3 + widths[2 + 2 * i] for i in range(len(names))]

    def line(cells):
        return " | ".join(str(c).ljust(w) for c, w in zip(cells, widths))

    out = [title]
    out.append(" " * widths[0] + " | " + " | ".join(n.center(w) for n, w in zip(names, pair_w)))
    out.append(line(head2))
    sep = "-+-".join("-" * w for w in widths)
    out.append(sep)
    out.extend(line(row) for row in body[:-1])
    out.append(sep)
    out.append(line(body[-1]))
    return "\n".join(out) + "\n"
