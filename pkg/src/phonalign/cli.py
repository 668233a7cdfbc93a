"""Command-line front end.

Exit codes: 0 success, 2 parse error, 3 contract violation, 4 infeasible.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import tempfile
from pathlib import Path

from . import evaluation as ev
from .corpus import CLEAN_FRAME_RATE_HZ, MRI_FRAME_RATE_HZ, SAMPLE_RATE_HZ, FrameClock, Units
from .dtw import align_corpus_dtw
from .errors import AlignmentError, ParseError
from .features import MelConfig, extract_logmel, read_pcm
from .fileio import (
    parse_contours,
    parse_features,
    parse_frame_mapping,
    parse_norm_stats,
    parse_pairing,
    parse_segmentation,
    write_features,
    write_frame_mapping,
    write_pairing,
    write_segmentation,
)
from .phonetic import DEFAULT_THRESHOLD, EPSILON_S, AlignConfig, align_corpus
from .synth import SyntheticSpec, gen_synthetic, parse_spec, synth_features


def write_atomic(path, data):
    """Write bytes via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_config(path):
    """``key = value`` lines; keys are option names with or without dashes."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("MALFORMED_LINE", f"config {path}: expected key = value", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _emit(args, text, payload):
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------


def cmd_align_phonetic(args):
    mri = parse_segmentation(Path(args.mri), args.format)
    clean = parse_segmentation(Path(args.clean), args.format)
    config = AlignConfig(
        threshold=args.threshold,
        mri_clock=FrameClock(args.mri_rate, args.sample_rate),
        clean_clock=FrameClock(args.clean_rate, args.sample_rate),
        clean_n_frames=args.clean_frames,
        mri_n_frames=args.mri_frames,
        epsilon_s=args.epsilon,
        one_to_one=args.one_to_one,
    )
    mapping, report, pairing = align_corpus(mri, clean, config)
    write_atomic(args.output, write_frame_mapping(mapping))
    if args.pairing_out:
        write_atomic(args.pairing_out, write_pairing(pairing))
    _emit(args, report.to_text(), report.to_dict())


def _load_feature_dir(path):
    out = {}
    for entry in sorted(Path(path).iterdir()):
        m = re.fullmatch(r"(\d+)\.feat", entry.name)
        if m:
            out[int(m.group(1))] = parse_features(entry)
    return out


def cmd_align_dtw(args):
    pairing = parse_pairing(Path(args.pairing))
    mri_feats = _load_feature_dir(args.mri_feats)
    clean_feats = _load_feature_dir(args.clean_feats)
    mri = parse_segmentation(Path(args.mri_seg), args.format) if args.mri_seg else None
    clean = parse_segmentation(Path(args.clean_seg), args.format) if args.clean_seg else None
    note = args.feature_note or f"feature files from {args.mri_feats} and {args.clean_feats}"
    mapping, report = align_corpus_dtw(mri_feats, clean_feats, pairing, band_radius=args.band,
                                       mri=mri, clean=clean, feature_note=note)
    write_atomic(args.output, write_frame_mapping(mapping))
    _emit(args, report.to_text(), report.to_dict())


def cmd_features_logmel(args):
    audio, rate = read_pcm(args.audio, args.sample_rate)
    cfg = MelConfig(window_s=args.window, hop_s=args.hop, n_mels=args.n_mels, sample_rate_hz=rate)
    seq = extract_logmel(audio, cfg)
    write_atomic(args.output, write_features(seq))
    _emit(args, f"{seq.n_frames} frames x {seq.dim} log-mel bands at {seq.frame_rate_hz:g} Hz\n",
          {"frames": seq.n_frames, "dim": seq.dim, "rate_hz": seq.frame_rate_hz})


def _frames_path(report_path):
    p = Path(report_path)
    return p.with_name(p.stem + ".frames.csv")


def cmd_eval(args):
    units = Units(args.units.upper())
    ref = parse_contours(Path(args.ref), units=units, frame_rate_hz=args.rate)
    pred = parse_contours(Path(args.pred), units=units, frame_rate_hz=args.rate)
    stats = parse_norm_stats(Path(args.stats)) if args.stats else None
    seg = parse_segmentation(Path(args.seg), args.format) if args.seg else None
    mapping = parse_frame_mapping(Path(args.mapping)) if args.mapping else None
    report = ev.evaluate(ref, pred, seg, stats=stats, mapping=mapping)
    write_atomic(args.output, ev.write_report_csv(report))
    write_atomic(args.frames_out or _frames_path(args.output), ev.write_frame_errors_csv(report))
    _emit(args, ev.format_table([(args.label, report)]), report.to_dict())


def cmd_compare(args):
    a = ev.parse_frame_errors(Path(args.frames_a or _frames_path(args.report_a)))
    b = ev.parse_frame_errors(Path(args.frames_b or _frames_path(args.report_b)))
    results = ev.compare(a, b, paired=args.paired, alpha=args.alpha)
    marks = {args.label_b: ev.significance_marks(results)}
    table = ev.format_table([(args.label_a, a), (args.label_b, b)], marks)
    variant = "paired" if args.paired else "Welch"
    table += f"* significant difference from {args.label_a} (p < {args.alpha:g}, two-sided {variant} t-test)\n"
    payload = {
        args.label_a: a.to_dict(),
        args.label_b: b.to_dict(),
        "tests": {k: r._asdict() for k, r in results.items()},
        "alpha": args.alpha,
    }
    if args.output:
        lines = ["articulator,t,p,df,significant,variant"]
        lines += [f"{k},{r.t!r},{r.p!r},{r.df!r},{int(r.significant)},{r.variant}" for k, r in results.items()]
        write_atomic(args.output, ("\n".join(lines) + "\n").encode("utf-8"))
    _emit(args, table, payload)


def cmd_synth(args):
    spec = parse_spec(Path(args.spec).read_text(encoding="utf-8")) if args.spec else SyntheticSpec()
    corpus = gen_synthetic(spec)
    out = Path(args.output)
    write_atomic(out / "mri.tsv", write_segmentation(corpus.mri))
    write_atomic(out / "clean.tsv", write_segmentation(corpus.clean))
    write_atomic(out / "truth.csv", write_frame_mapping(corpus.truth))
    if args.features:
        for name, utts, rate in (("mri", corpus.mri, spec.mri_rate_hz), ("clean", corpus.clean, spec.clean_rate_hz)):
            feats = synth_features(utts, FrameClock(rate), dim=args.feature_dim, seed=spec.seed,
                                   noise=args.feature_noise)
            for sid, seq in feats.items():
                write_atomic(out / f"{name}_feats" / f"{sid}.feat", write_features(seq))
    info = {
        "sentences": spec.n_sentences,
        "perturbed": sorted(corpus.perturbed),
        "mri_duration_s": corpus.mri.total_duration_s,
        "clean_duration_s": corpus.clean.total_duration_s,
    }
    _emit(args, f"wrote {spec.n_sentences} sentence pairs to {out} "
                f"({len(corpus.perturbed)} perturbed)\n", info)


# -- parser -----------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="phonalign", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output=True, required_output=True):
        p.add_argument("--json", action="store_true", help="machine-readable report on stdout")
        p.add_argument("--config", help="key = value file; flags override it")
        if output:
            p.add_argument("-o", "--output", required=required_output)

    align = sub.add_parser("align", help="build a frame mapping").add_subparsers(dest="method", required=True)
    ph = align.add_parser("phonetic", help="hierarchical phonetic alignment")
    ph.add_argument("--mri", required=True)
    ph.add_argument("--clean", required=True)
    ph.add_argument("--format", default="tsv", choices=["tsv", "textgrid"])
    ph.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    ph.add_argument("--mri-rate", type=float, default=MRI_FRAME_RATE_HZ)
    ph.add_argument("--clean-rate", type=float, default=CLEAN_FRAME_RATE_HZ)
    ph.add_argument("--sample-rate", type=float, default=SAMPLE_RATE_HZ)
    ph.add_argument("--mri-frames", type=int)
    ph.add_argument("--clean-frames", type=int)
    ph.add_argument("--epsilon", type=float, default=EPSILON_S)
    ph.add_argument("--one-to-one", action="store_true")
    ph.add_argument("--pairing-out")
    common(ph)
    ph.set_defaults(func=cmd_align_phonetic)

    dt = align.add_parser("dtw", help="per-sentence DTW over feature files")
    dt.add_argument("--pairing", required=True)
    dt.add_argument("--mri-feats", required=True)
    dt.add_argument("--clean-feats", required=True)
    dt.add_argument("--band", type=float)
    dt.add_argument("--mri-seg")
    dt.add_argument("--clean-seg")
    dt.add_argument("--format", default="tsv", choices=["tsv", "textgrid"])
    dt.add_argument("--feature-note", default="")
    common(dt)
    dt.set_defaults(func=cmd_align_dtw)

    feats = sub.add_parser("features", help="feature extraction").add_subparsers(dest="kind", required=True)
    lm = feats.add_parser("logmel", help="log-mel filterbank energies")
    lm.add_argument("--audio", required=True)
    lm.add_argument("--sample-rate", type=int)
    lm.add_argument("--window", type=float, default=0.025)
    lm.add_argument("--hop", type=float, default=0.020)
    lm.add_argument("--n-mels", type=int, default=40)
    common(lm)
    lm.set_defaults(func=cmd_features_logmel)

    e = sub.add_parser("eval", help="contour RMSE report")
    e.add_argument("--ref", required=True)
    e.add_argument("--pred", required=True)
    e.add_argument("--stats")
    e.add_argument("--seg")
    e.add_argument("--mapping")
    e.add_argument("--format", default="tsv", choices=["tsv", "textgrid"])
    e.add_argument("--units", default="normalized", choices=["normalized", "pixels", "mm"])
    e.add_argument("--rate", type=float, default=MRI_FRAME_RATE_HZ)
    e.add_argument("--label", default="result")
    e.add_argument("--frames-out")
    common(e)
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="t-tests between two eval reports")
    c.add_argument("--report-a", required=True)
    c.add_argument("--report-b", required=True)
    c.add_argument("--frames-a")
    c.add_argument("--frames-b")
    c.add_argument("--label-a", default="A")
    c.add_argument("--label-b", default="B")
    c.add_argument("--paired", action="store_true")
    c.add_argument("--alpha", type=float, default=ev.ALPHA)
    common(c, required_output=False)
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("synth", help="synthetic parallel corpora with ground truth")
    s.add_argument("--spec")
    s.add_argument("--features", action="store_true", help="also write per-sentence feature files")
    s.add_argument("--feature-dim", type=int, default=16)
    s.add_argument("--feature-noise", type=float, default=0.0)
    common(s)
    s.set_defaults(func=cmd_synth)
    return parser


def _subparser_for(parser, argv):
    """The innermost subparser selected by ``argv`` (for applying config defaults)."""
    node = parser
    for token in argv:
        actions = [a for a in node._actions if isinstance(a, argparse._SubParsersAction)]
        if not actions or token not in actions[0].choices:
            break
        node = actions[0].choices[token]
    return node


def parse_args(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        config = read_config(args.config)
        target = _subparser_for(parser, argv)
        known = {a.dest: a for a in target._actions}
        defaults = {}
        for key, value in config.items():
            if key not in known or key in ("config", "help"):
                raise ParseError("MALFORMED_LINE", f"config {args.config}: unknown option {key!r}")
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = action.type(value) if action.type else value
        target.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None):
    try:
        args = parse_args(argv)
        args.func(args)
    except AlignmentError as exc:
        print(f"phonalign: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"phonalign: error: {exc}", file=sys.stderr)
        return ParseError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
