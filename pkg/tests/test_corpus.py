from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phonalign.corpus import (
    ARTICULATORS,
    ContourTrack,
    FeatureSequence,
    FrameClock,
    FrameMapping,
    MappingEntry,
    Method,
    NormStats,
    Units,
    frame_count,
    frame_mid_time,
    frames_in_interval,
    normalize_text,
)
from phonalign.errors import ContractError, ParseError
from phonalign.fileio import (
    parse_contours,
    parse_features,
    parse_frame_mapping,
    parse_norm_stats,
    parse_segmentation,
    write_contours,
    write_features,
    write_frame_mapping,
    write_norm_stats,
    write_segmentation,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.mark.parametrize("raw, expected", [
    ("Après  une HEURE.", "après une heure"),
    ("", ""),
    ("l'heure", "l'heure"),
    ("l’heure", "l'heure"),
    ("  rendez-vous, demain ! ", "rendez-vous demain"),
    ("'quoted' - dash", "quoted dash"),
    ("Après", "après"),
])
def test_normalize_text(raw, expected):
    assert normalize_text(raw) == expected


@given(st.text())
def test_normalize_text_idempotent(raw):
    once = normalize_text(raw)
    assert normalize_text(once) == once


@pytest.mark.parametrize("idx, rate, expected", [(0, 20, 0.025), (99, 20, 4.975), (7, 50, 0.15)])
def test_frame_mid_time(idx, rate, expected):
    assert frame_mid_time(idx, FrameClock(rate)) == pytest.approx(expected, abs=1e-12)


@given(st.integers(0, 10**6), st.sampled_from([20.0, 50.0, 100.0]))
def test_frame_mid_time_increasing(idx, rate):
    clock = FrameClock(rate)
    assert frame_mid_time(idx + 1, clock) > frame_mid_time(idx, clock)


def test_clock_defaults_and_validation():
    assert FrameClock(20).frame_period_samples == 800
    assert FrameClock(50).frame_period_samples == 320
    # 16000 / 2286 samples = 6.9991 Hz: within 0.1 %
    assert FrameClock(7, 16000).frame_period_samples == 2286
    with pytest.raises(ContractError) as err:
        FrameClock(7.3, 10)
    assert err.value.code == "INVALID_CLOCK"
    with pytest.raises(ContractError):
        FrameClock(0)


def test_frames_in_interval_half_open():
    clock = FrameClock(20)
    assert list(frames_in_interval(0.0, 0.05, clock)) == [0]
    assert list(frames_in_interval(0.05, 0.10, clock)) == [1]
    assert list(frames_in_interval(0.025, 0.025, clock)) == [0]
    assert frame_count(80.0, clock) == 1600


def test_parse_tsv_structure():
    utts = parse_segmentation(FIXTURES / "apres.tsv")
    assert len(utts.sentences) == 1
    s = utts.sentences[0]
    assert s.text == "après une heure"
    assert (s.start_s, s.end_s) == (1.0, 2.2)
    assert [w.text for w in s.words] == ["après", "une", "heure"]
    assert sum(len(w.phones) for w in s.words) == 8
    assert [p.label for p in s.words[0].phones] == ["a", "p", "R", "E"]


@pytest.mark.parametrize("name", ["apres.tsv", "two.tsv"])
def test_segmentation_round_trip(name):
    data = (FIXTURES / name).read_bytes()
    assert write_segmentation(parse_segmentation(data)) == data


def test_loose_phones_kept_outside_words():
    utts = parse_segmentation(FIXTURES / "two.tsv")
    assert [p.label for p in utts.loose_phones] == ["sil", "sp", "sil", "sil"]
    assert utts.total_duration_s == 3.4
    assert [w.text for w in utts.sentences[0].words] == ["le", "chat", "et", "le", "chien"]


def test_textgrid_matches_tsv_and_drops_empty_intervals():
    tg = parse_segmentation(FIXTURES / "apres.TextGrid", "textgrid")
    tsv = parse_segmentation(FIXTURES / "apres.tsv")
    assert tg.sentences == tsv.sentences
    assert [p.label for p in tg.loose_phones] == ["sil", "sil"]


def _tsv(*rows):
    return ("tier\tstart_s\tend_s\tlabel\n" + "".join("\t".join(r) + "\n" for r in rows)).encode()


def test_word_with_reversed_times_is_rejected():
    data = _tsv(("sentence", "1.0", "2.0", "a b"), ("word", "1.5", "1.4", "a"))
    with pytest.raises(ParseError) as err:
        parse_segmentation(data)
    assert err.value.code == "NON_MONOTONE_TIMES"
    assert err.value.line == 3


@pytest.mark.parametrize("data, code", [
    (b"tier,start,end,label\n", "MALFORMED_HEADER"),
    (_tsv(("sentence", "1.0", "2.0")), "MALFORMED_LINE"),
    (_tsv(("sentence", "x", "2.0", "a")), "MALFORMED_LINE"),
    (_tsv(("syllable", "1.0", "2.0", "a")), "MALFORMED_LINE"),
    (_tsv(("sentence", "1.0", "nan", "a")), "NON_FINITE_VALUE"),
    (_tsv(("sentence", "1.0", "2.0", "a"), ("sentence", "1.5", "3.0", "b")), "OVERLAPPING_INTERVALS"),
    (_tsv(("sentence", "1.0", "2.0", "a"), ("word", "1.5", "2.5", "a")), "OVERLAPPING_INTERVALS"),
    (_tsv(("sentence", "1.0", "2.0", "a"), ("word", "2.5", "3.0", "a")), "MALFORMED_LINE"),
    (_tsv(("sentence", "1.0", "2.0", "a"), ("word", "1.0", "2.0", "a"),
          ("phone", "1.5", "2.5", "a")), "OVERLAPPING_INTERVALS"),
    (_tsv(("word", "1.0", "2.0", "a")), "EMPTY_CORPUS"),
    (_tsv(), "EMPTY_CORPUS"),
])
def test_segmentation_errors(data, code):
    with pytest.raises(ParseError) as err:
        parse_segmentation(data)
    assert err.value.code == code


def test_containment_tolerance_is_one_millisecond():
    ok = _tsv(("sentence", "1.0", "2.0", "a"), ("word", "0.9995", "2.0005", "a"))
    assert parse_segmentation(ok).sentences[0].words[0].text == "a"
    bad = _tsv(("sentence", "1.0", "2.0", "a"), ("word", "0.998", "2.0", "a"))
    with pytest.raises(ParseError):
        parse_segmentation(bad)


def test_textgrid_rejects_point_tiers():
    text = (FIXTURES / "apres.TextGrid").read_text().replace('"IntervalTier"', '"TextTier"', 1)
    with pytest.raises(ParseError):
        parse_segmentation(text.encode(), "textgrid")


# -- contours, stats, features, mappings --------------------------------------


def _random_track(rng, n_frames, units=Units.NORMALIZED):
    return ContourTrack(20.0, rng.normal(size=(n_frames, 8, 50, 2)), ARTICULATORS, units)


def test_contour_csv_two_frames():
    rng = np.random.default_rng(0)
    track = _random_track(rng, 2)
    data = write_contours(track)
    assert data.count(b"\n") == 1 + 2 * 8 * 50
    parsed = parse_contours(data)
    assert parsed.n_frames == 2
    np.testing.assert_array_equal(parsed.points, track.points)
    assert write_contours(parsed) == data


def test_contour_csv_wrong_point_count():
    rng = np.random.default_rng(1)
    lines = write_contours(_random_track(rng, 1)).decode().splitlines()
    with pytest.raises(ContractError) as err:
        parse_contours(("\n".join(lines[:-1]) + "\n").encode())
    assert err.value.code == "DIMENSION_MISMATCH"


def test_contour_csv_must_be_sorted():
    rng = np.random.default_rng(2)
    lines = write_contours(_random_track(rng, 1)).decode().splitlines()
    lines[1], lines[2] = lines[2], lines[1]
    with pytest.raises(ContractError):
        parse_contours(("\n".join(lines) + "\n").encode())


def test_contour_non_finite():
    rng = np.random.default_rng(3)
    text = write_contours(_random_track(rng, 1)).decode()
    head, first, rest = text.split("\n", 2)
    first = ",".join(first.split(",")[:3] + ["inf", "0.0"])
    with pytest.raises(ParseError) as err:
        parse_contours("\n".join([head, first, rest]).encode())
    assert err.value.code == "NON_FINITE_VALUE"


def test_norm_stats_round_trip_and_missing():
    rng = np.random.default_rng(4)
    stats = NormStats(rng.normal(50, 10, size=(8, 2)), rng.uniform(1, 5, size=(8, 2)))
    data = write_norm_stats(stats)
    parsed = parse_norm_stats(data)
    assert write_norm_stats(parsed) == data
    assert parsed.pixel_size_mm == 1.62
    truncated = b"\n".join(data.split(b"\n")[:3] + [b"pixel_size_mm,1.62"])
    with pytest.raises(ContractError) as err:
        parse_norm_stats(truncated)
    assert err.value.code == "MISSING_STATS"


def test_norm_stats_require_positive_std():
    with pytest.raises(ContractError):
        NormStats(np.zeros((8, 2)), np.zeros((8, 2)))


def test_features_dimension_mismatch():
    row = " ".join(["0.5"] * 767)
    data = f"frames=1 dim=768 rate_hz=50\n{row}\n".encode()
    with pytest.raises(ContractError) as err:
        parse_features(data)
    assert err.value.code == "DIMENSION_MISMATCH"


def test_features_header_and_frame_count():
    with pytest.raises(ParseError) as err:
        parse_features(b"frames 1 dim 1\n0.0\n")
    assert err.value.code == "MALFORMED_HEADER"
    with pytest.raises(ContractError):
        parse_features(b"frames=2 dim=1 rate_hz=50\n0.0\n")


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(1, 12), st.sampled_from([20.0, 49.5, 50.0]), st.integers(0, 2**32 - 1))
def test_features_round_trip(n, dim, rate, seed):
    seq = FeatureSequence(rate, np.random.default_rng(seed).normal(size=(n, dim)) * 1e3)
    data = write_features(seq)
    back = parse_features(data)
    np.testing.assert_array_equal(back.frames, seq.frames)
    assert write_features(back) == data


entries_strategy = st.lists(
    st.tuples(
        st.integers(0, 3),
        st.integers(-1, 500),
        st.sampled_from(list(Method)),
        st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc")), max_size=4),
        st.integers(-1, 40),
        st.booleans(),
    ),
    max_size=40,
)


@settings(max_examples=100, deadline=None)
@given(entries_strategy, st.sampled_from([20.0, 50.0, 12.5]), st.sampled_from([50.0, 100.0]))
def test_frame_mapping_round_trip(raw, src_rate, tgt_rate):
    entries, src = [], -1
    for gap, tgt, method, phone, sid, clamped in raw:
        src += gap + 1
        entries.append(MappingEntry(src, tgt, method, phone, sid, clamped and tgt >= 0))
    mapping = FrameMapping(src_rate, tgt_rate, tuple(entries))
    data = write_frame_mapping(mapping)
    assert parse_frame_mapping(data) == mapping
    assert write_frame_mapping(parse_frame_mapping(data)) == data


def test_frame_mapping_rejects_bad_rows():
    good = write_frame_mapping(FrameMapping(20, 50, (MappingEntry(0, 3, Method.PHONETIC, "a", 0),)))
    with pytest.raises(ParseError):
        parse_frame_mapping(good.replace(b"PHONETIC", b"MAGIC"))
    with pytest.raises(ParseError):
        parse_frame_mapping(good.replace(b"0,3,", b"0,-2,"))
    headerless = b"\n".join(good.split(b"\n")[1:])
    with pytest.raises(ParseError):
        parse_frame_mapping(headerless)
    assert parse_frame_mapping(headerless, 20, 50).entries[0].target_idx == 3
