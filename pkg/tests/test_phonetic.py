import math
from dataclasses import replace
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phonalign.corpus import (
    UNMAPPED,
    FrameClock,
    PhoneInterval,
    SentenceInterval,
    UtteranceSet,
    WordInterval,
    frame_mid_time,
)
from phonalign.errors import ContractError
from phonalign.fileio import parse_segmentation
from phonalign.phonetic import (
    AlignConfig,
    PhonePair,
    PhonePairing,
    align_corpus,
    map_frames,
    pair_phones,
    pair_sentences,
    pair_words,
    relative_position,
    stretch_time,
)
from phonalign.similarity import similarity
from phonalign.synth import SyntheticSpec, gen_synthetic

FIXTURES = Path(__file__).parent / "fixtures"
C20, C50 = FrameClock(20), FrameClock(50)


def _sentence(text, start, end, words=()):
    return SentenceInterval(text, start, end, tuple(words))


def _word(text, start, end, labels=None):
    labels = labels or [text]
    step = (end - start) / len(labels)
    phones = tuple(PhoneInterval(lab, start + k * step, start + (k + 1) * step) for k, lab in enumerate(labels))
    return WordInterval(text, start, end, phones)


def _utts(*sentences):
    return UtteranceSet(tuple(sentences), total_duration_s=max(s.end_s for s in sentences))


# -- sentences -----------------------------------------------------------------


def test_identical_corpora_pair_with_themselves():
    utts = parse_segmentation(FIXTURES / "two.tsv")
    pairing = pair_sentences(utts, utts)
    assert [(p.mri_id, p.clean_id, p.similarity) for p in pairing.pairs] == [(0, 0, 1.0), (1, 1, 1.0)]
    assert pairing.unmatched_mri == ()


def test_best_candidate_wins():
    mri = _utts(_sentence("après une heure", 0, 1))
    clean = _utts(_sentence("avant une heure", 0, 1), _sentence("après une heure", 2, 3))
    pairing = pair_sentences(mri, clean)
    assert pairing.pairs[0].clean_id == 1
    assert pairing.pairs[0].similarity == 1.0
    assert similarity("après une heure", "avant une heure") < 1.0


def test_below_threshold_is_unmatched():
    # similarity("abcde", "abcxy") = 2 * 3 / 10 = 0.6
    assert similarity("abcde", "abcxy") == pytest.approx(0.6)
    pairing = pair_sentences(_utts(_sentence("abcde", 0, 1)), _utts(_sentence("abcxy", 0, 1)), 0.75)
    assert pairing.pairs == ()
    assert pairing.unmatched_mri == (0,)


def test_ties_go_to_smaller_clean_id():
    mri = _utts(_sentence("abcd", 0, 1))
    clean = _utts(_sentence("abcx", 0, 1), _sentence("abcy", 2, 3))
    assert pair_sentences(mri, clean, 0.5).pairs[0].clean_id == 0


def test_many_to_one_versus_one_to_one():
    mri = _utts(_sentence("abcdefgh", 0, 1), _sentence("abcdefgx", 2, 3))
    clean = _utts(_sentence("abcdefgh", 0, 1), _sentence("zzzzzzzz", 2, 3))
    many = pair_sentences(mri, clean)
    assert [p.clean_id for p in many.pairs] == [0, 0]
    strict = pair_sentences(mri, clean, one_to_one=True)
    assert [(p.mri_id, p.clean_id) for p in strict.pairs] == [(0, 0)]
    assert strict.unmatched_mri == (1,)


def test_threshold_validated():
    utts = _utts(_sentence("a", 0, 1))
    with pytest.raises(ContractError):
        pair_sentences(utts, utts, 0.0)


# -- words -----------------------------------------------------------------------


def test_relative_position():
    s = _sentence("x", 1.0, 5.0)
    assert relative_position(_word("w", 2.0, 2.5), s) == 0.25
    assert relative_position(_word("w", 1.0, 2.0), s) == 0.0
    assert relative_position(_word("w", 5.0, 5.0), s) == 1.0
    with pytest.raises(ContractError) as err:
        relative_position(_word("w", 1.0, 1.0), _sentence("x", 1.0, 1.0))
    assert err.value.code == "ZERO_DURATION_SENTENCE"


def test_unique_words_pair_in_order():
    words = ["après", "une", "heure"]
    mri = _sentence("après une heure", 0, 3, [_word(w, k, k + 1) for k, w in enumerate(words)])
    clean = _sentence("après une heure", 0, 6, [_word(w, 2 * k, 2 * k + 2) for k, w in enumerate(words)])
    assert pair_words(mri, clean).pairs == ((0, 0), (1, 1), (2, 2))


def test_duplicate_words_resolved_by_relative_position():
    # clean sentence [0, 10]: "le" at r_pos 0.02 and 0.55
    mri = _sentence("le chat et le chien", 0, 10, [
        _word("le", 0.0, 1.0), _word("chat", 1.0, 3.0), _word("et", 3.0, 4.0),
        _word("le", 4.0, 5.0), _word("chien", 5.0, 10.0)])
    clean = _sentence("le chat et le chien", 0, 10, [
        _word("le", 0.2, 1.0), _word("chat", 1.0, 3.0), _word("et", 3.0, 5.5),
        _word("le", 5.5, 6.0), _word("chien", 6.0, 10.0)])
    pairing = pair_words(mri, clean)
    assert (0, 0) in pairing.pairs
    assert (3, 3) in pairing.pairs
    assert relative_position(clean.words[0], clean) == pytest.approx(0.02)
    assert relative_position(clean.words[3], clean) == pytest.approx(0.55)


def test_clean_words_are_consumed_once():
    mri = _sentence("le le", 0, 2, [_word("le", 0.0, 1.0), _word("le", 1.0, 2.0)])
    clean = _sentence("le", 0, 2, [_word("le", 0.0, 2.0)])
    assert pair_words(mri, clean).pairs == ((0, 0),)
    assert pair_words(mri, clean).unmatched_mri == (1,)


def test_absent_word_unmatched():
    mri = _sentence("euh oui", 0, 2, [_word("euh", 0.0, 1.0), _word("oui", 1.0, 2.0)])
    clean = _sentence("oui", 0, 1, [_word("oui", 0.0, 1.0)])
    pairing = pair_words(mri, clean)
    assert pairing.pairs == ((1, 0),)
    assert pairing.unmatched_mri == (0,)


# -- phones ----------------------------------------------------------------------


def test_pair_phones_identical_labels():
    a = _word("après", 0, 1, ["a", "p", "ʁ", "ɛ"])
    b = _word("après", 2, 4, ["a", "p", "ʁ", "ɛ"])
    pairing = pair_phones((a, b))
    assert len(pairing.pairs) == 4 and pairing.demoted == ()
    assert all(p.mri.label == p.clean.label for p in pairing.pairs)


@pytest.mark.parametrize("labels_a, labels_b", [
    (["a", "p", "ʁ", "ɛ"], ["a", "p", "ʁ", "ɛ", "ə"]),
    (["a", "p"], ["a", "b"]),
])
def test_pair_phones_demotes_mismatch(labels_a, labels_b):
    pairing = pair_phones((_word("w", 0, 1, labels_a), _word("w", 0, 1, labels_b)))
    assert pairing.pairs == ()
    assert len(pairing.demoted) == 1


# -- frame mapping ---------------------------------------------------------------


def test_stretch_hand_example():
    mri_p, clean_p = PhoneInterval("a", 1.00, 1.20), PhoneInterval("a", 2.00, 2.40)
    t = stretch_time(1.05, mri_p, clean_p)
    assert t == pytest.approx(2.10, abs=1e-12)
    assert C50.index_of(t) == 105


def test_map_frames_hand_example():
    pairing = PhonePairing((PhonePair(PhoneInterval("a", 1.00, 1.20), PhoneInterval("a", 2.00, 2.40), 0, 0),))
    # a 10 Hz source clock puts the centre of frame 10 at 1.05 s
    clock = FrameClock(10)
    assert frame_mid_time(10, clock) == pytest.approx(1.05)
    mapping = map_frames(pairing, clock, C50, 1000)
    assert mapping.entries[10].target_idx == 105
    assert mapping.entries[10].phone == "a"
    assert mapping.entries[10].sentence_id == 0
    assert [e.target_idx for e in mapping.entries[:10]] == [UNMAPPED] * 10


def test_epsilon_branch_for_zero_length_phone():
    mri_p, clean_p = PhoneInterval("a", 0.025, 0.025), PhoneInterval("a", 2.0, 2.4)
    assert stretch_time(0.025, mri_p, clean_p) == 2.0
    mapping = map_frames(PhonePairing((PhonePair(mri_p, clean_p),)), C20, C50, 1000, n_source_frames=3)
    assert mapping.entries[0].target_idx == 100
    assert [e.target_idx for e in mapping.entries[1:]] == [UNMAPPED, UNMAPPED]


def test_clamping_sets_flag():
    pairing = PhonePairing((PhonePair(PhoneInterval("a", 0.0, 1.0), PhoneInterval("a", 0.0, 1.0)),))
    mapping = map_frames(pairing, C20, C50, clean_n_frames=10)
    assert mapping.entries[-1].target_idx == 9
    assert mapping.entries[-1].clamped
    assert not mapping.entries[0].clamped


def test_invalid_clock_rejected():
    with pytest.raises(ContractError) as err:
        map_frames(PhonePairing(()), 20, C50, 10)
    assert err.value.code == "INVALID_CLOCK"


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.0, 5.0), st.floats(0.0, 0.5),
    st.floats(0.0, 5.0), st.floats(0.001, 0.5),
    st.floats(-1.0, 7.0),
)
def test_stretch_stays_in_clean_phone(ms, md, cs, cd, t):
    target = stretch_time(t, PhoneInterval("a", ms, ms + md), PhoneInterval("a", cs, cs + cd))
    assert cs - 1e-12 <= target <= cs + cd + 1e-12


# -- whole corpus ----------------------------------------------------------------


def test_identity_corpus_maps_every_phone_frame_to_itself():
    utts = parse_segmentation(FIXTURES / "two.tsv")
    config = AlignConfig(mri_clock=C50, clean_clock=C50)
    mapping, report, _ = align_corpus(utts, utts, config)
    assert report.sentences_unmatched == 0 and report.frames_clamped == 0
    for e in mapping.entries:
        if e.mapped:
            assert e.target_idx == e.source_idx
    # every frame centred in a word phone is mapped; silence frames are not
    assert {e.phone for e in mapping.entries if not e.mapped} == {"sil", "sp"}


def test_provenance_label_matches_containing_phone():
    utts = parse_segmentation(FIXTURES / "two.tsv")
    mapping, _, _ = align_corpus(utts, utts)
    spans = utts.phone_spans()
    for e in mapping.entries:
        t = frame_mid_time(e.source_idx, C20)
        containing = [p.label for p, _ in spans if p.start_s <= t < p.end_s]
        assert [e.phone] == containing


def test_doubled_phone_durations():
    mri = parse_segmentation(FIXTURES / "apres.tsv")
    s = mri.sentences[0]

    def double(t):
        return s.start_s + 2 * (t - s.start_s)

    words = tuple(
        WordInterval(w.text, double(w.start_s), double(w.end_s),
                     tuple(PhoneInterval(p.label, double(p.start_s), double(p.end_s)) for p in w.phones))
        for w in s.words
    )
    clean = UtteranceSet((SentenceInterval(s.text, s.start_s, double(s.end_s), words),),
                         total_duration_s=double(s.end_s))
    mapping, report, _ = align_corpus(mri, clean)
    assert report.words_paired == 3
    for e in mapping.entries:
        if e.mapped:
            expected = math.floor(double(frame_mid_time(e.source_idx, C20)) * 50)
            assert abs(e.target_idx - expected) <= 1


def test_unmatched_sentence_is_isolated():
    utts = parse_segmentation(FIXTURES / "two.tsv")
    s0, s1 = utts.sentences
    altered = replace(utts, sentences=(replace(s0, text="tout autre chose ici"), s1))
    mapping, report, _ = align_corpus(altered, utts)
    full, _, _ = align_corpus(utts, utts)
    assert report.sentences_unmatched == 1
    for e, ref in zip(mapping.entries, full.entries):
        if e.sentence_id == 0:
            assert not e.mapped
        else:
            assert e == ref


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_mapping_invariants_on_synthetic_corpora(seed):
    corpus = gen_synthetic(SyntheticSpec(seed=seed, n_sentences=6, error_rate=0.3))
    mapping, report, pairing = align_corpus(corpus.mri, corpus.clean)
    srcs = [e.source_idx for e in mapping.entries]
    assert srcs == list(range(len(srcs)))
    assert all(e.target_idx >= 0 for e in mapping.entries if e.mapped)
    for p in pairing.pairs:
        assert p.similarity >= 0.75
    # non-decreasing target within each (sentence, phone) run
    prev = None
    for e in mapping.entries:
        key = (e.sentence_id, e.phone)
        if e.mapped and prev and prev[0] == key:
            assert e.target_idx >= prev[1]
        prev = (key, e.target_idx) if e.mapped else None


def test_locality_when_removing_unmatched_sentence():
    corpus = gen_synthetic(SyntheticSpec(seed=5, n_sentences=8, pause_rate=0.0))
    s = list(corpus.mri.sentences)
    s[3] = replace(s[3], text="zzzz qqqq")
    mri = replace(corpus.mri, sentences=tuple(s))
    full, _, _ = align_corpus(mri, corpus.clean)
    removed = replace(mri, sentences=tuple(s[:3] + s[4:]))
    reduced, _, _ = align_corpus(removed, corpus.clean)
    span = (s[3].start_s, s[3].end_s)
    for a, b in zip(full.entries, reduced.entries):
        t = frame_mid_time(a.source_idx, C20)
        if span[0] <= t < span[1]:
            assert not a.mapped
            continue
        assert (a.target_idx, a.phone, a.clamped) == (b.target_idx, b.phone, b.clamped)
