"""
DTW against phonetic alignment on synthetic corpora
===================================================

A synthetic corpus comes with the true frame correspondence. When every
phone has distinct features both methods follow the warp. When words
repeat and phones sound alike, DTW drifts while the phonetic mapping is
unaffected because it never looks at the features.
"""

from phonalign.corpus import FrameClock
from phonalign.dtw import align_corpus_dtw
from phonalign.errors import InfeasibleError
from phonalign.phonetic import align_corpus
from phonalign.synth import SyntheticSpec, gen_synthetic, synth_features


def within_one(mapping, truth):
    pred, ref = mapping.as_dict(), truth.as_dict()
    return sum(abs(pred.get(f, -99) - t) <= 1 for f, t in ref.items()) / len(ref)


def run(spec, **feature_kw):
    corpus = gen_synthetic(spec)
    phon, _, pairing = align_corpus(corpus.mri, corpus.clean)
    mf = synth_features(corpus.mri, FrameClock(spec.mri_rate_hz), seed=7, **feature_kw)
    cf = synth_features(corpus.clean, FrameClock(spec.clean_rate_hz), seed=7, **feature_kw)
    dtw_map, _ = align_corpus_dtw(mf, cf, pairing, mri=corpus.mri, clean=corpus.clean)
    return within_one(phon, corpus.truth), within_one(dtw_map, corpus.truth)


###############################################################################
# Distinct phones, light noise.

print("distinct:", run(SyntheticSpec(seed=3, n_sentences=20), noise=0.05))

###############################################################################
# Four-word vocabulary, phones pulled towards one shared vector.

similar = SyntheticSpec(seed=4, n_sentences=20, vocab_size=4, words_per_sentence=(4, 8))
print("similar:", run(similar, noise=0.3, similarity=0.9))

###############################################################################
# A Sakoe-Chiba band limits how far the path may leave the i * m / n
# diagonal. Too narrow a band leaves the end cell unreachable.

corpus = gen_synthetic(SyntheticSpec(seed=3, n_sentences=5))
_, _, pairing = align_corpus(corpus.mri, corpus.clean)
mf = synth_features(corpus.mri, FrameClock(20), seed=7, noise=0.05)
cf = synth_features(corpus.clean, FrameClock(50), seed=7, noise=0.05)
for radius in (None, 10, 5, 2):
    try:
        m, _ = align_corpus_dtw(mf, cf, pairing, band_radius=radius, mri=corpus.mri, clean=corpus.clean)
        print(radius, within_one(m, corpus.truth))
    except InfeasibleError as exc:
        print(radius, exc)
