"""
Scoring predicted contours and comparing two conditions
=======================================================

Contours arrive normalized; they are mapped back to millimetres with the
per-articulator statistics, silence frames are dropped, and the RMS point
displacement is summarized per articulator. Two conditions are then
compared with Welch t-tests.
"""

import numpy as np

from phonalign.corpus import ARTICULATORS, ContourTrack, NormStats, Units
from phonalign.evaluation import compare, evaluate, format_table, significance_marks
from phonalign.synth import SyntheticSpec, gen_synthetic

corpus = gen_synthetic(SyntheticSpec(seed=9, n_sentences=6))
n_frames = int(round(corpus.mri.total_duration_s * 20))
rng = np.random.default_rng(0)

stats = NormStats(rng.uniform(40, 90, (8, 2)), rng.uniform(2, 6, (8, 2)))
ref = ContourTrack(20.0, rng.normal(size=(n_frames, 8, 50, 2)), ARTICULATORS, Units.NORMALIZED)

###############################################################################
# Condition B predicts the lips less well.

noise_a = rng.normal(0, 0.2, ref.points.shape)
noise_b = rng.normal(0, 0.2, ref.points.shape)
for lip in ("lower_lip", "upper_lip"):
    noise_b[:, ARTICULATORS.index(lip)] *= 1.5

reports = []
for name, noise in (("A", noise_a), ("B", noise_b)):
    pred = ContourTrack(20.0, ref.points + noise, ARTICULATORS, Units.NORMALIZED)
    reports.append((name, evaluate(ref, pred, corpus.mri, stats=stats)))
print(reports[0][1].n_frames_evaluated, "of", n_frames, "frames are speech")

###############################################################################
# Stars mark rows where B differs from A at p < 0.05.

tests = compare(reports[0][1], reports[1][1])
print(format_table(reports, {"B": significance_marks(tests)}))
