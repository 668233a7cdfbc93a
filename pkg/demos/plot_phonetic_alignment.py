"""
Phonetic alignment of two readings of the same text
===================================================

Two segmentations of one sentence, the second read twice as slowly. Each
MRI frame is mapped to the clean frame at the same relative position
inside the paired phone.
"""

from pathlib import Path

from phonalign.corpus import FrameClock, frame_mid_time
from phonalign.fileio import parse_segmentation
from phonalign.phonetic import AlignConfig, align_corpus, pair_sentences
from phonalign.similarity import similarity

fixtures = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
mri = parse_segmentation(fixtures / "two.tsv")
print([s.text for s in mri.sentences])

###############################################################################
# Sentence pairing uses the gestalt similarity of the normalized texts.

print(similarity("après une heure", "avant une heure"))
print(pair_sentences(mri, mri).pairs)

###############################################################################
# Build a slower "clean" reading by doubling every time stamp.

text = (fixtures / "two.tsv").read_text(encoding="utf-8").splitlines()
rows = [text[0]]
for line in text[1:]:
    tier, start, end, label = line.split("\t")
    rows.append(f"{tier}\t{2 * float(start):.3f}\t{2 * float(end):.3f}\t{label}")
clean = parse_segmentation(("\n".join(rows) + "\n").encode("utf-8"))

mapping, report, _ = align_corpus(mri, clean, AlignConfig())
print(report.to_text())

###############################################################################
# At 20 Hz on the MRI side and 50 Hz on the clean side, a frame at time t
# should land near clean frame floor(2 t * 50).

mri_clock = FrameClock(20)
for e in mapping.entries[6:14]:
    t = frame_mid_time(e.source_idx, mri_clock)
    print(f"{e.source_idx:3d} {t:.3f}s {e.phone:>3} -> {e.target_idx:4d} (expected ~{int(2 * t * 50)})")
