"""Frame-level alignment of parallel phonetically segmented speech corpora and
millimetre-scale evaluation of articulatory contour predictions."""

from .corpus import (
    ARTICULATORS,
    UNMAPPED,
    ContourTrack,
    FeatureSequence,
    FrameClock,
    FrameMapping,
    MappingEntry,
    Method,
    NormStats,
    PhoneInterval,
    SentenceInterval,
    Units,
    UtteranceSet,
    WordInterval,
    frame_mid_time,
    normalize_text,
)
from .errors import AlignmentError, ContractError, InfeasibleError, ParseError
from .phonetic import AlignConfig, align_corpus
from .dtw import align_corpus_dtw, dtw
from .similarity import matching_blocks, similarity

__version__ = "0.1.0"
