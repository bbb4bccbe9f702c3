"""Sparse linear-prediction residuals with an anticausal (maximum-phase) stage.

Speech is modeled as a causal all-pole filter driven by a glottal excitation
whose open phase is anticausal.  The MaxP pipeline removes the causal part by
ordinary LP on preemphasized speech, then fits a low-order LP to the
time-reversed residual to remove the anticausal glottal pair, which leaves a
sparser excitation.
"""

from .apps import detect_polarity, extract_residual_frames, pca, pulse_concentration
from .dsp import SampleBuffer, frame_signal, read_wav, write_wav
from .lp import LpModel, l1_analyze, lp2_analyze, wlp2_analyze
from .maxp import METHODS, MaxPConfig, analyze_buffer, analyze_frame, maxp_analyze, residual_by_method
from .metrics import gini_index, hoyer_measure, kurtosis, skewness
from .pitch import GciTrack, detect_gci, estimate_f0
from .synth import SynthSpec, make_corpus, synthesize

__version__ = "0.1.0"

__all__ = [
    "GciTrack", "LpModel", "METHODS", "MaxPConfig", "SampleBuffer", "SynthSpec", "analyze_buffer",
    "analyze_frame", "detect_gci", "detect_polarity", "estimate_f0", "extract_residual_frames", "frame_signal",
    "gini_index", "hoyer_measure", "kurtosis", "l1_analyze", "lp2_analyze", "make_corpus", "maxp_analyze",
    "pca", "pulse_concentration", "read_wav", "residual_by_method", "skewness", "synthesize", "wlp2_analyze",
    "write_wav",
]
