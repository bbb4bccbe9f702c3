"""Polarity detection from excitation skewness, and DSM eigen-analysis.

Polarity follows the RESKEW idea: the LP residual and a low-passed copy of
the speech (a rough glottal source) are skewed in opposite directions, and
the sign of the difference of their skewness gives the polarity.  The DSM
part stacks GCI-synchronous, pitch-normalized residual frames and takes the
eigenvectors of their second-moment matrix; the first one models the
deterministic excitation.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, filtfilt

from .dsp import SampleBuffer, frame_signal, window
from .errors import InsufficientDataError, UnanalyzableFrameError, UndefinedMetricError
from .maxp import DEFAULT_ORDER, MAXP_LP2, WLP2, MAXP_WLP2, analyze_frame
from .metrics import skewness
from .pitch import F0Track, GciTrack, detect_gci, estimate_f0

GLOTTAL_CUTOFF_HZ = 1000.0
GLOTTAL_FILTER_ORDER = 2
MIN_VOICED_SECONDS = 0.5
# skewness(glottal) - skewness(residual) is mostly positive for a
# positive-polarity signal: calibrated once on synthetic utterances of known
# polarity (a corpus seeded apart from the evaluation one)
POLARITY_SIGN = 1

NORM_LENGTH = 64
CONCENTRATION_HALFWIDTH_MS = 0.5
VARIANCE_TARGET = 0.9


def glottal_approximation(buffer: SampleBuffer, cutoff_hz: float = GLOTTAL_CUTOFF_HZ) -> SampleBuffer:
    """Zero-phase 2nd-order Butterworth low-pass of the speech, mean removed."""
    if not 0 < cutoff_hz < buffer.rate / 2:
        raise ValueError(f"cutoff {cutoff_hz} Hz outside (0, {buffer.rate / 2})")
    b, a = butter(GLOTTAL_FILTER_ORDER, cutoff_hz / (buffer.rate / 2))
    x = buffer.samples
    if x.size <= 3 * max(len(a), len(b)):
        y = np.zeros_like(x)
    else:
        y = filtfilt(b, a, x)
    return buffer.with_samples(y - y.mean())


@dataclass(frozen=True)
class PolarityVerdict:
    polarity: int
    differenced_skewness: float
    skew_residual: float
    skew_glottal: float
    low_confidence: bool = False
    voiced_seconds: float = 0.0

    def to_dict(self):
        return {
            "polarity": self.polarity,
            "differenced_skewness": self.differenced_skewness,
            "skew_residual": self.skew_residual,
            "skew_glottal": self.skew_glottal,
            "low_confidence": self.low_confidence,
            "voiced_seconds": self.voiced_seconds,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _voiced_predicate(f0: F0Track, rate: float, frame_length: int):
    def voiced(frame):
        return f0.at((frame.start_index + frame_length / 2) / rate) > 0
    return voiced


def detect_polarity(buffer: SampleBuffer, method: str = MAXP_LP2, order: int = DEFAULT_ORDER,
                    gcis: GciTrack | None = None, f0: F0Track | None = None,
                    win_ms: float = 25.0, hop_ms: float = 5.0) -> PolarityVerdict:
    """Speech polarity from the differenced skewness of two excitation estimates.

    Residual frames of the voiced part are concatenated, and the glottal
    approximation is cut into the same windowed frames.
    """
    f0 = f0 if f0 is not None else estimate_f0(buffer)
    if method in (WLP2, MAXP_WLP2) and gcis is None:
        gcis = detect_gci(buffer, f0)
    glottal = glottal_approximation(buffer).samples
    framed = frame_signal(buffer, win_ms, hop_ms)
    voiced = _voiced_predicate(f0, buffer.rate, framed.frame_length)
    w = window(framed.frame_length)
    r_parts, g_parts = [], []
    for frame in framed:
        if not voiced(frame):
            continue
        try:
            r = analyze_frame(frame, method, order, gcis).residual
        except UnanalyzableFrameError:
            continue
        start = frame.start_index
        g = glottal[start:start + framed.frame_length] * w
        r_parts.append(r)
        g_parts.append(g)
    if not r_parts:
        raise UnanalyzableFrameError("no analyzable voiced frames for polarity detection")
    try:
        skew_r = skewness(np.concatenate(r_parts))
        skew_g = skewness(np.concatenate(g_parts))
    except UndefinedMetricError as exc:
        raise UnanalyzableFrameError(f"skewness undefined: {exc}") from exc
    diff = skew_g - skew_r
    voiced_seconds = len(r_parts) * hop_ms / 1000.0
    low = diff == 0 or voiced_seconds < MIN_VOICED_SECONDS
    polarity = 1 if diff == 0 else int(POLARITY_SIGN * np.sign(diff))
    return PolarityVerdict(polarity, float(diff), float(skew_r), float(skew_g), bool(low),
                           voiced_seconds)


def _local_period(t: float, f0: F0Track | None, instants: np.ndarray, i: int) -> float:
    if f0 is not None:
        f = f0.at(t)
        if f > 0:
            return 1.0 / f
    spacing = np.diff(instants[max(i - 1, 0):i + 2])
    return float(spacing.mean())


def extract_residual_frames(residual: SampleBuffer, gcis: GciTrack, f0: F0Track | None = None,
                            norm_length: int = NORM_LENGTH) -> np.ndarray:
    """GCI-synchronous residual frames, two periods long, pitch-normalized.

    Each frame is centred on a GCI, Hanning-weighted over ``[-T, T]``,
    linearly interpolated onto ``norm_length`` points with the GCI at index
    ``norm_length / 2`` and scaled to unit energy.  GCIs whose window would
    leave the signal are skipped.  Returns an ``(M, norm_length)`` array.
    """
    if norm_length < 32 or norm_length % 2:
        raise ValueError("norm_length must be even and at least 32")
    rate = residual.rate
    x = residual.samples
    t = gcis.instants
    grid = (np.arange(norm_length) - norm_length / 2) / (norm_length / 2)
    rows = []
    if t.size >= 2:
        for i, instant in enumerate(t):
            period = _local_period(instant, f0, t, i) * rate
            center = instant * rate
            pos = center + grid * period
            if pos[0] < 0 or center + period > x.size - 1:
                continue
            w = 0.5 * (1.0 + np.cos(np.pi * grid))
            row = w * np.interp(pos, np.arange(x.size), x)
            energy = np.sqrt(np.dot(row, row))
            if energy > 0:
                rows.append(row / energy)
    if len(rows) < 2:
        warnings.warn("fewer than 2 usable GCIs; no residual frames extracted", stacklevel=2)
        return np.zeros((0, norm_length))
    return np.array(rows)


@dataclass(frozen=True)
class EigenModel:
    frame_length: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # one eigenvector per row
    cumulative_variance: np.ndarray
    n_frames: int = 0

    def components_for(self, fraction: float = VARIANCE_TARGET) -> int:
        """Smallest number of eigenvectors reaching ``fraction`` of the variance."""
        return int(np.searchsorted(self.cumulative_variance, fraction - 1e-12) + 1)

    def to_dict(self):
        return {
            "frame_length": self.frame_length,
            "n_frames": self.n_frames,
            "eigenvalues": self.eigenvalues.tolist(),
            "cumulative_variance": self.cumulative_variance.tolist(),
            "components_for_90pct": self.components_for(VARIANCE_TARGET),
        }

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["index"] + [f"v{j}" for j in range(self.frame_length)])
            for i, vec in enumerate(self.eigenvectors):
                writer.writerow([i] + [repr(float(v)) for v in vec])


def pca(frames) -> EigenModel:
    """Eigenvectors of ``F^T F / M`` (no mean subtraction), largest first.

    Each eigenvector's sign is chosen so its largest-magnitude entry is positive.
    """
    F = np.asarray(frames, dtype=float)
    if F.ndim != 2 or F.shape[0] < 2:
        raise InsufficientDataError(f"PCA needs at least 2 frames, got {F.shape[0] if F.ndim == 2 else 0}")
    C = F.T @ F / F.shape[0]
    values, vectors = np.linalg.eigh(C)
    order = np.argsort(values)[::-1]
    values = np.clip(values[order], 0.0, None)
    vectors = vectors[:, order].T.copy()
    for v in vectors:
        if v[np.argmax(np.abs(v))] < 0:
            v *= -1.0
    total = values.sum()
    cumulative = np.cumsum(values) / total if total > 0 else np.ones_like(values)
    cumulative = np.minimum(cumulative, 1.0)
    return EigenModel(F.shape[1], values, vectors, cumulative, F.shape[0])


def pulse_concentration(eigenvector, center_halfwidth_ms: float = CONCENTRATION_HALFWIDTH_MS,
                        rate: float = 8000.0) -> float:
    """Fraction of squared energy within ``±halfwidth`` of the vector midpoint."""
    v = np.asarray(eigenvector, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("empty eigenvector")
    total = np.dot(v, v)
    if total == 0:
        return 0.0
    mid = v.size // 2
    h = int(round(center_halfwidth_ms * rate / 1000.0))
    seg = v[max(mid - h, 0):mid + h + 1]
    return float(np.dot(seg, seg) / total)
