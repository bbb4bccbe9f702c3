"""F0 tracking, GCI detection and GCI text-file I/O.

These are deliberately simple stand-ins: a normalized-autocorrelation F0
tracker and a residual-peak GCI picker.  Exact instants from any external
tool can be supplied through the GCI file format instead.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dsp import SampleBuffer, frame_signal, ms_to_samples, analysis_filter, window
from .errors import DegenerateInputError, GciFileError

DETECTED = "detected"
EXTERNAL = "external"

F0_MIN = 50.0
F0_MAX = 500.0
VOICING_THRESHOLD = 0.3
F0_FRAME_MS = 40.0
F0_HOP_MS = 10.0
# lags whose NCCF peak is this close to the best one count as equally good;
# the shortest of them wins, which guards against period doubling
OCTAVE_TOLERANCE = 0.9
GCI_MIN_SPACING = 0.8
GCI_LP_ORDER = 13


@dataclass(frozen=True)
class GciTrack:
    instants: np.ndarray
    source: str = DETECTED

    def __post_init__(self):
        t = np.array(self.instants, dtype=float).reshape(-1)
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("GCI instants must be strictly increasing")
        if np.any(~np.isfinite(t)) or np.any(t < 0):
            raise ValueError("GCI instants must be finite and nonnegative")
        if self.source not in (DETECTED, EXTERNAL):
            raise ValueError(f"unknown GCI source {self.source!r}")
        t.setflags(write=False)
        object.__setattr__(self, "instants", t)

    def __len__(self):
        return self.instants.size

    def indices(self, rate: float) -> np.ndarray:
        return np.round(self.instants * rate).astype(int)

    def in_range(self, start: int, stop: int, rate: float) -> np.ndarray:
        """Sample indices of instants inside ``[start, stop)``, relative to ``start``."""
        idx = self.indices(rate)
        return idx[(idx >= start) & (idx < stop)] - start


@dataclass(frozen=True)
class F0Track:
    times: np.ndarray
    f0: np.ndarray
    hop: float

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        f = np.array(self.f0, dtype=float).reshape(-1)
        if t.size != f.size:
            raise ValueError("times and f0 differ in length")
        if np.any(f < 0):
            raise ValueError("f0 must be nonnegative")
        t.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "f0", f)

    @property
    def voiced(self) -> np.ndarray:
        return self.f0 > 0

    def at(self, time: float) -> float:
        """F0 of the frame nearest to ``time`` (0 if unvoiced or empty)."""
        if self.times.size == 0:
            return 0.0
        return float(self.f0[np.argmin(np.abs(self.times - time))])

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["time", "f0"])
            for t, f in zip(self.times, self.f0):
                writer.writerow([f"{t:.6f}", f"{f:.6f}"])


def read_gci_file(path) -> GciTrack:
    """Parse one instant (seconds) per line; blank lines are ignored."""
    instants = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                value = float(text)
            except ValueError:
                raise GciFileError(f"cannot parse {text!r} as a time", lineno) from None
            if not np.isfinite(value) or value < 0:
                raise GciFileError(f"invalid time {text!r}", lineno)
            if instants and value <= instants[-1]:
                raise GciFileError("instants are not strictly increasing", lineno)
            instants.append(value)
    return GciTrack(np.array(instants), EXTERNAL)


def write_gci_file(track: GciTrack, path):
    with open(path, "w", encoding="utf-8") as fh:
        for t in track.instants:
            fh.write(f"{t:.6f}\n")


def _nccf(x: np.ndarray, lag_min: int, lag_max: int) -> np.ndarray:
    n = x.size
    out = np.zeros(lag_max + 1)
    energy = np.cumsum(np.concatenate(([0.0], x * x)))
    for lag in range(lag_min, min(lag_max, n - 1) + 1):
        m = n - lag
        num = np.dot(x[:m], x[lag:])
        den = np.sqrt(energy[m] * (energy[n] - energy[lag]))
        out[lag] = num / den if den > 0 else 0.0
    return out


def _frame_f0(x: np.ndarray, rate: float, threshold: float) -> float:
    lag_min = max(2, int(np.floor(rate / F0_MAX)))
    lag_max = int(np.ceil(rate / F0_MIN))
    if not np.any(x != 0.0) or x.size <= lag_min + 2:
        return 0.0
    x = x - x.mean()
    r = _nccf(x, lag_min, lag_max)
    inner = np.arange(lag_min + 1, min(lag_max, x.size - 2))
    peaks = inner[(r[inner] >= r[inner - 1]) & (r[inner] > r[inner + 1])]
    if peaks.size == 0:
        return 0.0
    best = r[peaks].max()
    if best < threshold:
        return 0.0
    lag = peaks[r[peaks] >= OCTAVE_TOLERANCE * best][0]
    # parabolic refinement of the peak position
    y0, y1, y2 = r[lag - 1], r[lag], r[lag + 1]
    den = y0 - 2.0 * y1 + y2
    shift = 0.5 * (y0 - y2) / den if den < 0 else 0.0
    f0 = rate / (lag + shift)
    return float(f0) if F0_MIN <= f0 <= F0_MAX else 0.0


def estimate_f0(buffer: SampleBuffer, frame_ms: float = F0_FRAME_MS, hop_ms: float = F0_HOP_MS,
                threshold: float = VOICING_THRESHOLD) -> F0Track:
    """Normalized-autocorrelation F0 track; unvoiced frames get f0 = 0.

    Each frame is voiced when its best NCCF peak in the 50-500 Hz lag range
    reaches ``threshold``.
    """
    if buffer.rate < 8000:
        raise ValueError(f"F0 tracking needs a rate of at least 8000 Hz, got {buffer.rate}")
    length = ms_to_samples(frame_ms, buffer.rate)
    hop = ms_to_samples(hop_ms, buffer.rate)
    x = buffer.samples
    starts = range(0, max(len(x) - length, 0) + 1, hop) if len(x) >= length else []
    times, f0 = [], []
    for start in starts:
        times.append((start + length / 2) / buffer.rate)
        f0.append(_frame_f0(x[start:start + length], buffer.rate, threshold))
    return F0Track(np.array(times), np.array(f0), hop / buffer.rate)


def lp_residual(buffer: SampleBuffer, order: int = GCI_LP_ORDER, win_ms: float = 25.0,
                hop_ms: float = 5.0) -> np.ndarray:
    """Frame-wise autocorrelation LP residual, overlap-added.

    Coefficients come from the windowed frame; the unwindowed excerpt is
    inverse filtered and then windowed, so frame edges do not leak into the
    residual.  With a Hanning window at 1/5 overlap the result is rescaled by
    the window sum so the amplitude matches the signal's.
    """
    from .lp import lp2_analyze

    x = buffer.samples
    framed = frame_signal(buffer, win_ms, hop_ms)
    out = np.zeros(len(x))
    norm = np.zeros(len(x))
    w = window(framed.frame_length)
    for frame in framed:
        start = frame.start_index
        seg = x[start:start + framed.frame_length]
        try:
            model = lp2_analyze(frame.samples, order)
        except DegenerateInputError:
            continue
        out[start:start + seg.size] += w[:seg.size] * analysis_filter(seg, model.coefficients)
        norm[start:start + seg.size] += w[:seg.size]
    return np.divide(out, norm, out=np.zeros_like(out), where=norm > 1e-8)


def detect_gci(buffer: SampleBuffer, f0: F0Track, order: int = GCI_LP_ORDER) -> GciTrack:
    """Pick the largest |LP residual| extremum per pitch period in voiced regions.

    Candidates are accepted greedily from the strongest down, each one
    blocking a neighbourhood of ``0.8 / f0``.  Either sign is accepted since
    the polarity is not known yet.
    """
    x = buffer.samples
    rate = buffer.rate
    n = len(x)
    local_f0 = np.zeros(n)
    if f0.times.size:
        half = 0.5 * f0.hop * rate
        for t, f in zip(f0.times, f0.f0):
            if f > 0:
                c = t * rate
                lo, hi = max(int(np.floor(c - half)), 0), min(int(np.ceil(c + half)), n)
                local_f0[lo:hi] = np.where(local_f0[lo:hi] > 0, local_f0[lo:hi], f)
    if not np.any(local_f0 > 0) or n < 3:
        return GciTrack(np.zeros(0), DETECTED)
    r = np.abs(lp_residual(buffer, order))
    inner = np.arange(1, n - 1)
    cand = inner[(r[inner] >= r[inner - 1]) & (r[inner] > r[inner + 1]) & (local_f0[inner] > 0)]
    cand = cand[np.argsort(-r[cand], kind="stable")]
    blocked = np.zeros(n, dtype=bool)
    chosen = []
    for i in cand:
        if blocked[i]:
            continue
        chosen.append(i)
        reach = int(np.ceil(GCI_MIN_SPACING * rate / local_f0[i])) - 1
        blocked[max(i - reach, 0):i + reach + 1] = True
    chosen = np.sort(np.array(chosen, dtype=int))
    # weak picks in the tail of a voiced region are noise, not closures
    if chosen.size:
        ref = np.median(r[chosen])
        chosen = chosen[r[chosen] >= 0.25 * ref]
    return GciTrack(chosen / rate, DETECTED)
