"""Synthetic mixed-phase voiced speech with known ground truth.

An impulse train at the GCIs drives an anticausal two-pole glottal resonance
(a causal resonance run over the time-reversed train) and then a causal
all-pole vocal tract.  Every filter, instant and the polarity are known, which
makes these signals the oracle for the sparsity, polarity and DSM checks.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import lfilter

from .dsp import SampleBuffer
from .errors import SpecValidationError
from .lp import LpModel
from .pitch import GciTrack

TARGET_PEAK = 0.5

F0_RANGE = (80.0, 250.0)
# Fg / bandwidth of the glottal formant.  Below ~0.6 the two-pole response is
# a single open-phase hump instead of a ringing oscillation.
GLOTTAL_Q_RANGE = (0.3, 0.6)
# glottal formant and F1 occupy different bands: F1 >= ratio * Fg
FORMANT_SEPARATION = 2.0
NOISE_SNR_RANGE = (30.0, 60.0)
TRACT_PAIRS_RANGE = (2, 4)
FORMANT_RANGES = ((300.0, 900.0), (900.0, 2200.0), (2200.0, 3000.0), (3000.0, 3700.0))
BANDWIDTH_RANGE = (60.0, 200.0)


def resonator(radius: float, freq: float, rate: float) -> np.ndarray:
    """Predictor coefficients of a conjugate pole pair at ``radius * e^{±j 2 pi freq / rate}``."""
    theta = 2.0 * np.pi * freq / rate
    return np.array([2.0 * radius * np.cos(theta), -radius * radius])


def cascade(*coefficient_sets) -> np.ndarray:
    """Predictor coefficients of a product of all-pole sections."""
    poly = np.array([1.0])
    for a in coefficient_sets:
        poly = np.convolve(poly, np.concatenate(([1.0], -np.asarray(a, dtype=float))))
    return -poly[1:]


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic utterance.

    ``f0`` is a constant or a ``(start, end)`` linear ramp in Hz.
    ``glottal_pole`` is ``(radius, frequency_hz)`` or ``None`` for a purely
    causal (minimum-phase) signal; ``tract_poles`` is a list of
    ``(radius, frequency_hz)`` pairs.  ``noise_db`` is the SNR of additive
    white noise, ``None`` for a noiseless signal.
    """

    rate: float = 8000.0
    duration: float = 1.0
    f0: float | tuple = 120.0
    glottal_pole: tuple | None = (0.94, 200.0)
    tract_poles: tuple = ((0.96, 600.0), (0.95, 1400.0), (0.94, 2500.0))
    polarity: int = 1
    noise_db: float | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "tract_poles", tuple(tuple(p) for p in self.tract_poles))
        if self.glottal_pole is not None:
            object.__setattr__(self, "glottal_pole", tuple(self.glottal_pole))
        if isinstance(self.f0, (list, tuple)):
            object.__setattr__(self, "f0", tuple(float(f) for f in self.f0))
        self.validate()

    @property
    def f0_range(self):
        if isinstance(self.f0, tuple):
            return min(self.f0), max(self.f0)
        return self.f0, self.f0

    def validate(self):
        if not self.rate > 0:
            raise SpecValidationError("rate must be positive")
        if not self.duration > 0:
            raise SpecValidationError("duration must be positive")
        lo, hi = self.f0_range
        if isinstance(self.f0, tuple) and len(self.f0) != 2:
            raise SpecValidationError("f0 ramp must be (start, end)")
        if not (lo > 0 and hi < self.rate / 2):
            raise SpecValidationError(f"f0 out of range: {self.f0}")
        if self.polarity not in (1, -1):
            raise SpecValidationError("polarity must be +1 or -1")
        for radius, freq in self.tract_poles:
            if not 0 <= radius < 1:
                raise SpecValidationError(f"tract pole radius {radius} not inside the unit circle")
            if not 0 <= freq <= self.rate / 2:
                raise SpecValidationError(f"tract pole frequency {freq} beyond Nyquist")
        if self.glottal_pole is not None:
            radius, freq = self.glottal_pole
            if not 0 < radius < 1:
                raise SpecValidationError(f"glottal pole radius {radius} not in (0, 1)")
            if not lo <= freq <= 3 * hi:
                raise SpecValidationError(
                    f"glottal formant {freq} Hz outside [F0, 3 F0] = [{lo}, {3 * hi}]")

    def to_dict(self):
        d = asdict(self)
        d["tract_poles"] = [list(p) for p in self.tract_poles]
        if self.glottal_pole is not None:
            d["glottal_pole"] = list(self.glottal_pole)
        if isinstance(self.f0, tuple):
            d["f0"] = list(self.f0)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("tract_poles",):
            d[key] = tuple(tuple(p) for p in d.get(key, ()))
        if d.get("glottal_pole") is not None:
            d["glottal_pole"] = tuple(d["glottal_pole"])
        if isinstance(d.get("f0"), list):
            d["f0"] = tuple(d["f0"])
        return cls(**d)


@dataclass(frozen=True)
class SynthTruth:
    signal: SampleBuffer
    gcis: GciTrack
    causal_filter: LpModel
    anticausal_filter: LpModel
    polarity: int
    excitation: SampleBuffer
    spec: SynthSpec = field(default_factory=SynthSpec)

    @property
    def gci_indices(self) -> np.ndarray:
        return self.gcis.indices(self.signal.rate)

    def to_dict(self):
        return {
            "spec": self.spec.to_dict(),
            "polarity": self.polarity,
            "causal_filter": self.causal_filter.to_dict(),
            "anticausal_filter": self.anticausal_filter.to_dict(),
            "gcis": [round(float(t), 6) for t in self.gcis.instants],
            "excitation_gain": float(np.max(np.abs(self.excitation.samples), initial=0.0)),
        }


def gci_positions(spec: SynthSpec) -> np.ndarray:
    n = int(round(spec.duration * spec.rate))
    f_start, f_end = (spec.f0 if isinstance(spec.f0, tuple) else (spec.f0, spec.f0))
    pos = []
    t = int(round(0.5 * spec.rate / f_start))
    while t < n:
        pos.append(t)
        f0 = f_start + (f_end - f_start) * t / max(n - 1, 1)
        t += int(round(spec.rate / f0))
    return np.array(pos, dtype=int)


def synthesize(spec: SynthSpec) -> SynthTruth:
    n = int(round(spec.duration * spec.rate))
    positions = gci_positions(spec)
    train = np.zeros(n)
    train[positions] = 1.0

    if spec.glottal_pole is not None:
        glottal = resonator(spec.glottal_pole[0], spec.glottal_pole[1], spec.rate)
    else:
        glottal = np.zeros(0)
    tract = cascade(*(resonator(r, f, spec.rate) for r, f in spec.tract_poles))

    # anticausal: causal recursion over the reversed train, reversed back
    g = lfilter([1.0], np.concatenate(([1.0], -glottal)), train[::-1])[::-1]
    s = lfilter([1.0], np.concatenate(([1.0], -tract)), g)

    peak = np.max(np.abs(s), initial=0.0)
    gain = TARGET_PEAK / peak if peak > 0 else 1.0
    s = spec.polarity * gain * s
    excitation = spec.polarity * gain * train

    if spec.noise_db is not None:
        rng = np.random.default_rng(spec.seed)
        rms = np.sqrt(np.mean(s * s))
        s = s + rng.standard_normal(n) * rms * 10.0 ** (-spec.noise_db / 20.0)

    return SynthTruth(
        signal=SampleBuffer(s, spec.rate),
        gcis=GciTrack(positions / spec.rate, "external"),
        causal_filter=LpModel(tract),
        anticausal_filter=LpModel(glottal),
        polarity=spec.polarity,
        excitation=SampleBuffer(excitation, spec.rate),
        spec=spec,
    )


@dataclass(frozen=True)
class CorpusRanges:
    f0: tuple = F0_RANGE
    glottal_q: tuple = GLOTTAL_Q_RANGE
    formant_separation: float = FORMANT_SEPARATION
    tract_pairs: tuple = TRACT_PAIRS_RANGE
    bandwidth: tuple = BANDWIDTH_RANGE
    noise_db: tuple | None = NOISE_SNR_RANGE
    duration: float = 1.0
    rate: float = 8000.0


def bandwidth_radius(bandwidth: float, rate: float) -> float:
    return float(np.exp(-np.pi * bandwidth / rate))


def random_spec(rng: np.random.Generator, ranges: CorpusRanges, polarity: int, seed: int) -> SynthSpec:
    """Draw one utterance: F0, then the tract, then a glottal formant below F1."""
    f0 = float(rng.uniform(*ranges.f0))
    n_pairs = int(rng.integers(ranges.tract_pairs[0], ranges.tract_pairs[1] + 1))
    poles = []
    for i, (lo, hi) in enumerate(FORMANT_RANGES[:n_pairs]):
        if i == 0:
            lo = max(lo, 1.05 * ranges.formant_separation * f0)
        hi = max(min(hi, 0.47 * ranges.rate), lo)
        freq = float(rng.uniform(lo, hi))
        poles.append((bandwidth_radius(rng.uniform(*ranges.bandwidth), ranges.rate), freq))
    fg = float(rng.uniform(f0, min(3.0 * f0, poles[0][1] / ranges.formant_separation)))
    q = float(rng.uniform(*ranges.glottal_q))
    glottal = (bandwidth_radius(fg / q, ranges.rate), fg)
    noise = None if ranges.noise_db is None else float(rng.uniform(*ranges.noise_db))
    return SynthSpec(rate=ranges.rate, duration=ranges.duration, f0=f0,
                     glottal_pole=glottal, tract_poles=tuple(poles),
                     polarity=polarity, noise_db=noise, seed=seed)


def corpus_specs(n_utterances: int, ranges: CorpusRanges | None = None, seed: int = 0) -> list:
    if n_utterances < 1:
        raise ValueError("corpus needs at least one utterance")
    ranges = ranges or CorpusRanges()
    children = np.random.SeedSequence(seed).spawn(n_utterances)
    specs = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        polarity = 1 if i % 2 == 0 else -1
        specs.append(random_spec(rng, ranges, polarity, int(child.generate_state(1)[0])))
    return specs


def make_corpus(n_utterances: int, ranges: CorpusRanges | None = None, seed: int = 0) -> list:
    """Reproducible list of :class:`SynthTruth`; polarity alternates +1/-1."""
    return [synthesize(spec) for spec in corpus_specs(n_utterances, ranges, seed)]


def corpus_hash(corpus) -> str:
    h = hashlib.sha256()
    for truth in corpus:
        h.update(json.dumps(truth.spec.to_dict(), sort_keys=True).encode())
        h.update(np.ascontiguousarray(truth.signal.samples).tobytes())
    return h.hexdigest()
