"""Signal containers and the filtering, framing and reversal primitives.

Everything here works on whole buffers with zero initial filter state.  The
array-level helpers (``preemphasis_array``, ``analysis_filter`` ...) are what
the solvers use on their hot paths; the ``SampleBuffer`` wrappers validate
and carry the sample rate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.io import wavfile
from scipy.signal import firwin, lfilter, resample_poly

from .errors import DegenerateInputError

if TYPE_CHECKING:
    from .lp import LpModel

HANNING = "hanning"
RECTANGULAR = "rectangular"
WINDOW_KINDS = (HANNING, RECTANGULAR)

# Resampler design: windowed sinc, Kaiser beta 8, 32 taps per phase.
RESAMPLE_KAISER_BETA = 8.0
RESAMPLE_TAPS_PER_PHASE = 32

SYNTHESIS_OVERFLOW = 1e12


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SampleBuffer:
    """A uniformly sampled real signal."""

    samples: np.ndarray
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"sample rate must be positive, got {self.rate}")
        arr = _frozen_array(self.samples)
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate

    def with_samples(self, samples) -> "SampleBuffer":
        return SampleBuffer(samples, self.rate)

    def __neg__(self):
        return SampleBuffer(-self.samples, self.rate)

    def __mul__(self, gain: float):
        return SampleBuffer(self.samples * gain, self.rate)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Frame:
    """A windowed excerpt of a buffer.

    ``samples`` already carry the window.  ``rate`` is kept so that
    durations given in milliseconds can be turned into sample counts.
    """

    samples: np.ndarray
    start_index: int
    window_kind: str = HANNING
    rate: float = 8000.0

    def __post_init__(self):
        arr = _frozen_array(self.samples)
        if arr.size == 0:
            raise ValueError("frame must not be empty")
        if self.start_index < 0:
            raise ValueError(f"negative start index {self.start_index}")
        if self.window_kind not in WINDOW_KINDS:
            raise ValueError(f"unknown window kind {self.window_kind!r}")
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size

    @property
    def buffer(self) -> SampleBuffer:
        return SampleBuffer(self.samples, self.rate)


@dataclass(frozen=True)
class PreemphasisSpec:
    alpha: float = -1.0

    def __post_init__(self):
        if not -1.0 <= self.alpha <= 0.0:
            raise ValueError(f"preemphasis alpha must lie in [-1, 0], got {self.alpha}")


@dataclass(frozen=True)
class FramedSignal:
    """Result of :func:`frame_signal`: frames plus the hop grid used."""

    frames: list = field(default_factory=list)
    frame_length: int = 0
    hop: int = 0
    too_short: bool = False

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i):
        return self.frames[i]


def hanning(length: int) -> np.ndarray:
    """Symmetric Hanning window without zero end points."""
    n = np.arange(1, length + 1)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / (length + 1)))


def window(length: int, kind: str = HANNING) -> np.ndarray:
    if kind == HANNING:
        return hanning(length)
    if kind == RECTANGULAR:
        return np.ones(length)
    raise ValueError(f"unknown window kind {kind!r}")


def ms_to_samples(ms: float, rate: float) -> int:
    return int(round(ms * rate / 1000.0))


def frame_signal(buffer: SampleBuffer, win_ms: float = 25.0, hop_ms: float = 5.0,
                 window_kind: str = HANNING) -> FramedSignal:
    """Cut ``buffer`` into overlapping windowed frames.

    A trailing partial window is dropped.  A buffer shorter than one window
    yields an empty result with ``too_short`` set and a warning.
    """
    if win_ms <= 0 or hop_ms <= 0:
        raise ValueError("window and hop durations must be positive")
    length = ms_to_samples(win_ms, buffer.rate)
    hop = ms_to_samples(hop_ms, buffer.rate)
    if length < 1 or hop < 1:
        raise ValueError("window or hop shorter than one sample")
    x = buffer.samples
    if x.size < length:
        warnings.warn(f"buffer of {x.size} samples is shorter than one "
                      f"{length}-sample window; no frames produced", stacklevel=2)
        return FramedSignal([], length, hop, too_short=True)
    w = window(length, window_kind)
    n_frames = (x.size - length) // hop + 1
    frames = [Frame(x[i * hop:i * hop + length] * w, i * hop, window_kind, buffer.rate)
              for i in range(n_frames)]
    return FramedSignal(frames, length, hop)


def overlap_add(frames: Sequence[np.ndarray], starts: Sequence[int], length: int) -> np.ndarray:
    out = np.zeros(length)
    for seg, start in zip(frames, starts):
        seg = np.asarray(seg, dtype=float)
        stop = min(length, start + seg.size)
        out[start:stop] += seg[:stop - start]
    return out


def resample(buffer: SampleBuffer, target_rate: float) -> SampleBuffer:
    """Band-limited rational-ratio resampling (polyphase, Kaiser windowed sinc)."""
    if not target_rate > 0:
        raise ValueError(f"target rate must be positive, got {target_rate}")
    if target_rate == buffer.rate:
        return buffer
    ratio = Fraction(target_rate / buffer.rate).limit_denominator(1000)
    up, down = ratio.numerator, ratio.denominator
    if up == down:
        return SampleBuffer(buffer.samples, target_rate)
    max_rate = max(up, down)
    taps = firwin(RESAMPLE_TAPS_PER_PHASE * max_rate + 1, 1.0 / max_rate,
                  window=("kaiser", RESAMPLE_KAISER_BETA))
    y = resample_poly(buffer.samples, up, down, window=taps)
    return SampleBuffer(y, target_rate)


def preemphasis_array(x, alpha: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = x.copy()
    y[1:] += alpha * x[:-1]
    return y


def preemphasize(buffer: SampleBuffer, spec: PreemphasisSpec | float) -> SampleBuffer:
    """Apply ``s_p(n) = s(n) + alpha * s(n-1)`` with ``s(-1) = 0``.

    With this sign convention ``alpha = -1`` is the first differencer
    (zero at z = 1), which removes DC and attenuates low frequencies.
    """
    alpha = spec.alpha if isinstance(spec, PreemphasisSpec) else PreemphasisSpec(spec).alpha
    return buffer.with_samples(preemphasis_array(buffer.samples, alpha))


def analysis_filter(x, coefficients) -> np.ndarray:
    """FIR inverse filter ``r(n) = x(n) - sum_k a_k x(n-k)`` with zero state."""
    a = np.asarray(coefficients, dtype=float)
    x = np.asarray(x, dtype=float)
    if a.size == 0:
        return x.copy()
    return lfilter(np.concatenate(([1.0], -a)), [1.0], x)


def synthesis_array(e, coefficients) -> np.ndarray:
    a = np.asarray(coefficients, dtype=float)
    e = np.asarray(e, dtype=float)
    if a.size == 0:
        return e.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        y = lfilter([1.0], np.concatenate(([1.0], -a)), e)
    if not np.all(np.isfinite(y)) or np.max(np.abs(y), initial=0.0) > SYNTHESIS_OVERFLOW:
        raise OverflowError("all-pole synthesis diverged; model is unstable")
    return y


def inverse_filter(signal: SampleBuffer, model: "LpModel") -> SampleBuffer:
    return signal.with_samples(analysis_filter(signal.samples, model.coefficients))


def synthesis_filter(excitation: SampleBuffer, model: "LpModel") -> SampleBuffer:
    """All-pole filtering ``y(n) = e(n) + sum_k a_k y(n-k)``.

    Raises ``OverflowError`` once the output magnitude exceeds 1e12, which is
    how an unstable model on a long input shows up.
    """
    return excitation.with_samples(synthesis_array(excitation.samples, model.coefficients))


def time_reverse(buffer: SampleBuffer) -> SampleBuffer:
    return buffer.with_samples(buffer.samples[::-1])


# -- WAV I/O -----------------------------------------------------------------

def read_wav(path) -> SampleBuffer:
    """Read a mono PCM16 or float32 WAV file, normalized to [-1, 1].

    Multi-channel files keep only the first channel.
    """
    rate, data = wavfile.read(path)
    if data.ndim > 1:
        warnings.warn(f"{path}: {data.shape[1]} channels, using the first", stacklevel=2)
        data = data[:, 0]
    if data.dtype == np.int16:
        x = data.astype(float) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(float) / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(float) - 128.0) / 128.0
    elif np.issubdtype(data.dtype, np.floating):
        x = data.astype(float)
    else:
        raise ValueError(f"{path}: unsupported sample type {data.dtype}")
    return SampleBuffer(x, float(rate))


def write_wav(path, buffer: SampleBuffer, subtype: str = "float32", normalize: bool = False):
    """Write ``buffer`` as mono WAV; ``subtype`` is ``"float32"`` or ``"pcm16"``."""
    x = np.asarray(buffer.samples, dtype=float)
    if normalize:
        peak = np.max(np.abs(x), initial=0.0)
        if peak > 0:
            x = 0.99 * x / peak
    rate = int(round(buffer.rate))
    if subtype == "float32":
        wavfile.write(path, rate, x.astype(np.float32))
    elif subtype == "pcm16":
        clipped = np.clip(np.round(x * 32767.0), -32768, 32767)
        wavfile.write(path, rate, clipped.astype(np.int16))
    else:
        raise ValueError(f"unknown WAV subtype {subtype!r}")


def require_energy(x, what="frame"):
    if not np.any(np.asarray(x) != 0.0):
        raise DegenerateInputError(f"{what} is all zeros")
