"""Maximum-phase (MaxP) sparse LP residual extraction.

Two inverse filters are cascaded per frame.  The first, of order
``K - Ka``, is estimated on a preemphasized copy of the frame so that it
captures the causal (vocal tract) part.  Its output still carries the
anticausal glottal open phase; reversing time turns that into a causal
component, which a second order-``Ka`` LP removes before time is reversed
back.  Several preemphasis coefficients are tried and the residual with the
largest Gini index is kept.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .dsp import HANNING, Frame, SampleBuffer, analysis_filter, frame_signal, overlap_add, preemphasis_array
from .errors import DegenerateInputError, UnanalyzableFrameError, UndefinedMetricError
from .metrics import gini_index
from .pitch import GciTrack

LP2, WLP2, LP1 = "lp2", "wlp2", "lp1"
BASE_METHODS = (LP2, WLP2, LP1)
MAXP_LP2, MAXP_WLP2, MAXP_LP1 = "maxp_lp2", "maxp_wlp2", "maxp_lp1"
METHODS = (LP2, WLP2, LP1, MAXP_LP2, MAXP_WLP2, MAXP_LP1)

DEFAULT_ORDER = lp.DEFAULT_ORDER
DEFAULT_ANTICAUSAL_ORDER = 2
DEFAULT_ALPHAS = (-1.0, -0.7)


@dataclass(frozen=True)
class MaxPConfig:
    """Configuration of the MaxP pipeline.

    ``filter_preemphasized`` switches the first inverse filter from the
    original frame (default) to its preemphasized copy.
    """

    total_order: int = DEFAULT_ORDER
    anticausal_order: int = DEFAULT_ANTICAUSAL_ORDER
    alpha_candidates: tuple = DEFAULT_ALPHAS
    base_method: str = LP2
    filter_preemphasized: bool = False
    dip_halfwidth_ms: float = lp.WLP_DIP_HALFWIDTH_MS
    dip_floor: float = lp.WLP_DIP_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "alpha_candidates", tuple(float(a) for a in self.alpha_candidates))
        if not 0 < self.anticausal_order < self.total_order:
            raise ValueError("need 0 < anticausal_order < total_order")
        if not self.alpha_candidates:
            raise ValueError("alpha_candidates must not be empty")
        for a in self.alpha_candidates:
            if not -1.0 <= a <= 0.0:
                raise ValueError(f"alpha {a} outside [-1, 0]")
        if self.base_method not in BASE_METHODS:
            raise ValueError(f"unknown base method {self.base_method!r}")

    @property
    def causal_order(self) -> int:
        return self.total_order - self.anticausal_order


@dataclass(frozen=True)
class MaxPResult:
    residual: SampleBuffer
    causal_model: lp.LpModel
    anticausal_model: lp.LpModel
    alpha_chosen: float
    gini: float
    candidate_ginis: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "alpha_chosen": self.alpha_chosen,
            "gini": self.gini,
            "causal_model": self.causal_model.to_dict(),
            "anticausal_model": self.anticausal_model.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _frame_gcis(frame: Frame, gcis) -> np.ndarray:
    if gcis is None:
        return np.zeros(0, dtype=int)
    if isinstance(gcis, GciTrack):
        return gcis.in_range(frame.start_index, frame.start_index + len(frame), frame.rate)
    return np.asarray(gcis, dtype=int)


def _base_lp(x, order, method, frame, gcis, cfg: MaxPConfig | None = None):
    if method == LP2:
        return lp.lp2_analyze(x, order)
    if method == WLP2:
        if gcis is None:
            raise ValueError("wlp2 needs GCIs")
        halfwidth = cfg.dip_halfwidth_ms if cfg else lp.WLP_DIP_HALFWIDTH_MS
        floor = cfg.dip_floor if cfg else lp.WLP_DIP_FLOOR
        w = lp.gci_weighting(x, _frame_gcis(frame, gcis), halfwidth, floor, rate=frame.rate)
        return lp.wlp2_analyze(x, order, w)
    if method == LP1:
        return lp.l1_analyze(x, order)
    raise ValueError(f"unknown base method {method!r}")


def maxp_chain(x, causal_coefficients, anticausal_coefficients) -> np.ndarray:
    """Inverse-filter ``x`` causally, then anticausally (via time reversal)."""
    ra = analysis_filter(x, causal_coefficients)
    return analysis_filter(ra[::-1], anticausal_coefficients)[::-1]


def maxp_inverse_chain(signal: SampleBuffer, causal_model: lp.LpModel,
                       anticausal_model: lp.LpModel) -> SampleBuffer:
    """Apply the two MaxP inverse filters with given (e.g. true) models."""
    return signal.with_samples(maxp_chain(signal.samples, causal_model.coefficients,
                                          anticausal_model.coefficients))


def _run_alpha(frame: Frame, alpha: float, cfg: MaxPConfig, gcis):
    x = frame.samples
    sp = preemphasis_array(x, alpha)
    try:
        causal = _base_lp(sp, cfg.causal_order, cfg.base_method, frame, gcis, cfg)
        ra = analysis_filter(sp if cfg.filter_preemphasized else x, causal.coefficients)
        q = ra[::-1]
        anticausal = lp.lp2_analyze(q, cfg.anticausal_order)
        residual = analysis_filter(q, anticausal.coefficients)[::-1]
        gini = gini_index(residual)
    except (DegenerateInputError, UndefinedMetricError) as exc:
        raise UnanalyzableFrameError(f"frame at {frame.start_index}: {exc}") from exc
    return residual, causal, anticausal, gini


def maxp_residual_for_alpha(frame: Frame, alpha: float, cfg: MaxPConfig | None = None,
                            gcis: GciTrack | None = None) -> MaxPResult:
    """Run the MaxP pipeline on one frame with a fixed preemphasis coefficient."""
    cfg = cfg or MaxPConfig()
    if len(frame) <= cfg.total_order:
        raise ValueError(f"frame of length {len(frame)} too short for order {cfg.total_order}")
    if cfg.base_method == WLP2 and gcis is None:
        raise ValueError("wlp2 base method needs GCIs")
    if not np.any(frame.samples != 0.0):
        raise UnanalyzableFrameError(f"frame at {frame.start_index} is all zeros")
    residual, causal, anticausal, gini = _run_alpha(frame, alpha, cfg, gcis)
    return MaxPResult(SampleBuffer(residual, frame.rate), causal, anticausal, alpha, gini, (gini,))


def maxp_analyze(frame: Frame, cfg: MaxPConfig | None = None,
                 gcis: GciTrack | None = None) -> MaxPResult:
    """Try every candidate alpha and keep the sparsest (highest-Gini) residual.

    Ties go to the earliest candidate.  Candidates that fail are skipped; if
    all fail the frame is reported unanalyzable.
    """
    cfg = cfg or MaxPConfig()
    if len(frame) <= cfg.total_order:
        raise ValueError(f"frame of length {len(frame)} too short for order {cfg.total_order}")
    if cfg.base_method == WLP2 and gcis is None:
        raise ValueError("wlp2 base method needs GCIs")
    if not np.any(frame.samples != 0.0):
        raise UnanalyzableFrameError(f"frame at {frame.start_index} is all zeros")
    best = None
    ginis = []
    errors = []
    for alpha in cfg.alpha_candidates:
        try:
            run = _run_alpha(frame, alpha, cfg, gcis)
        except UnanalyzableFrameError as exc:
            errors.append(exc)
            ginis.append(float("nan"))
            continue
        ginis.append(run[3])
        if best is None or run[3] > best[1][3]:
            best = (alpha, run)
    if best is None:
        raise UnanalyzableFrameError(f"frame at {frame.start_index}: no alpha candidate succeeded "
                                     f"({errors[-1]})")
    alpha, (residual, causal, anticausal, gini) = best
    return MaxPResult(SampleBuffer(residual, frame.rate), causal, anticausal, alpha, gini,
                      tuple(ginis))


@dataclass(frozen=True)
class FrameAnalysis:
    """Per-frame output of :func:`analyze_frame`."""

    residual: np.ndarray
    model: lp.LpModel | None = None
    maxp: MaxPResult | None = None

    def to_dict(self) -> dict:
        if self.maxp is not None:
            return self.maxp.to_dict()
        try:
            gini = gini_index(self.residual)
        except UndefinedMetricError:
            gini = None
        return {"model": self.model.to_dict(), "gini": gini}


def _conventional(frame: Frame, method: str, order: int, gcis, cfg: MaxPConfig | None):
    x = frame.samples
    if not np.any(x != 0.0):
        raise UnanalyzableFrameError(f"frame at {frame.start_index} is all zeros")
    try:
        model = _base_lp(x, order, method, frame, gcis, cfg)
    except DegenerateInputError as exc:
        raise UnanalyzableFrameError(f"frame at {frame.start_index}: {exc}") from exc
    if method == LP1 and lp.polynomial_roots(model).max_modulus > 1.0:
        model = lp.reflect_poles(model)
    return model, analysis_filter(x, model.coefficients)


def method_config(method: str, order: int = DEFAULT_ORDER, cfg: MaxPConfig | None = None) -> MaxPConfig:
    base = method.replace("maxp_", "")
    if cfg is None:
        return MaxPConfig(total_order=order, base_method=base)
    return MaxPConfig(order, cfg.anticausal_order, cfg.alpha_candidates, base,
                      cfg.filter_preemphasized, cfg.dip_halfwidth_ms, cfg.dip_floor)


def analyze_frame(frame: Frame, method: str, order: int = DEFAULT_ORDER,
                  gcis: GciTrack | None = None, cfg: MaxPConfig | None = None) -> FrameAnalysis:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method.startswith("maxp_"):
        res = maxp_analyze(frame, method_config(method, order, cfg), gcis)
        return FrameAnalysis(res.residual.samples, maxp=res)
    model, residual = _conventional(frame, method, order, gcis, cfg)
    return FrameAnalysis(residual, model=model)


def residual_by_method(frame: Frame, method: str, order: int = DEFAULT_ORDER,
                       gcis: GciTrack | None = None, cfg: MaxPConfig | None = None) -> SampleBuffer:
    """Residual of ``frame`` under any of the six compared methods.

    Conventional methods run one LP of order ``order``; l1 models with poles
    outside the unit circle are pole-reflected first.
    """
    return SampleBuffer(analyze_frame(frame, method, order, gcis, cfg).residual, frame.rate)


@dataclass
class UtteranceAnalysis:
    frames: list
    analyses: list
    residual: SampleBuffer
    skipped: list = field(default_factory=list)

    def frame_records(self) -> list:
        out = []
        for frame, analysis in zip(self.frames, self.analyses):
            rec = {"start_index": frame.start_index}
            rec.update(analysis.to_dict())
            out.append(rec)
        return out


def _analyze_many(frames, method, order, gcis, cfg):
    out = []
    for frame in frames:
        try:
            out.append(analyze_frame(frame, method, order, gcis, cfg))
        except UnanalyzableFrameError:
            out.append(None)
    return out


def analyze_buffer(buffer: SampleBuffer, method: str, order: int = DEFAULT_ORDER,
                   gcis: GciTrack | None = None, cfg: MaxPConfig | None = None,
                   win_ms: float = 25.0, hop_ms: float = 5.0, select=None,
                   jobs: int = 1) -> UtteranceAnalysis:
    """Frame ``buffer`` and analyze each frame; the residual is overlap-added.

    ``select`` optionally filters frames (a predicate on :class:`Frame`).
    Unanalyzable (e.g. silent) frames are skipped and listed in ``skipped``.
    With ``jobs > 1`` contiguous blocks of frames go to worker processes;
    results are merged in frame order, so the output does not depend on
    ``jobs``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    framed = frame_signal(buffer, win_ms, hop_ms, HANNING)
    todo = [f for f in framed if select is None or select(f)]
    if jobs > 1 and len(todo) > 1:
        blocks = [b.tolist() for b in np.array_split(np.arange(len(todo)), min(jobs, len(todo)))]
        with ProcessPoolExecutor(max_workers=len(blocks)) as pool:
            futures = [pool.submit(_analyze_many, [todo[i] for i in b], method, order, gcis, cfg)
                       for b in blocks]
            results = [a for fut in futures for a in fut.result()]
    else:
        results = _analyze_many(todo, method, order, gcis, cfg)
    frames, analyses, skipped = [], [], []
    for frame, analysis in zip(todo, results):
        if analysis is None:
            skipped.append(frame.start_index)
            continue
        frames.append(frame)
        analyses.append(analysis)
    residual = overlap_add([a.residual for a in analyses], [f.start_index for f in frames],
                           len(buffer))
    return UtteranceAnalysis(frames, analyses, SampleBuffer(residual, buffer.rate), skipped)
