"""Sparsity and shape statistics of residual signals."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from .dsp import Frame, SampleBuffer
from .errors import UndefinedMetricError

METRICS = ("kurtosis", "hoyer", "gini")


def _values(x) -> np.ndarray:
    if isinstance(x, (Frame, SampleBuffer)):
        x = x.samples
    return np.asarray(x, dtype=float).reshape(-1)


def _sorted(x) -> np.ndarray:
    # summing in a fixed order makes every statistic exactly permutation invariant
    return np.sort(_values(x))


def gini_index(x) -> float:
    """Gini index of the magnitude distribution (0 = flat, towards 1 = sparse).

    With magnitudes sorted ascending as c_1..c_N,
    ``1 - 2 * sum_k (c_k / ||x||_1) * (N - k + 1/2) / N``.
    """
    c = np.sort(np.abs(_values(x)))
    n = c.size
    if n < 1:
        raise UndefinedMetricError("gini index of an empty sequence")
    total = c.sum()
    if not total > 0:
        raise UndefinedMetricError("gini index of an all-zero sequence")
    k = np.arange(1, n + 1)
    return float(1.0 - 2.0 * np.dot(c / total, (n - k + 0.5) / n))


def hoyer_measure(x) -> float:
    """Normalized l1/l2 ratio, 1 for a single spike and 0 for a flat signal."""
    v = np.sort(np.abs(_values(x)))
    n = v.size
    if n < 2:
        raise UndefinedMetricError("hoyer measure needs at least 2 samples")
    l2 = np.sqrt(np.dot(v, v))
    if not l2 > 0:
        raise UndefinedMetricError("hoyer measure of an all-zero sequence")
    root_n = np.sqrt(n)
    h = (root_n - np.sum(np.abs(v)) / l2) / (root_n - 1.0)
    return float(min(max(h, 0.0), 1.0))


def _central_moments(v, orders):
    d = v - v.mean()
    m2 = np.mean(d * d)
    if not m2 > 0:
        raise UndefinedMetricError("zero variance")
    return m2, [np.mean(d ** p) for p in orders]


def kurtosis(x) -> float:
    """Non-excess kurtosis ``m4 / m2^2`` (3 for a Gaussian)."""
    v = _sorted(x)
    if v.size < 4:
        raise UndefinedMetricError("kurtosis needs at least 4 samples")
    m2, (m4,) = _central_moments(v, (4,))
    return float(m4 / (m2 * m2))


def skewness(x) -> float:
    v = _sorted(x)
    if v.size < 3:
        raise UndefinedMetricError("skewness needs at least 3 samples")
    m2, (m3,) = _central_moments(v, (3,))
    return float(m3 / m2 ** 1.5)


METRIC_FUNCTIONS = {"kurtosis": kurtosis, "hoyer": hoyer_measure, "gini": gini_index}


def metric(name: str):
    try:
        return METRIC_FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown metric {name!r}; expected one of {METRICS}") from None


def sparsity_improvement(s, r, metric_name: str = "gini") -> float:
    """Relative change ``(SM(r) - SM(s)) / SM(s)`` as a fraction (not percent)."""
    fn = metric(metric_name)
    ref = fn(s)
    if ref == 0:
        raise UndefinedMetricError(f"{metric_name} of the reference signal is zero")
    return (fn(r) - ref) / ref


@dataclass(frozen=True)
class SparsityReport:
    kurtosis: float
    hoyer: float
    gini: float
    n: int

    @classmethod
    def of(cls, x) -> "SparsityReport":
        v = _sorted(x)
        if v.size < 4:
            raise UndefinedMetricError("sparsity report needs at least 4 samples")
        return cls(kurtosis(v), hoyer_measure(v), gini_index(v), int(v.size))

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_row(self, header=False) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if header:
            writer.writerow(["kurtosis", "hoyer", "gini", "n"])
        writer.writerow([repr(self.kurtosis), repr(self.hoyer), repr(self.gini), self.n])
        return buf.getvalue()
