"""Linear-prediction solvers: l2 (Levinson-Durbin), weighted l2, l1 (IRLS).

A model holds the predictor coefficients ``a_1..a_K`` of
``A(z) = 1 - sum_k a_k z^-k``; the residual is ``x`` filtered by ``A(z)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dsp import Frame, SampleBuffer, ms_to_samples
from .errors import DegenerateInputError

EXACT_FIT = "exact_fit"
NOT_CONVERGED = "not_converged"
UNIT_CIRCLE_ROOT = "unit_circle_root"

DEFAULT_ORDER = 13
WLP_DIP_HALFWIDTH_MS = 2.0
WLP_DIP_FLOOR = 0.1
RIDGE_SCALE = 1e-9

L1_EPS_START = 1e-2
L1_EPS_STOP = 1e-8
L1_TOL = 1e-9
L1_MAX_ITER = 400
VERTEX_MAX_PASSES = 50
VERTEX_BUDGET = 2000


@dataclass(frozen=True)
class LpModel:
    coefficients: np.ndarray
    residual_energy: float = 0.0
    flags: frozenset = field(default_factory=frozenset)
    objective: float | None = None

    def __post_init__(self):
        a = np.array(self.coefficients, dtype=float).reshape(-1)
        a.setflags(write=False)
        object.__setattr__(self, "coefficients", a)
        object.__setattr__(self, "flags", frozenset(self.flags))
        if not np.all(np.isfinite(a)):
            raise ValueError("LP coefficients must be finite")
        if not (np.isfinite(self.residual_energy) and self.residual_energy >= 0):
            raise ValueError(f"invalid residual energy {self.residual_energy}")

    @property
    def order(self) -> int:
        return self.coefficients.size

    @property
    def converged(self) -> bool:
        return NOT_CONVERGED not in self.flags

    @property
    def polynomial(self) -> np.ndarray:
        """Coefficients of A(z) in powers of z^-1, leading 1 included."""
        return np.concatenate(([1.0], -self.coefficients))

    @classmethod
    def identity(cls, order=0):
        return cls(np.zeros(order))

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "coefficients": [float(c) for c in self.coefficients],
            "residual_energy": float(self.residual_energy),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        coeffs = d["coefficients"]
        if "order" in d and d["order"] != len(coeffs):
            raise ValueError("order does not match coefficient count")
        return cls(coeffs, d.get("residual_energy", 0.0))


@dataclass(frozen=True)
class PoleReport:
    roots: np.ndarray
    max_modulus: float

    @property
    def stable(self) -> bool:
        return self.max_modulus < 1.0


def _samples(x) -> np.ndarray:
    if isinstance(x, (Frame, SampleBuffer)):
        return x.samples
    return np.asarray(x, dtype=float)


def autocorrelate(frame, order: int) -> np.ndarray:
    """Biased autocorrelation ``rho_j = sum_n x(n) x(n-j)`` for j = 0..order."""
    x = _samples(frame)
    if x.size <= order:
        raise ValueError(f"frame of length {x.size} too short for order {order}")
    return np.array([np.dot(x[j:], x[:x.size - j]) for j in range(order + 1)])


def levinson_durbin(rho, order: int | None = None):
    """Solve the Toeplitz normal equations by the Levinson-Durbin recursion.

    Returns ``(model, reflection)``.  If the prediction error vanishes before
    the requested order is reached the recursion stops there; the remaining
    coefficients are zero and the model is flagged ``exact_fit``.
    """
    rho = np.asarray(rho, dtype=float)
    if order is None:
        order = rho.size - 1
    if rho.size < order + 1:
        raise ValueError("autocorrelation sequence shorter than order + 1")
    if not rho[0] > 0:
        raise DegenerateInputError(f"zero-lag autocorrelation must be positive, got {rho[0]}")

    a = np.zeros(order)
    k = np.zeros(order)
    err = rho[0]
    flags = set()
    floor = rho[0] * 1e-14
    for i in range(order):
        acc = rho[i + 1] - np.dot(a[:i], rho[i:0:-1])
        ki = acc / err
        k[i] = ki
        prev = a[:i].copy()
        a[:i] = prev - ki * prev[::-1]
        a[i] = ki
        err *= 1.0 - ki * ki
        if err <= floor:
            err = max(err, 0.0)
            flags.add(EXACT_FIT)
            break
    return LpModel(a, err, flags), k


def lp2_analyze(frame, order: int = DEFAULT_ORDER) -> LpModel:
    """Autocorrelation-method LP (minimum-phase by construction)."""
    model, _ = levinson_durbin(autocorrelate(frame, order), order)
    return model


def gci_weighting(frame, gcis_in_frame, dip_halfwidth_ms: float = WLP_DIP_HALFWIDTH_MS,
                  floor: float = WLP_DIP_FLOOR, rate: float | None = None) -> np.ndarray:
    """Per-sample weights that dip to ``floor`` around each GCI.

    The dip is a raised cosine of half-width ``dip_halfwidth_ms``; where dips
    overlap the pointwise minimum is taken.
    """
    if not 0.0 <= floor < 1.0:
        raise ValueError("floor must lie in [0, 1)")
    n = len(_samples(frame))
    if rate is None:
        rate = frame.rate
    w = np.ones(n)
    half = max(ms_to_samples(dip_halfwidth_ms, rate), 1)
    idx = np.arange(n)
    for g in gcis_in_frame:
        d = np.abs(idx - g)
        near = d <= half
        dip = 1.0 - (1.0 - floor) * 0.5 * (1.0 + np.cos(np.pi * d[near] / half))
        w[near] = np.minimum(w[near], dip)
    return w


def _regression(x, order):
    """Covariance-method design: rows [x(n-1) .. x(n-K)] for n = K..L-1."""
    n = x.size
    X = np.empty((n - order, order))
    for k in range(1, order + 1):
        X[:, k - 1] = x[order - k:n - k]
    return X, x[order:]


def wlp2_analyze(frame, order: int = DEFAULT_ORDER, weights=None) -> LpModel:
    """Weighted least-squares LP on the covariance-method normal equations."""
    x = _samples(frame)
    if x.size <= order:
        raise ValueError(f"frame of length {x.size} too short for order {order}")
    if weights is None:
        weights = np.ones(x.size)
    w = np.asarray(weights, dtype=float)
    if w.size != x.size:
        raise ValueError("weight vector length differs from frame length")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    X, y = _regression(x, order)
    wy = w[order:]
    R = X.T @ (wy[:, None] * X)
    c = X.T @ (wy * y)
    a = _solve_spd(R, c)
    r = y - X @ a
    return LpModel(a, float(np.dot(r, r)))


def _solve_spd(R, c):
    trace = np.trace(R)
    if not trace > 0:
        raise DegenerateInputError("weighted normal equations are identically zero")
    try:
        L = np.linalg.cholesky(R)
        if np.min(np.abs(np.diag(L))) ** 2 > 1e-13 * trace:
            return np.linalg.solve(R, c)
    except np.linalg.LinAlgError:
        pass
    R = R + RIDGE_SCALE * trace * np.eye(R.shape[0])
    try:
        np.linalg.cholesky(R)
    except np.linalg.LinAlgError as exc:
        raise DegenerateInputError("normal equations rank deficient after ridge") from exc
    return np.linalg.solve(R, c)


def l1_objective(frame, coefficients) -> float:
    x = _samples(frame)
    a = np.asarray(coefficients, dtype=float)
    X, y = _regression(x, a.size)
    return float(np.sum(np.abs(y - X @ a)))


def l1_analyze(frame, order: int = DEFAULT_ORDER, tol: float = L1_TOL,
               max_iter: int = L1_MAX_ITER, trace: list | None = None) -> LpModel:
    """Least-absolute-deviation LP by iteratively reweighted least squares.

    ``|r|`` is smoothed as ``sqrt(r^2 + eps^2)`` with ``eps`` stepping down by
    decades from 1e-2 to 1e-8 (relative to the frame RMS).  Each step is a
    majorize-minimize update, so the smoothed objective never increases for a
    fixed ``eps``.  After the last level the iterate is snapped to a nearby
    vertex (``K`` zero residuals) and improved by row exchanges when that
    lowers the objective.

    If ``trace`` is a list, ``(eps, smoothed_objective)`` is appended per
    iteration.
    """
    x = _samples(frame)
    if x.size <= order:
        raise ValueError(f"frame of length {x.size} too short for order {order}")
    X, y = _regression(x, order)
    scale = np.sqrt(np.mean(x * x))
    if not scale > 0:
        raise DegenerateInputError("frame is all zeros")
    if order == 0:
        return LpModel(np.zeros(0), float(y @ y), objective=float(np.sum(np.abs(y))))

    a = np.linalg.lstsq(X, y, rcond=None)[0]
    best_a, best_obj = a, np.sum(np.abs(y - X @ a))
    n_levels = int(round(np.log10(L1_EPS_START / L1_EPS_STOP))) + 1
    iterations = 0
    converged = True
    for eps in np.logspace(np.log10(L1_EPS_START), np.log10(L1_EPS_STOP), n_levels) * scale:
        r = y - X @ a
        smooth = np.sum(np.sqrt(r * r + eps * eps))
        level_done = False
        while iterations < max_iter:
            iterations += 1
            sw = (r * r + eps * eps) ** -0.25
            a_new = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)[0]
            r_new = y - X @ a_new
            smooth_new = np.sum(np.sqrt(r_new * r_new + eps * eps))
            if trace is not None:
                trace.append((float(eps), float(smooth_new)))
            if smooth_new > smooth:
                # rounding only; the MM step cannot ascend
                level_done = True
                break
            a, r = a_new, r_new
            obj = np.sum(np.abs(r))
            if obj < best_obj:
                best_a, best_obj = a, obj
            change = smooth - smooth_new
            smooth = smooth_new
            if change <= tol * max(smooth, scale):
                level_done = True
                break
        if not level_done:
            converged = False
            break

    best_a, best_obj = _vertex_polish(X, y, best_a, best_obj)
    r = y - X @ best_a
    flags = () if converged else (NOT_CONVERGED,)
    return LpModel(best_a, float(r @ r), flags, objective=float(best_obj))


def _vertex_objectives(X, y, row_sets):
    """Fit every vertex in ``row_sets`` exactly; return (coefficients, objectives)."""
    A = X[row_sets]
    b = y[row_sets]
    det = np.abs(np.linalg.det(A))
    ok = det > 1e-12 * np.maximum(np.prod(np.linalg.norm(A, axis=2), axis=1), 1e-300)
    coeffs = np.full((len(row_sets), X.shape[1]), np.nan)
    objs = np.full(len(row_sets), np.inf)
    if np.any(ok):
        coeffs[ok] = np.linalg.solve(A[ok], b[ok][..., None])[..., 0]
        objs[ok] = np.sum(np.abs(y[None, :] - coeffs[ok] @ X.T), axis=1)
    return coeffs, objs


def _vertex_polish(X, y, a, obj):
    """Move to the best vertex reachable by exchanging one interpolated row.

    The LAD optimum is attained at a vertex where ``K`` residuals vanish.  The
    start is the vertex through the ``K`` smallest residuals of ``a``; then
    single-row exchanges are taken while they lower the objective (a vertex
    with no improving neighbour is optimal).  For long frames only the rows
    nearest the fit are tried as entering rows.
    """
    n, order = X.shape
    rows = np.argsort(np.abs(y - X @ a), kind="stable")[:order]
    coeffs, objs = _vertex_objectives(X, y, rows[None, :])
    if not objs[0] < np.inf:
        return a, obj
    current, current_obj = rows, objs[0]
    cand_a = coeffs[0]
    for _ in range(VERTEX_MAX_PASSES):
        resid = np.abs(y - X @ cand_a)
        outside = np.setdiff1d(np.argsort(resid, kind="stable"), current, assume_unique=True)
        if outside.size == 0:
            break
        if outside.size * order > VERTEX_BUDGET:
            outside = outside[:max(VERTEX_BUDGET // order, 1)]
        sets = np.repeat(current[None, :], order * outside.size, axis=0)
        sets[np.arange(sets.shape[0]), np.tile(np.arange(order), outside.size)] = np.repeat(outside, order)
        coeffs, objs = _vertex_objectives(X, y, sets)
        best = int(np.argmin(objs))
        if not objs[best] < current_obj * (1.0 - 1e-13):
            break
        current, current_obj, cand_a = sets[best], objs[best], coeffs[best]
    if current_obj < obj:
        return cand_a, float(current_obj)
    return a, obj


def companion_matrix(coefficients) -> np.ndarray:
    """Companion matrix of ``z^K - a_1 z^(K-1) - ... - a_K``."""
    a = np.asarray(coefficients, dtype=float)
    K = a.size
    C = np.zeros((K, K))
    C[0, :] = a
    if K > 1:
        C[1:, :-1] = np.eye(K - 1)
    return C


def polynomial_roots(model: LpModel) -> PoleReport:
    if model.order == 0:
        return PoleReport(np.zeros(0, dtype=complex), 0.0)
    roots = np.linalg.eigvals(companion_matrix(model.coefficients)).astype(complex)
    return PoleReport(roots, float(np.max(np.abs(roots))))


def reflect_poles(model: LpModel) -> LpModel:
    """Mirror roots outside the unit circle to ``1/conj(root)``.

    The magnitude response of A(z) is kept up to a constant gain.  Roots
    within 1e-9 of the unit circle are left in place and the model is flagged
    ``unit_circle_root``.  The stored residual energy is rescaled by the
    gain change.
    """
    report = polynomial_roots(model)
    roots = report.roots.copy()
    mod = np.abs(roots)
    flags = set(model.flags)
    if np.any(np.abs(mod - 1.0) < 1e-9):
        flags.add(UNIT_CIRCLE_ROOT)
    outside = mod > 1.0 + 1e-9
    if not np.any(outside):
        return LpModel(model.coefficients, model.residual_energy, flags, model.objective)
    gain = np.prod(mod[outside])
    roots[outside] = 1.0 / np.conj(roots[outside])
    poly = np.real(np.poly(roots))
    return LpModel(-poly[1:], model.residual_energy / gain ** 2, flags, model.objective)
