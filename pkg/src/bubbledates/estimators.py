"""Weighted AR(1) split fits and the sample-splitting break-date estimators.

Every fit regresses ``y_t`` on ``y_{t-1}`` without a constant, weighting
observation ``t`` by ``w_t = delta_t**-2``. The collapse date minimises the
two-segment SSR over the full sample. The emergence and recovery dates then
minimise the same criterion on ``[1, k_c]`` and ``[k_c + 1, T]``. With
``delta_t = 1`` this is the ordinary (OLS) sample-splitting method.

All SSR scans use weighted prefix sums, so one scan costs O(T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "EstimationError",
    "DegenerateSegmentError",
    "SegmentFit",
    "BreakEstimates",
    "as_weights",
    "segment_fit",
    "weighted_ar_coef",
    "split_ssr",
    "ssr_profile",
    "trim_bounds",
    "collapse_range",
    "emerge_range",
    "recover_range",
    "estimate_collapse",
    "estimate_emerge",
    "estimate_recover",
    "sample_split",
]

# observations required on each side of a candidate split
MIN_SEGMENT = 2
# relative band within which fast SSR values are re-scored exactly
REFINE_RTOL = 1e-10


class EstimationError(ValueError):
    """Raised when no admissible break date can be computed."""


class DegenerateSegmentError(EstimationError):
    """A segment has zero weighted regressor energy."""


@dataclass(frozen=True)
class SegmentFit:
    phi_hat: float
    ssr: float
    n: int


@dataclass(frozen=True)
class BreakEstimates:
    """Estimated break dates; ``None`` marks an unavailable date."""

    T: int
    k_e: Optional[int]
    k_c: Optional[int]
    k_r: Optional[int]
    method: str = "OLS"

    @property
    def tau_e(self) -> Optional[float]:
        return None if self.k_e is None else self.k_e / self.T

    @property
    def tau_c(self) -> Optional[float]:
        return None if self.k_c is None else self.k_c / self.T

    @property
    def tau_r(self) -> Optional[float]:
        return None if self.k_r is None else self.k_r / self.T

    @property
    def available(self) -> dict[str, bool]:
        return {
            "k_e": self.k_e is not None,
            "k_c": self.k_c is not None,
            "k_r": self.k_r is not None,
        }

    @property
    def complete(self) -> bool:
        return all(self.available.values())

    def dates(self) -> tuple[Optional[int], Optional[int], Optional[int]]:
        return (self.k_e, self.k_c, self.k_r)


def _as_series(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or len(y) < 2:
        raise ValueError("series must be one-dimensional with at least 2 values")
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains non-finite values")
    return y


def as_weights(delta, T: int) -> np.ndarray:
    """Regression weights ``w_t = delta_t**-2`` for ``t = 1..T``.

    ``delta=None`` gives unit weights.
    """
    if delta is None:
        return np.ones(T)
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (T,):
        raise ValueError(f"expected {T} weights, got shape {delta.shape}")
    if not np.all(np.isfinite(delta) & (delta > 0)):
        raise ValueError("weights delta_t must be positive and finite")
    return delta ** -2.0


class _Moments:
    """Weighted prefix sums of ``y_{t-1}^2``, ``y_{t-1} u_t`` and ``u_t^2``.

    ``u_t = y_t - y_{t-1}``. Segment SSRs are formed as
    ``Suu - Sxu**2 / Sxx``, which equals ``Syy - Sxy**2 / Sxx`` but keeps the
    subtraction on the scale of the shocks rather than of the levels.
    """

    def __init__(self, y: np.ndarray, w: np.ndarray):
        self.x = x = y[:-1]
        self.u = u = np.diff(y)
        self.w = w
        self.T = len(u)
        self.xx = np.concatenate(([0.0], np.cumsum(w * x * x)))
        self.xu = np.concatenate(([0.0], np.cumsum(w * x * u)))
        self.uu = np.concatenate(([0.0], np.cumsum(w * u * u)))

    def segment(self, lo, hi):
        """Sums over ``t = lo..hi`` (1-based, inclusive); arrays broadcast."""
        a = np.asarray(lo) - 1
        b = np.asarray(hi)
        return (
            self.xx[b] - self.xx[a],
            self.xu[b] - self.xu[a],
            self.uu[b] - self.uu[a],
        )

    def ssr(self, lo, hi) -> np.ndarray:
        sxx, sxu, suu = self.segment(lo, hi)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = suu - sxu * (sxu / sxx)
        out = np.where(sxx > 0, np.maximum(out, 0.0), np.inf)
        return out

    def split_profile(self, ks: np.ndarray, lo: int, hi: int) -> np.ndarray:
        return self.ssr(lo, ks) + self.ssr(ks + 1, hi)

    def direct_ssr(self, lo: int, hi: int) -> float:
        """Segment SSR summed residual by residual (slow, no cancellation)."""
        x, u, w = self.x[lo - 1:hi], self.u[lo - 1:hi], self.w[lo - 1:hi]
        sxx = float(np.sum(w * x * x))
        if not sxx > 0:
            return math.inf
        r = u - (float(np.sum(w * x * u)) / sxx) * x
        return float(np.sum(w * r * r))

    def direct_split(self, k: int, lo: int, hi: int) -> float:
        return self.direct_ssr(lo, k) + self.direct_ssr(k + 1, hi)


def _check_span(span, T: int) -> tuple[int, int]:
    lo, hi = (1, T) if span is None else (int(span[0]), int(span[1]))
    if not 1 <= lo <= hi <= T:
        raise ValueError(f"range [{lo}, {hi}] outside 1..{T}")
    return lo, hi


def segment_fit(y, span, delta=None) -> SegmentFit:
    """Weighted no-constant AR(1) fit of ``y_t`` on ``y_{t-1}`` over ``span``."""
    y = _as_series(y)
    T = len(y) - 1
    lo, hi = _check_span(span, T)
    w = as_weights(delta, T)[lo - 1:hi]
    x, yt = y[lo - 1:hi], y[lo:hi + 1]
    sxx = float(np.sum(w * x * x))
    if not sxx > 0:
        raise DegenerateSegmentError(f"zero regressor energy on [{lo}, {hi}]")
    phi = float(np.sum(w * x * yt)) / sxx
    u = yt - x
    sxu = float(np.sum(w * x * u))
    ssr = max(float(np.sum(w * u * u)) - sxu * sxu / sxx, 0.0)
    return SegmentFit(phi_hat=phi, ssr=ssr, n=hi - lo + 1)


def weighted_ar_coef(y, span, delta=None) -> float:
    """``sum w y_{t-1} y_t / sum w y_{t-1}^2`` over ``t`` in ``span``."""
    return segment_fit(y, span, delta).phi_hat


def split_ssr(y, k: int, delta=None, span=None) -> float:
    """Minimised two-segment weighted SSR with the split after date ``k``.

    Segments are ``[l, k]`` and ``[k + 1, m]`` where ``span = (l, m)``
    (default the full sample).
    """
    y = _as_series(y)
    T = len(y) - 1
    lo, hi = _check_span(span, T)
    if not lo <= k < hi:
        raise ValueError(f"split {k} must satisfy {lo} <= k < {hi}")
    mom = _Moments(y, as_weights(delta, T))
    val = float(mom.split_profile(np.array(k), lo, hi))
    if not math.isfinite(val):
        raise DegenerateSegmentError(f"degenerate segment at split k={k}")
    return val


def ssr_profile(y, ks, delta=None, span=None) -> np.ndarray:
    """Vector of ``split_ssr`` values at candidate splits ``ks``.

    Degenerate candidates come back as ``inf``.
    """
    y = _as_series(y)
    T = len(y) - 1
    lo, hi = _check_span(span, T)
    ks = np.asarray(ks, dtype=int)
    if ks.size and (ks.min() < lo or ks.max() >= hi):
        raise ValueError(f"candidates must lie in [{lo}, {hi})")
    return _Moments(y, as_weights(delta, T)).split_profile(ks, lo, hi)


def trim_bounds(T: int, trim: float) -> tuple[int, int]:
    """``(ceil(trim * T), floor((1 - trim) * T))``."""
    if not 0.0 < trim < 0.5:
        raise ValueError(f"trim must lie in (0, 0.5), got {trim}")
    # tolerance guards products like 0.05 * 400 landing a hair off an integer
    lower = math.ceil(trim * T - 1e-9)
    upper = math.floor((1.0 - trim) * T + 1e-9)
    return lower, upper


def _nonempty(lo: int, hi: int) -> Optional[tuple[int, int]]:
    return (lo, hi) if lo <= hi else None


def collapse_range(T: int, trim: float = 0.05) -> Optional[tuple[int, int]]:
    g, top = trim_bounds(T, trim)
    return _nonempty(max(g, MIN_SEGMENT), min(top, T - MIN_SEGMENT))


def emerge_range(T: int, k_c: int, trim: float = 0.05) -> Optional[tuple[int, int]]:
    """Candidates ``[ceil(trim T), k_c - ceil(trim T)]`` for the emergence date."""
    g, _ = trim_bounds(T, trim)
    return _nonempty(max(g, MIN_SEGMENT), min(k_c - g, k_c - MIN_SEGMENT))


def recover_range(T: int, k_c: int, trim: float = 0.05) -> Optional[tuple[int, int]]:
    """Candidates ``[k_c + ceil(trim T) + 1, floor((1 - trim) T)]`` for the recovery date."""
    g, top = trim_bounds(T, trim)
    return _nonempty(
        max(k_c + g + 1, k_c + MIN_SEGMENT), min(top, T - MIN_SEGMENT)
    )


def _argmin_split(mom: _Moments, cand: tuple[int, int], lo: int, hi: int) -> int:
    ks = np.arange(cand[0], cand[1] + 1)
    prof = mom.split_profile(ks, lo, hi)
    finite = np.isfinite(prof)
    if not finite.any():
        raise EstimationError(
            f"every candidate split in [{cand[0]}, {cand[1]}] is degenerate"
        )
    best = prof[finite].min()
    # prefix-sum differences carry rounding of order eps * (cumulative energy);
    # candidates inside that band are re-scored residual by residual
    tol = REFINE_RTOL * (mom.uu[hi] + best)
    near = np.flatnonzero(prof <= best + tol)
    if len(near) == 1:
        return int(ks[near[0]])
    exact = np.array([mom.direct_split(int(ks[i]), lo, hi) for i in near])
    # first minimum, i.e. the smallest k on ties
    return int(ks[near[np.argmin(exact)]])


def _prepare(y, delta):
    y = _as_series(y)
    T = len(y) - 1
    w = as_weights(delta, T)
    # argmins are invariant to rescaling w and y; normalising makes constant
    # weights exactly 1 and keeps explosive paths away from overflow
    scale = np.abs(y).max()
    if scale > 0:
        y = y / scale
    return y, T, _Moments(y, w / w.max())


def _collapse(mom: _Moments, T: int, trim: float) -> int:
    cand = collapse_range(T, trim)
    if cand is None:
        raise EstimationError(f"sample of T={T} too short for trim={trim}")
    return _argmin_split(mom, cand, 1, T)


def _emerge(mom: _Moments, T: int, k_c: int, trim: float) -> Optional[int]:
    cand = emerge_range(T, k_c, trim)
    if cand is None:
        return None
    return _argmin_split(mom, cand, 1, k_c)


def _recover(mom: _Moments, T: int, k_c: int, trim: float) -> Optional[int]:
    cand = recover_range(T, k_c, trim)
    if cand is None:
        return None
    return _argmin_split(mom, cand, k_c + 1, T)


def estimate_collapse(y, delta=None, trim: float = 0.05) -> int:
    """Collapse date: argmin of the full-sample split SSR over the trimmed range."""
    y, T, mom = _prepare(y, delta)
    return _collapse(mom, T, trim)


def estimate_emerge(y, delta, k_c_hat: int, trim: float = 0.05) -> Optional[int]:
    """Emergence date from the subsample ``[1, k_c_hat]``.

    Returns ``None`` when ``k_c_hat`` leaves no admissible candidate.
    """
    y, T, mom = _prepare(y, delta)
    return _emerge(mom, T, int(k_c_hat), trim)


def estimate_recover(y, delta, k_c_hat: int, trim: float = 0.05) -> Optional[int]:
    """Recovery date from the subsample ``[k_c_hat + 1, T]``.

    Returns ``None`` when ``k_c_hat`` leaves no admissible candidate.
    """
    y, T, mom = _prepare(y, delta)
    return _recover(mom, T, int(k_c_hat), trim)


def sample_split(y, delta=None, trim: float = 0.05, method: Optional[str] = None) -> BreakEstimates:
    """Estimate ``(k_e, k_c, k_r)`` by the sample-splitting approach.

    Parameters
    ----------
    y : array_like
        Series ``y_0 .. y_T``.
    delta : array_like, optional
        Weights ``delta_1 .. delta_T``; observation ``t`` enters the SSR with
        weight ``delta_t**-2``. Defaults to unit weights.
    trim : float
        Fraction of ``T`` excluded at the edges of every search range.
    method : str, optional
        Label stored on the result; defaults to ``"OLS"`` when ``delta`` is
        None and ``"WLS"`` otherwise.

    Returns
    -------
    BreakEstimates
        Dates that cannot be estimated are ``None``.
    """
    if method is None:
        method = "OLS" if delta is None else "WLS"
    y, T, mom = _prepare(y, delta)
    try:
        k_c = _collapse(mom, T, trim)
    except EstimationError:
        return BreakEstimates(T, None, None, None, method)
    try:
        k_e = _emerge(mom, T, k_c, trim)
    except EstimationError:
        k_e = None
    try:
        k_r = _recover(mom, T, k_c, trim)
    except EstimationError:
        k_r = None
    return BreakEstimates(T, k_e, k_c, k_r, method)
