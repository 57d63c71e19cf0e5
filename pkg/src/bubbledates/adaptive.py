"""Two-step volatility-corrected (WLS) bubble dating.

1. Estimate the dates with unit weights (OLS).
2. Fit a regime regression of ``dy_t`` on window dummies and their
   interactions with ``y_{t-1}`` at those dates, then smooth the squared
   residuals over time with a leave-one-out kernel average.
3. Re-estimate the dates with ``delta_t = sigma_hat_t``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .estimators import (
    BreakEstimates,
    EstimationError,
    _as_series,
    sample_split,
    trim_bounds,
)

__all__ = [
    "DegenerateWindowError",
    "BandwidthError",
    "BandwidthBoundaryWarning",
    "KernelSpec",
    "RegimeRegressionFit",
    "VarianceEstimate",
    "AdaptiveResult",
    "CVResult",
    "kernel_function",
    "regime_windows",
    "regime_residuals",
    "kernel_variance",
    "cv_bandwidth",
    "resolve_bandwidth",
    "adaptive_estimate",
]

VARIANCE_FLOOR = 1e-6
CV_GRID_POINTS = 20


class DegenerateWindowError(EstimationError):
    """A regime window cannot identify its intercept and slope."""


class BandwidthError(ValueError):
    """Some date receives no kernel weight at the chosen bandwidth."""


class BandwidthBoundaryWarning(UserWarning):
    pass


def _gaussian(u):
    return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


def _epanechnikov(u):
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


_KERNELS = {"gaussian": _gaussian, "epanechnikov": _epanechnikov}


def kernel_function(kind: str):
    try:
        return _KERNELS[kind.lower()]
    except KeyError:
        raise ValueError(
            f"unknown kernel {kind!r}; choose from {sorted(_KERNELS)}"
        ) from None


@dataclass(frozen=True)
class KernelSpec:
    """Kernel and bandwidth rule for the variance smoother.

    ``bandwidth`` is either a positive float ``b`` (kernel scale ``T * b``
    in observations) or one of the rules ``"fixed_power"`` (``T**-0.2``) and
    ``"cv"`` (leave-one-out cross-validation over a log grid).
    """

    kind: str = "gaussian"
    bandwidth: Union[float, str] = "fixed_power"

    def __post_init__(self):
        kernel_function(self.kind)
        b = self.bandwidth
        if isinstance(b, str):
            if b not in ("fixed_power", "cv"):
                raise ValueError(f"unknown bandwidth rule {b!r}")
        elif not (math.isfinite(b) and b > 0):
            raise ValueError(f"bandwidth must be positive, got {b!r}")


@dataclass(frozen=True)
class RegimeRegressionFit:
    """Coefficients and residuals of the regime regression.

    ``window1`` and ``window2`` are the ``(start, end]`` date pairs used for
    the explosive and collapse dummies; a window is ``None`` when it was
    too short to enter the regression (its coefficients are then NaN).
    """

    mu1: float
    mu2: float
    delta1: float
    delta2: float
    residuals: np.ndarray
    window1: Optional[tuple[int, int]]
    window2: Optional[tuple[int, int]]
    fallback: bool = False


@dataclass(frozen=True)
class VarianceEstimate:
    sigma2: np.ndarray
    floor_applied: bool
    bandwidth: float
    kernel: str


@dataclass(frozen=True)
class AdaptiveResult:
    """Output of :func:`adaptive_estimate`.

    ``variance`` and ``regression`` are ``None`` and ``failure`` holds the
    reason when the correction step could not run; ``wls`` then has no
    available dates.
    """

    ols: BreakEstimates
    wls: BreakEstimates
    variance: Optional[VarianceEstimate]
    regression: Optional[RegimeRegressionFit]
    failure: Optional[str] = None


def regime_windows(est: BreakEstimates, trim: float = 0.05):
    """Dummy windows ``(k_e, k_c]`` and ``(k_c, k_r]`` with fallbacks.

    A missing emergence date opens the first window at ``ceil(trim T)``; a
    missing recovery date closes the second at ``floor((1 - trim) T)``.
    Returns ``(window1, window2, fallback)``.
    """
    if est.k_c is None:
        raise EstimationError("collapse date unavailable; no regime windows")
    lower, upper = trim_bounds(est.T, trim)
    fallback = est.k_e is None or est.k_r is None
    start = est.k_e if est.k_e is not None else lower
    end = est.k_r if est.k_r is not None else upper
    return (start, est.k_c), (est.k_c, end), fallback


def _window_fit(x: np.ndarray, dy: np.ndarray, label: str):
    n = len(x)
    if n < 2:
        raise DegenerateWindowError(f"{label} window has {n} observation(s)")
    xm = x.mean()
    xc = x - xm
    sxx = float(xc @ xc)
    # (dummy, dummy * y_{t-1}) are collinear when y_{t-1} is flat in the window
    if not sxx > 1e-12 * max(float(x @ x), np.finfo(float).tiny):
        raise DegenerateWindowError(f"{label} window has constant y_(t-1)")
    slope = float(xc @ dy) / sxx
    intercept = float(dy.mean()) - slope * xm
    return intercept, slope, dy - intercept - slope * x


def regime_residuals(y, est: BreakEstimates, trim: float = 0.05) -> RegimeRegressionFit:
    """Least-squares residuals of the regime regression at the dates in ``est``.

    Regresses ``dy_t`` (``t = 1..T``) on ``D1, D2, D1*y_{t-1}, D2*y_{t-1}``
    with ``D1 = 1{k_e < t <= k_c}`` and ``D2 = 1{k_c < t <= k_r}``. The two
    windows are disjoint, so the 4x4 normal equations are block diagonal
    and are solved as one 2x2 system per window. Outside both windows the
    fitted value is zero and the residual equals ``dy_t``.

    Raises
    ------
    DegenerateWindowError
        If a window built from available dates is shorter than 2 or has a
        constant lagged level.
    """
    y = _as_series(y)
    T = len(y) - 1
    if est.T != T:
        raise ValueError(f"estimates are for T={est.T}, series has T={T}")
    w1, w2, fallback = regime_windows(est, trim)
    dy = np.diff(y)
    x = y[:-1]
    resid = dy.copy()
    coefs = []
    used = []
    for (a, b), label, from_fallback in (
        (w1, "explosive", est.k_e is None),
        (w2, "collapse", est.k_r is None),
    ):
        if from_fallback and b - a < 2:
            coefs.append((math.nan, math.nan))
            used.append(None)
            continue
        mu, slope, r = _window_fit(x[a:b], dy[a:b], label)
        resid[a:b] = r
        coefs.append((mu, slope))
        used.append((a, b))
    (mu1, d1), (mu2, d2) = coefs
    return RegimeRegressionFit(
        mu1=mu1, mu2=mu2, delta1=d1, delta2=d2, residuals=resid,
        window1=used[0], window2=used[1], fallback=fallback,
    )


def _loo_smooth(e2: np.ndarray, kind: str, b: float) -> np.ndarray:
    """Leave-one-out kernel average of ``e2`` over rescaled time."""
    T = len(e2)
    lags = np.arange(-(T - 1), T) / (T * b)
    kvec = kernel_function(kind)(lags)
    kvec[T - 1] = 0.0
    num = np.convolve(e2, kvec)[T - 1:2 * T - 1]
    den = np.convolve(np.ones(T), kvec)[T - 1:2 * T - 1]
    if np.any(den <= 0):
        bad = int(np.argmax(den <= 0)) + 1
        raise BandwidthError(
            f"no kernel weight at t={bad} with bandwidth b={b:g} (T*b={T * b:g})"
        )
    return num / den


def kernel_variance(residuals, kernel: KernelSpec = KernelSpec(), T: Optional[int] = None) -> VarianceEstimate:
    """Leave-one-out Nadaraya-Watson estimate of ``sigma_t^2``.

    ``sigma2_t = sum_{i != t} K((t - i) / (T b)) e_i^2 / sum_{i != t} K((t - i) / (T b))``,
    floored at ``1e-6 * max_t sigma2_t``.
    """
    e = np.asarray(residuals, dtype=float)
    if T is None:
        T = len(e)
    if e.shape != (T,):
        raise ValueError(f"expected {T} residuals, got shape {e.shape}")
    if T < 3:
        raise ValueError("need at least 3 residuals")
    b = resolve_bandwidth(kernel, e, T)
    s2 = _loo_smooth(e * e, kernel.kind, b)
    floor = VARIANCE_FLOOR * s2.max()
    if not floor > 0:
        raise ValueError("all smoothed squared residuals are zero")
    floored = s2 < floor
    return VarianceEstimate(
        sigma2=np.maximum(s2, floor),
        floor_applied=bool(floored.any()),
        bandwidth=b,
        kernel=kernel.kind,
    )


@dataclass(frozen=True)
class CVResult:
    bandwidth: float
    grid: np.ndarray
    scores: np.ndarray
    at_boundary: bool


def cv_bandwidth(residuals, kind: str = "gaussian") -> CVResult:
    """Pick ``b`` on a 20-point log grid over ``[T**(-2/3), T**(-1/10)]``.

    The score is ``sum_t (e_t^2 - sigma2_t(b))^2`` with the leave-one-out
    smoother; ties go to the smallest ``b``. Grid points where some date
    gets no kernel weight are skipped.
    """
    e = np.asarray(residuals, dtype=float)
    T = len(e)
    e2 = e * e
    grid = np.exp(np.linspace(math.log(T ** (-2.0 / 3.0)), math.log(T ** -0.1), CV_GRID_POINTS))
    scores = np.full(CV_GRID_POINTS, np.inf)
    for j, b in enumerate(grid):
        try:
            s2 = _loo_smooth(e2, kind, float(b))
        except BandwidthError:
            continue
        scores[j] = float(np.sum((e2 - s2) ** 2))
    if not np.isfinite(scores).any():
        raise BandwidthError("no bandwidth on the grid gives positive weights")
    j = int(np.argmin(scores))
    return CVResult(float(grid[j]), grid, scores, j in (0, CV_GRID_POINTS - 1))


def resolve_bandwidth(kernel: KernelSpec, residuals, T: int) -> float:
    """Turn the bandwidth rule in ``kernel`` into a concrete ``b``."""
    if T < 3:
        raise ValueError("need T >= 3")
    rule = kernel.bandwidth
    if not isinstance(rule, str):
        return float(rule)
    if rule == "fixed_power":
        return T ** -0.2
    cv = cv_bandwidth(residuals, kernel.kind)
    if cv.at_boundary:
        warnings.warn(
            f"cross-validated bandwidth {cv.bandwidth:g} sits on the grid boundary",
            BandwidthBoundaryWarning,
            stacklevel=2,
        )
    return cv.bandwidth


def _unavailable(T: int) -> BreakEstimates:
    return BreakEstimates(T, None, None, None, "WLS")


def adaptive_estimate(y, trim: float = 0.05, kernel: KernelSpec = KernelSpec()) -> AdaptiveResult:
    """Run OLS dating, the variance correction, then WLS dating.

    Never raises on degenerate data: if the correction cannot be computed
    the WLS dates are all unavailable and ``failure`` says why.
    """
    y = _as_series(y)
    T = len(y) - 1
    ols = sample_split(y, None, trim, method="OLS")
    try:
        reg = regime_residuals(y, ols, trim)
    except EstimationError as exc:
        return AdaptiveResult(ols, _unavailable(T), None, None, str(exc))
    try:
        var = kernel_variance(reg.residuals, kernel, T)
    except (BandwidthError, ValueError) as exc:
        return AdaptiveResult(ols, _unavailable(T), None, reg, str(exc))
    wls = sample_split(y, np.sqrt(var.sigma2), trim, method="WLS")
    return AdaptiveResult(ols, wls, var, reg)
