"""Four-regime bubble model: volatility profiles, shocks and path simulation.

A path starts as a random walk with a vanishing drift, turns explosive at
``k_e + 1``, collapses at rate ``phi_b < 1`` from ``k_c + 1`` and goes back
to a drifting random walk after ``k_r``::

    y_t = d0 + y_{t-1} + e_t        1 <= t <= k_e
    y_t = phi_a * y_{t-1} + e_t     k_e < t <= k_c
    y_t = phi_b * y_{t-1} + e_t     k_c < t <= k_r
    y_t = d1 + y_{t-1} + e_t        k_r < t <= T

with ``d0 = c0 * T**-eta0`` and ``d1 = c1 * T**-eta1``. Shocks are
``e_t = sigma_t * z_t`` with ``sigma_t = omega(t / T)`` deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

__all__ = [
    "Constant",
    "OneBreak",
    "Piecewise",
    "VolatilityProfile",
    "DgpParams",
    "ShockSeries",
    "volatility_at",
    "volatility_path",
    "generate_shocks",
    "simulate",
    "local_to_unity",
    "make_rng",
]


def _check_sigma(value: float, name: str) -> None:
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class Constant:
    """Homoskedastic shocks with standard deviation ``sigma``."""

    sigma: float = 1.0

    def __post_init__(self):
        _check_sigma(self.sigma, "sigma")

    def path(self, T: int) -> np.ndarray:
        return np.full(T, float(self.sigma))


@dataclass(frozen=True)
class OneBreak:
    """Single shift in volatility from ``sigma0`` to ``sigma1``.

    Dates ``t <= floor(tau * T)`` use ``sigma0``; later dates use ``sigma1``.
    """

    sigma0: float
    sigma1: float
    tau: float

    def __post_init__(self):
        _check_sigma(self.sigma0, "sigma0")
        _check_sigma(self.sigma1, "sigma1")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau!r}")

    def path(self, T: int) -> np.ndarray:
        t = np.arange(1, T + 1)
        cut = math.floor(self.tau * T)
        return np.where(t <= cut, float(self.sigma0), float(self.sigma1))


@dataclass(frozen=True)
class Piecewise:
    """Piecewise-linear volatility through ``(fraction, sigma)`` knots.

    Flat extrapolation outside the first and last knot.
    """

    knots: tuple = field(default_factory=tuple)

    def __post_init__(self):
        knots = tuple((float(f), float(s)) for f, s in self.knots)
        if not knots:
            raise ValueError("Piecewise profile needs at least one knot")
        fracs = [f for f, _ in knots]
        if any(b <= a for a, b in zip(fracs, fracs[1:])):
            raise ValueError("knot fractions must be strictly increasing")
        for f, s in knots:
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"knot fraction {f!r} outside [0, 1]")
            _check_sigma(s, "knot sigma")
        object.__setattr__(self, "knots", knots)

    def path(self, T: int) -> np.ndarray:
        fracs = np.array([f for f, _ in self.knots])
        sig = np.array([s for _, s in self.knots])
        return np.interp(np.arange(1, T + 1) / T, fracs, sig)


VolatilityProfile = Union[Constant, OneBreak, Piecewise]


def volatility_path(profile: VolatilityProfile, T: int) -> np.ndarray:
    """Return ``sigma_1 .. sigma_T`` as an array of length ``T``."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    return profile.path(T)


def volatility_at(profile: VolatilityProfile, t: int, T: int) -> float:
    """Shock standard deviation ``sigma_t`` at date ``t`` of a length-``T`` sample."""
    if not 1 <= t <= T:
        raise ValueError(f"date t={t} outside 1..{T}")
    return float(volatility_path(profile, T)[t - 1])


def make_rng(seed: int) -> np.random.Generator:
    """Generator used for all shock draws: numpy Philox keyed by ``seed``.

    Philox is counter based, so one 64-bit seed fully determines the stream.
    """
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed))


@dataclass(frozen=True)
class ShockSeries:
    values: np.ndarray
    seed: int

    def __len__(self):
        return len(self.values)


def generate_shocks(profile: VolatilityProfile, T: int, seed: int) -> ShockSeries:
    """Draw ``e_t = sigma_t * z_t`` with ``z_t`` i.i.d. N(0, 1) from ``make_rng(seed)``."""
    sigma = volatility_path(profile, T)
    z = make_rng(seed).standard_normal(T)
    return ShockSeries(values=sigma * z, seed=int(seed))


@dataclass(frozen=True)
class DgpParams:
    """Parameters of the four-regime model.

    Attributes
    ----------
    T : int
        Sample size; the simulated series holds ``y_0 .. y_T``.
    k_e, k_c, k_r : int
        Last date of the normal, explosive and collapse regimes.
    phi_a, phi_b : float
        Explosive and collapse autoregressive roots.
    c0, eta0, c1, eta1 : float
        Drift in the first and last regime is ``c * T**-eta``.
    y0 : float
        Initial value.
    """

    T: int
    k_e: int
    k_c: int
    k_r: int
    phi_a: float
    phi_b: float
    c0: float = 0.0
    eta0: float = 1.0
    c1: float = 0.0
    eta1: float = 1.0
    y0: float = 0.0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if not 0 < self.k_e < self.k_c < self.k_r < self.T:
            raise ValueError(
                f"need 0 < k_e < k_c < k_r < T, got "
                f"({self.k_e}, {self.k_c}, {self.k_r}) with T={self.T}"
            )
        if not self.phi_a > 1:
            raise ValueError(f"phi_a must exceed 1, got {self.phi_a}")
        if not self.phi_b < 1:
            raise ValueError(f"phi_b must be below 1, got {self.phi_b}")
        if self.c0 < 0 or self.c1 < 0:
            raise ValueError("drift numerators c0, c1 must be nonnegative")
        if self.eta0 <= 0.5 or self.eta1 <= 0.5:
            raise ValueError("drift exponents eta0, eta1 must exceed 1/2")

    @classmethod
    def from_fractions(
        cls,
        T: int,
        fractions: Sequence[float],
        phi_a: float,
        phi_b: float,
        drift0: float = 0.0,
        drift1: float = 0.0,
        y0: float = 0.0,
    ) -> "DgpParams":
        """Build parameters from break fractions and per-period drifts.

        Dates are ``floor(tau * T)``; the drifts are stored as ``c`` with
        ``eta = 1`` so that ``c * T**-1`` equals the requested drift.
        """
        k_e, k_c, k_r = (int(math.floor(f * T + 1e-9)) for f in fractions)
        return cls(
            T=T, k_e=k_e, k_c=k_c, k_r=k_r, phi_a=phi_a, phi_b=phi_b,
            c0=drift0 * T, eta0=1.0, c1=drift1 * T, eta1=1.0, y0=y0,
        )

    @property
    def drift0(self) -> float:
        return self.c0 * self.T ** (-self.eta0)

    @property
    def drift1(self) -> float:
        return self.c1 * self.T ** (-self.eta1)

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.k_e / self.T, self.k_c / self.T, self.k_r / self.T)


def simulate(params: DgpParams, shocks) -> np.ndarray:
    """Run the four-regime recursion; returns ``y_0 .. y_T`` (length ``T + 1``)."""
    eps = np.asarray(getattr(shocks, "values", shocks), dtype=float)
    if eps.shape != (params.T,):
        raise ValueError(f"expected {params.T} shocks, got shape {eps.shape}")
    d0, d1 = params.drift0, params.drift1
    k_e, k_c, k_r = params.k_e, params.k_c, params.k_r

    y = np.empty(params.T + 1)
    y[0] = params.y0
    # random-walk regimes are cumulative sums
    y[1:k_e + 1] = params.y0 + np.cumsum(d0 + eps[:k_e])
    prev = y[k_e]
    for t in range(k_e + 1, k_r + 1):
        phi = params.phi_a if t <= k_c else params.phi_b
        prev = phi * prev + eps[t - 1]
        y[t] = prev
    y[k_r + 1:] = prev + np.cumsum(d1 + eps[k_r:])
    return y


def local_to_unity(c_a: float, c_b: float, T: int) -> tuple[float, float]:
    """Roots ``(1 + c_a / T, 1 - c_b / T)``."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not c_a > 0:
        raise ValueError(f"c_a must be positive, got {c_a}")
    if not c_b > 0:
        raise ValueError(f"c_b must be positive, got {c_b}")
    if c_b >= T:
        raise ValueError(f"c_b={c_b} >= T={T} gives a nonpositive collapse root")
    return 1.0 + c_a / T, 1.0 - c_b / T
