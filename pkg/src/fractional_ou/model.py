"""Simulation of ``dX = (L(t) + alpha X) dt + sigma dB^H`` for ``alpha > 0``.

Paths are assembled from the explicit solution

    X_t = e^{at} x0 + e^{at} int_0^t e^{-as} L(s) ds + sigma xi_t,
    xi_t = e^{at} int_0^t e^{-as} dB_s = B_t + a int_0^t e^{a(t-s)} B_s ds,

the last identity being integration by parts for the Young integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.integrate import cumulative_trapezoid

from .basis import DriftFunction, laplace_unit_integral
from .fbm import SamplePath, Seed, sample_fbm


@dataclass(frozen=True)
class ModelParams:
    H: float
    alpha: float
    sigma: float
    x0: float
    drift: DriftFunction

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("non-ergodic case requires alpha > 0")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0.0 < self.H < 1.0:
            raise ValueError(f"Hurst index must lie in (0, 1), got {self.H}")

    @property
    def basis(self):
        return self.drift.basis

    @property
    def theta(self) -> np.ndarray:
        """True parameter vector ``(mu_1, ..., mu_p, alpha)``."""
        return np.array(self.drift.mu + (self.alpha,))


def require_long_memory(H: float) -> None:
    """Simulation and inference are only valid for H in (1/2, 1)."""
    if not 0.5 < H < 1.0:
        raise ValueError(f"Hurst index must lie in (0.5, 1) for Young integration, got {H}")


@dataclass(frozen=True)
class SimulatedPair:
    """A solution path together with the fBm path that drove it."""

    X: SamplePath
    B: SamplePath | None
    params: ModelParams

    @property
    def T(self) -> float:
        return self.X.horizon


def default_n_steps(T: float) -> int:
    return max(2**12, math.ceil(256 * T))


def _grid(T: float, n_steps: int) -> np.ndarray:
    return np.linspace(0.0, T, n_steps + 1)


def stochastic_convolution(B: SamplePath, alpha: float) -> np.ndarray:
    """``xi_t = e^{at} int_0^t e^{-as} dB_s`` on the grid of ``B``."""
    t = B.times
    b = B.values
    decayed = cumulative_trapezoid(np.exp(-alpha * t) * b, t, initial=0.0)
    return b - b[0] * np.exp(alpha * t) + alpha * np.exp(alpha * t) * decayed


def deterministic_part(params: ModelParams, t: np.ndarray) -> np.ndarray:
    """``e^{at} (x0 + int_0^t e^{-as} L(s) ds)`` by cumulative trapezoid."""
    a = params.alpha
    drift = params.drift(t)
    integral = cumulative_trapezoid(np.exp(-a * t) * drift, t, initial=0.0)
    return np.exp(a * t) * (params.x0 + integral)


def simulate(
    params: ModelParams,
    T: float,
    n_steps: int | None = None,
    seed: Seed | None = None,
    driver: SamplePath | None = None,
) -> SimulatedPair:
    """Simulate X on ``k*T/n_steps``, ``k = 0..n_steps``.

    Args:
        driver: use this fBm path instead of sampling one (it must live on
            the same grid). A zero path gives the noiseless solution.
    """
    require_long_memory(params.H)
    if not T > 0:
        raise ValueError("horizon T must be positive")
    n_steps = default_n_steps(T) if n_steps is None else int(n_steps)
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")
    dt = T / n_steps
    if driver is None:
        if seed is None:
            raise ValueError("either a seed or a driving path is required")
        driver = sample_fbm(n_steps, dt, params.H, seed)
    elif driver.n_steps != n_steps or abs(driver.dt - dt) > 1e-12 * dt or driver.t0 != 0.0:
        raise ValueError("driving path does not match the simulation grid")
    t = _grid(T, n_steps)
    x = deterministic_part(params, t) + params.sigma * stochastic_convolution(driver, params.alpha)
    x[0] = params.x0
    return SimulatedPair(X=SamplePath(0.0, dt, x), B=driver, params=params)


def zero_driver(T: float, n_steps: int | None = None) -> SamplePath:
    n_steps = default_n_steps(T) if n_steps is None else int(n_steps)
    return SamplePath(0.0, T / n_steps, np.zeros(n_steps + 1))


def xi_tilde_terminal(pair: SimulatedPair) -> float:
    """``e^{-alpha T} X_T``."""
    return float(np.exp(-pair.params.alpha * pair.T) * pair.X.values[-1])


def xi_infty_mean_var(params: ModelParams) -> tuple[float, float]:
    """Mean and variance of the a.s. limit of ``e^{-alpha t} X_t``."""
    H, a = params.H, params.alpha
    mean = params.x0 + laplace_unit_integral(params.drift, a)
    var = params.sigma**2 * H * special.gamma(2 * H) / a ** (2 * H)
    return mean, var


def write_path_csv(pair: SimulatedPair, path) -> None:
    """Dump the pair as CSV with columns ``t, X, B``."""
    b = pair.B.values if pair.B is not None else np.full(pair.X.values.size, np.nan)
    data = np.column_stack([pair.X.times, pair.X.values, b])
    np.savetxt(path, data, delimiter=",", header="t,X,B", comments="", fmt="%.17g")
