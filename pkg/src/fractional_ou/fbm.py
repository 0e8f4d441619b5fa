"""Exact sampling of fractional Brownian motion on uniform grids.

Increments (fractional Gaussian noise) are drawn by circulant embedding of
their Toeplitz covariance. If the embedding has a genuinely negative
eigenvalue the sampler falls back to a Cholesky factorisation of the exact
covariance instead of clamping the spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg, special

# Relative threshold below which a negative embedding eigenvalue is
# treated as rounding noise.
NEGATIVE_EIGENVALUE_TOL = 1e-12

_UINT64_MAX = (1 << 64) - 1


class FbmGenerationError(RuntimeError):
    """The fGn covariance could not be factorised."""


@dataclass(frozen=True)
class Seed:
    """Replication seed: a master key plus a stream (replication) index.

    The pair is used as the key of a counter-based Philox generator, so the
    variates are a pure function of ``(master, stream)``.
    """

    master: int
    stream: int = 0

    def __post_init__(self):
        for name in ("master", "stream"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _UINT64_MAX:
                raise ValueError(f"seed {name} must be an unsigned 64-bit integer, got {v}")

    def generator(self) -> np.random.Generator:
        key = np.array([self.master, self.stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def standard_normals(self, size: int) -> np.ndarray:
        """Standard normal variates by inverse-CDF transform of 53-bit uniforms."""
        bits = self.generator().integers(0, 1 << 53, size=size, dtype=np.int64)
        u = (bits + 0.5) / float(1 << 53)
        return special.ndtri(u)


@dataclass(frozen=True)
class SamplePath:
    """Values of a process on the uniform grid ``t0 + k*dt``."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("a sample path needs at least two grid nodes")
        if not self.dt > 0:
            raise ValueError(f"grid step must be positive, got {self.dt}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def horizon(self) -> float:
        return self.t0 + self.dt * self.n_steps

    def same_grid(self, other: "SamplePath", rtol: float = 1e-12) -> bool:
        return (
            self.values.size == other.values.size
            and abs(self.t0 - other.t0) <= rtol * max(1.0, abs(self.t0))
            and abs(self.dt - other.dt) <= rtol * self.dt
        )


def _check_hurst(H: float) -> None:
    if not 0.0 < H < 1.0:
        raise ValueError(f"Hurst index must lie in (0, 1), got {H}")


def fbm_covariance(t, s, H: float):
    """Covariance ``E[B_t B_s] = (t^2H + s^2H - |t-s|^2H) / 2``."""
    _check_hurst(H)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(s < 0):
        raise ValueError("fBm covariance is defined for nonnegative times only")
    h2 = 2.0 * H
    out = 0.5 * (t**h2 + s**h2 - np.abs(t - s) ** h2)
    return float(out) if out.ndim == 0 else out


def fgn_autocovariance(n_lags: int, dt: float, H: float) -> np.ndarray:
    """Autocovariance of fGn increments at lags ``0..n_lags``."""
    k = np.arange(n_lags + 1, dtype=float)
    h2 = 2.0 * H
    return 0.5 * dt**h2 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


def fgn_spectrum(n_steps: int, dt: float, H: float) -> np.ndarray:
    """Eigenvalues of the circulant embedding of the fGn covariance.

    The embedding has size ``2*n_steps`` with first row
    ``gamma(0), ..., gamma(n), gamma(n-1), ..., gamma(1)``. Negative
    eigenvalues are returned as computed.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if not dt > 0:
        raise ValueError("dt must be positive")
    _check_hurst(H)
    return _spectrum_cached(int(n_steps), float(dt), float(H)).copy()


@lru_cache(maxsize=64)
def _spectrum_cached(n_steps: int, dt: float, H: float) -> np.ndarray:
    gamma = fgn_autocovariance(n_steps, dt, H)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    eig = np.fft.fft(row).real
    eig.setflags(write=False)
    return eig


@lru_cache(maxsize=16)
def _cholesky_cached(n_steps: int, dt: float, H: float) -> np.ndarray:
    cov = linalg.toeplitz(fgn_autocovariance(n_steps - 1, dt, H))
    try:
        factor = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise FbmGenerationError(
            f"fGn covariance is not positive definite (n={n_steps}, dt={dt}, H={H}): {exc}"
        ) from exc
    factor.setflags(write=False)
    return factor


def embedding_is_valid(eig: np.ndarray) -> bool:
    return eig.min() >= -NEGATIVE_EIGENVALUE_TOL * eig.max()


def sample_fgn(n_steps: int, dt: float, H: float, seed: Seed, method: str = "auto") -> np.ndarray:
    """Fractional Gaussian noise: ``n_steps`` increments of fBm on step ``dt``.

    Args:
        method: ``"auto"`` (circulant embedding, Cholesky if the embedding
            fails), ``"circulant"`` or ``"cholesky"``.
    """
    if method not in ("auto", "circulant", "cholesky"):
        raise ValueError(f"unknown fGn method {method!r}")
    if method != "cholesky":
        eig = fgn_spectrum(n_steps, dt, H)
        if embedding_is_valid(eig):
            m = eig.size
            z = seed.standard_normals(2 * m)
            w = np.sqrt(np.clip(eig, 0.0, None) / m) * (z[:m] + 1j * z[m:])
            return np.fft.fft(w).real[:n_steps]
        if method == "circulant":
            raise FbmGenerationError(
                f"circulant embedding has eigenvalue {eig.min():.3e} "
                f"below tolerance (max {eig.max():.3e})"
            )
    factor = _cholesky_cached(int(n_steps), float(dt), float(H))
    return factor @ seed.standard_normals(n_steps)


def sample_fbm(n_steps: int, dt: float, H: float, seed: Seed, method: str = "auto") -> SamplePath:
    """Sample ``B^H`` at ``0, dt, ..., n_steps*dt``; ``values[0] == 0``."""
    increments = sample_fgn(n_steps, dt, H, seed, method=method)
    return SamplePath(0.0, dt, np.concatenate([[0.0], np.cumsum(increments)]))
