"""Grid approximations of the path integrals that enter the estimator.

Integrals against a path (``dX``, ``dB``) are Riemann-Stieltjes sums; for
H > 1/2 they converge to the Young integral whichever evaluation point is
used. The estimator uses the endpoint-average (trapezoidal) rule because
the left-point rule carries an O(dt) bias proportional to the exponentially
growing path, see :func:`rs_integral`. ``int X^2 dt`` uses composite Simpson,
see :func:`integral_X_sq_dt`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .basis import PeriodicBasis
from .fbm import SamplePath

LEFT = "left_riemann_stieltjes"
TRAPEZOID = "trapezoid"
EXACT = "exact_identity"
RULES = (LEFT, TRAPEZOID, EXACT)

# rule used for every path integral of the estimator
STIELTJES_RULE = TRAPEZOID


@dataclass(frozen=True)
class IntegralReport:
    value: float
    rule: str
    n_nodes: int

    def __float__(self):
        return self.value


def rs_integral(f_values, path: SamplePath, rule: str = LEFT) -> IntegralReport:
    """Riemann-Stieltjes sum of ``f`` against the increments of ``path``.

    ``rule="left_riemann_stieltjes"`` evaluates ``f`` at the left node of
    each step; ``rule="trapezoid"`` uses the average of both nodes.
    """
    f = np.asarray(f_values, dtype=float)
    x = path.values
    if f.shape != x.shape:
        raise ValueError(f"integrand has {f.size} nodes but the path has {x.size}")
    dx = np.diff(x)
    if rule == LEFT:
        value = float(np.dot(f[:-1], dx))
    elif rule == TRAPEZOID:
        value = float(np.dot(0.5 * (f[:-1] + f[1:]), dx))
    else:
        raise ValueError(f"unknown Riemann-Stieltjes rule {rule!r}")
    return IntegralReport(value, rule, x.size)


def trapezoid_dt(values, dt: float) -> float:
    v = np.asarray(values, dtype=float)
    return float(dt * (v[1:-1].sum() + 0.5 * (v[0] + v[-1])))


def _phi(basis: PeriodicBasis, i: int, path: SamplePath) -> np.ndarray:
    if not 0 <= i < basis.p:
        raise IndexError(f"basis index {i} out of range for p={basis.p}")
    return basis.function(i)(path.times)


def integral_phi_dX(basis: PeriodicBasis, i: int, X: SamplePath, rule: str = STIELTJES_RULE) -> float:
    """``int_0^T phi_i(t) dX_t`` (``i`` is 0-based)."""
    return rs_integral(_phi(basis, i, X), X, rule).value


def integral_phi_dB(basis: PeriodicBasis, i: int, B: SamplePath, rule: str = STIELTJES_RULE) -> float:
    """``int_0^T phi_i(t) dB^H_t`` (``i`` is 0-based)."""
    return rs_integral(_phi(basis, i, B), B, rule).value


def integral_X_dX(X: SamplePath) -> float:
    """``int_0^T X dX = (X_T^2 - X_0^2) / 2`` by the Young chain rule.

    This equals the trapezoidal Riemann-Stieltjes sum of X against itself.
    """
    x = X.values
    return 0.5 * (x[-1] ** 2 - x[0] ** 2)


def integral_phi_X_dt(basis: PeriodicBasis, i: int, X: SamplePath) -> float:
    return trapezoid_dt(_phi(basis, i, X) * X.values, X.dt)


def integral_X_sq_dt(X: SamplePath) -> float:
    """``int_0^T X^2 dt`` by composite Simpson.

    The trapezoid rule overestimates the ``e^{2 alpha t}`` trend by a relative
    ``(alpha dt)^2 / 3``; after the ``e^{alpha T}`` scaling of the alpha error
    that is a visible shift (about 0.05 at alpha T = 10, 4096 steps).
    """
    return float(simpson(X.values**2, dx=X.dt))


def basis_integrals(basis: PeriodicBasis, X: SamplePath, rule: str = STIELTJES_RULE):
    """All basis functionals at once.

    Returns:
        ``(int phi_i dX, int phi_i X dt)`` as two arrays of length p.
    """
    phi = basis(X.times)
    x = X.values
    dx = np.diff(x)
    if rule == LEFT:
        d_int = phi[:, :-1] @ dx
    elif rule == TRAPEZOID:
        d_int = 0.5 * (phi[:, :-1] + phi[:, 1:]) @ dx
    else:
        raise ValueError(f"unknown Riemann-Stieltjes rule {rule!r}")
    w = np.full(x.size, X.dt)
    w[0] = w[-1] = 0.5 * X.dt
    return d_int, phi @ (w * x)
