"""Riemann zeta for real s > 1 and generalised binomial coefficients."""

from __future__ import annotations

import math

import numpy as np

# Bernoulli numbers B_2, B_4, ..., B_24
_BERNOULLI_EVEN = (
    1 / 6,
    -1 / 30,
    1 / 42,
    -1 / 30,
    5 / 66,
    -691 / 2730,
    7 / 6,
    -3617 / 510,
    43867 / 798,
    -174611 / 330,
    854513 / 138,
    -236364091 / 2730,
)
_EM_CUTOFF = 16


def zeta(s: float) -> float:
    """Riemann zeta of a real argument ``s > 1`` by Euler-Maclaurin summation.

    Sums ``k^-s`` for ``k < N`` explicitly, then adds the integral tail, the
    endpoint half term and twelve Bernoulli corrections at ``N = 16``. The
    truncation error is below 1e-15 relative for s in (1, 200].
    """
    s = float(s)
    if not s > 1.0:
        raise ValueError(f"zeta is evaluated for s > 1 only, got {s}")
    N = _EM_CUTOFF
    k = np.arange(1, N, dtype=float)
    head = float(np.sum(k**-s))
    tail = N ** (1.0 - s) / (s - 1.0) + 0.5 * N**-s
    rising = s  # s (s+1) ... (s+2j-2)
    power = N ** (-s - 1.0)
    fact = 2.0  # (2j)!
    for j, b in enumerate(_BERNOULLI_EVEN, start=1):
        term = b / fact * rising * power
        tail += term
        rising *= (s + 2 * j - 1) * (s + 2 * j)
        power /= N * N
        fact *= (2 * j + 1) * (2 * j + 2)
    return head + tail


def binomial_series(a: float, kmax: int) -> np.ndarray:
    """``binom(a, k)`` for ``k = 0..kmax`` and real ``a``.

    Uses the falling-factorial recurrence in log space with explicit sign
    tracking, so large ``k`` neither overflows nor underflows prematurely.
    """
    out = np.empty(kmax + 1)
    out[0] = 1.0
    log_mag, sign = 0.0, 1.0
    for k in range(1, kmax + 1):
        factor = a - (k - 1)
        if factor == 0.0:
            out[k:] = 0.0
            break
        log_mag += math.log(abs(factor)) - math.log(k)
        sign *= math.copysign(1.0, factor)
        out[k] = sign * math.exp(log_mag)
    return out
