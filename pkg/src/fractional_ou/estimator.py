"""Least-squares drift estimator ``theta_hat = Q^{-1} P``.

With ``theta = (mu_1, ..., mu_p, alpha)`` the normal equations read

    P = (int phi_1 dX, ..., int phi_p dX, int X dX),
    Q = [[T I_p, a], [a^T, b]],  a_i = int phi_i X dt,  b = int X^2 dt,

and Q is inverted in closed form through the Schur complement
``D = (1/T) int X^2 dt - |Lambda|^2`` with ``Lambda = a / T``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .basis import PeriodicBasis
from .integrals import STIELTJES_RULE, basis_integrals, integral_phi_dB, integral_X_dX, integral_X_sq_dt
from .model import ModelParams, SimulatedPair, require_long_memory

SINGULARITY_RTOL = 1e-12


class SingularQError(ArithmeticError):
    """Schur complement D is not safely positive; the estimate is refused."""

    def __init__(self, D: float, mean_sq: float):
        self.D = D
        self.mean_sq = mean_sq
        super().__init__(
            f"Q is singular: D = {D:.6g} <= {SINGULARITY_RTOL:g} * mean_sq (mean_sq = {mean_sq:.6g})"
        )


@dataclass(frozen=True)
class EstimatorInputs:
    P: np.ndarray
    Lambda: np.ndarray
    mean_sq: float
    n: float

    @property
    def p(self) -> int:
        return self.Lambda.size

    @property
    def D(self) -> float:
        return float(self.mean_sq - self.Lambda @ self.Lambda)

    def Q(self) -> np.ndarray:
        p, n = self.p, self.n
        q = np.empty((p + 1, p + 1))
        q[:p, :p] = n * np.eye(p)
        q[:p, p] = q[p, :p] = n * self.Lambda
        q[p, p] = n * self.mean_sq
        return q


@dataclass(frozen=True)
class EstimateResult:
    theta_hat: np.ndarray
    D: float
    gamma: float
    Lambda: np.ndarray
    n: float
    Q_inv: np.ndarray
    inputs: EstimatorInputs

    @property
    def mu_hat(self) -> np.ndarray:
        return self.theta_hat[:-1]

    @property
    def alpha_hat(self) -> float:
        return float(self.theta_hat[-1])

    @property
    def condition_proxy(self) -> float:
        return self.gamma * self.n

    def to_dict(self) -> dict:
        return {
            "theta_hat": [float(v) for v in self.theta_hat],
            "D": self.D,
            "gamma": self.gamma,
            "Lambda": [float(v) for v in self.Lambda],
            "n": self.n,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass(frozen=True)
class ErrorDecomposition:
    """Error terms of ``theta_hat - theta``.

    ``R`` is the discrete noise vector ``(P - Q theta) / sigma``, so the
    reconstruction identities hold up to linear-algebra roundoff.
    ``R_direct`` holds ``int phi_i dB`` summed directly against the retained
    driver; ``R[:p] - R_direct`` is the quadrature residual of the grid.
    """

    M1: np.ndarray
    M2: np.ndarray
    M3: np.ndarray
    A1: np.ndarray
    A2: float
    R: np.ndarray
    R_direct: np.ndarray
    sigma: float

    def mu_error(self) -> np.ndarray:
        return self.sigma * (self.M1 + self.M2.sum(axis=1) - self.M3)

    def alpha_error(self) -> float:
        return float(-self.sigma * (self.A1.sum() - self.A2))

    @property
    def quadrature_residual(self) -> np.ndarray:
        return self.R[:-1] - self.R_direct


def assemble_inputs(pair: SimulatedPair, basis: PeriodicBasis, rule: str = STIELTJES_RULE) -> EstimatorInputs:
    X = pair.X
    n = X.horizon - X.t0
    if basis is None or basis.p == 0:
        d_int = np.zeros(0)
        x_int = np.zeros(0)
    else:
        d_int, x_int = basis_integrals(basis, X, rule)
    P = np.concatenate([d_int, [integral_X_dX(X)]])
    return EstimatorInputs(P=P, Lambda=x_int / n, mean_sq=integral_X_sq_dt(X) / n, n=n)


def _check_invertible(inputs: EstimatorInputs) -> float:
    D = inputs.D
    if not D > SINGULARITY_RTOL * inputs.mean_sq or not np.isfinite(D):
        raise SingularQError(D, inputs.mean_sq)
    return D


def invert_Q(inputs: EstimatorInputs) -> np.ndarray:
    """Closed-form block inverse of Q."""
    D = _check_invertible(inputs)
    gamma = 1.0 / D
    lam = inputs.Lambda
    p = lam.size
    inv = np.empty((p + 1, p + 1))
    inv[:p, :p] = np.eye(p) + gamma * np.outer(lam, lam)
    inv[:p, p] = inv[p, :p] = -gamma * lam
    inv[p, p] = gamma
    return inv / inputs.n


def estimate_from_inputs(inputs: EstimatorInputs) -> EstimateResult:
    q_inv = invert_Q(inputs)
    D = inputs.D
    return EstimateResult(
        theta_hat=q_inv @ inputs.P,
        D=D,
        gamma=1.0 / D,
        Lambda=inputs.Lambda,
        n=inputs.n,
        Q_inv=q_inv,
        inputs=inputs,
    )


def estimate(pair: SimulatedPair, basis: PeriodicBasis | None = None) -> EstimateResult:
    """Least-squares estimate of ``(mu_1, ..., mu_p, alpha)`` from one path."""
    require_long_memory(pair.params.H)
    basis = pair.params.basis if basis is None else basis
    return estimate_from_inputs(assemble_inputs(pair, basis))


def decompose_error(
    pair: SimulatedPair,
    basis: PeriodicBasis | None = None,
    true_params: ModelParams | None = None,
    result: EstimateResult | None = None,
) -> ErrorDecomposition:
    if pair.B is None:
        raise ValueError("error decomposition needs the driving fBm path")
    params = pair.params if true_params is None else true_params
    basis = params.basis if basis is None else basis
    if result is None:
        result = estimate(pair, basis)
    inputs = result.inputs
    theta = params.theta
    R = (inputs.P - inputs.Q() @ theta) / params.sigma
    R_direct = np.array([integral_phi_dB(basis, i, pair.B) for i in range(basis.p)])
    n, g, lam = inputs.n, result.gamma, inputs.Lambda
    r_phi, r_x = R[:-1], R[-1]
    return ErrorDecomposition(
        M1=r_phi / n,
        M2=g * np.outer(lam, lam) * r_phi[None, :] / n,
        M3=g * lam * r_x / n,
        A1=g * lam * r_phi / n,
        A2=float(g * r_x / n),
        R=R,
        R_direct=R_direct,
        sigma=params.sigma,
    )
