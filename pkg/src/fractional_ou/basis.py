"""Bounded 1-periodic orthonormal bases and the periodic drift ``L``."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate

UNIT_QUAD_NODES = 2**14
ORTHONORMALITY_TOL = 1e-8


class BasisError(ValueError):
    """Malformed or non-orthonormal basis."""


def unit_trapezoid(values: np.ndarray) -> np.ndarray:
    """Composite trapezoid over [0, 1] along the last axis (uniform nodes)."""
    values = np.asarray(values, dtype=float)
    h = 1.0 / (values.shape[-1] - 1)
    return h * (values[..., 1:-1].sum(axis=-1) + 0.5 * (values[..., 0] + values[..., -1]))


@dataclass(frozen=True)
class PeriodicBasis:
    """Functions ``phi_1..phi_p`` on [0, 1], extended 1-periodically.

    Build with :func:`fourier_basis` or :func:`custom_basis`; do not
    instantiate directly.
    """

    kind: str
    p: int
    order: int | None = None
    nodes: np.ndarray | None = field(default=None, repr=False)
    table: np.ndarray | None = field(default=None, repr=False)
    labels: tuple[str, ...] = ()

    def __call__(self, t) -> np.ndarray:
        """Evaluate all functions; returns shape ``(p,) + shape(t)``."""
        t = np.asarray(t, dtype=float)
        r = np.mod(t, 1.0)
        if self.kind == "fourier":
            out = np.empty((self.p,) + r.shape)
            out[0] = 1.0
            for k in range(1, self.order + 1):
                arg = 2.0 * np.pi * k * r
                out[2 * k - 1] = np.sqrt(2.0) * np.sin(arg)
                out[2 * k] = np.sqrt(2.0) * np.cos(arg)
            return out
        flat = r.ravel()
        out = np.stack([np.interp(flat, self.nodes, col) for col in self.table])
        return out.reshape((self.p,) + r.shape)

    def function(self, i: int):
        """The single function ``phi_i`` (0-based ``i``) as a vectorised callable."""
        if not 0 <= i < self.p:
            raise IndexError(f"basis index {i} out of range for p={self.p}")
        if self.kind == "fourier":
            if i == 0:
                return lambda t: np.ones_like(np.asarray(t, dtype=float))
            k = (i + 1) // 2
            trig = np.sin if i % 2 == 1 else np.cos
            return lambda t: np.sqrt(2.0) * trig(2.0 * np.pi * k * np.mod(t, 1.0))
        nodes, col = self.nodes, self.table[i]
        return lambda t: np.interp(np.mod(t, 1.0), nodes, col)

    @property
    def unit_integrals(self) -> np.ndarray:
        if self.kind == "fourier":
            out = np.zeros(self.p)
            out[0] = 1.0
            return out
        grid = np.linspace(0.0, 1.0, UNIT_QUAD_NODES + 1)
        return unit_trapezoid(self(grid))

    def zero_integral_mask(self, tol: float = ORTHONORMALITY_TOL) -> np.ndarray:
        return np.abs(self.unit_integrals) <= tol


def fourier_basis(order: int) -> PeriodicBasis:
    """``1, sqrt2 sin(2 pi t), sqrt2 cos(2 pi t), ..., sqrt2 cos(2 pi order t)``."""
    if order < 0:
        raise BasisError("Fourier order must be nonnegative")
    labels = ["1"]
    for k in range(1, order + 1):
        labels += [f"sqrt2*sin(2pi*{k}t)", f"sqrt2*cos(2pi*{k}t)"]
    return PeriodicBasis(kind="fourier", p=1 + 2 * order, order=order, labels=tuple(labels))


def custom_basis(nodes, values, validate: bool = True, tol: float = ORTHONORMALITY_TOL) -> PeriodicBasis:
    """Basis from values tabulated on a uniform grid of [0, 1].

    Args:
        nodes: strictly increasing uniform grid from 0 to 1.
        values: array ``(p, len(nodes))``; linear interpolation in between.
        validate: reject the basis unless it is orthonormal within ``tol``.
    """
    nodes = np.asarray(nodes, dtype=float)
    table = np.atleast_2d(np.asarray(values, dtype=float))
    if nodes.ndim != 1 or nodes.size < 2:
        raise BasisError("custom basis needs at least two grid nodes")
    if table.shape[1] != nodes.size:
        raise BasisError(f"table has {table.shape[1]} columns but {nodes.size} nodes")
    if abs(nodes[0]) > 1e-12 or abs(nodes[-1] - 1.0) > 1e-12:
        raise BasisError("custom basis grid must span [0, 1]")
    steps = np.diff(nodes)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.mean():
        raise BasisError("custom basis grid must be uniform and increasing")
    if not np.all(np.isfinite(table)):
        raise BasisError("custom basis values must be finite")
    nodes.setflags(write=False)
    table.setflags(write=False)
    basis = PeriodicBasis(
        kind="custom",
        p=table.shape[0],
        nodes=nodes,
        table=table,
        labels=tuple(f"custom{i + 1}" for i in range(table.shape[0])),
    )
    if validate:
        ok, dev = check_orthonormality(basis, tol)
        if not ok:
            raise BasisError(f"custom basis is not orthonormal: max |Gram - I| = {dev:.3e} > {tol:.1e}")
    return basis


def tabulate(funcs: Sequence, n_nodes: int = UNIT_QUAD_NODES + 1, validate: bool = True) -> PeriodicBasis:
    """Tabulate vectorised callables on a uniform grid and build a custom basis."""
    nodes = np.linspace(0.0, 1.0, n_nodes)
    return custom_basis(nodes, np.stack([np.broadcast_to(f(nodes), nodes.shape) for f in funcs]), validate=validate)


def load_basis_file(path: str | Path, validate: bool = True) -> PeriodicBasis:
    """Read a basis CSV: one row per node, columns ``t, phi_1, ..., phi_p``."""
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except ValueError as exc:
        # a header line is allowed
        try:
            data = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
        except ValueError:
            raise BasisError(f"cannot parse basis file {path}: {exc}") from exc
    if data.shape[1] < 2:
        raise BasisError("basis file needs a node column and at least one function column")
    return custom_basis(data[:, 0], data[:, 1:].T, validate=validate)


def gram_matrix(basis: PeriodicBasis, n_nodes: int = UNIT_QUAD_NODES) -> np.ndarray:
    grid = np.linspace(0.0, 1.0, n_nodes + 1)
    vals = basis(grid)
    return unit_trapezoid(vals[:, None, :] * vals[None, :, :])


def check_orthonormality(basis: PeriodicBasis, tol: float = ORTHONORMALITY_TOL) -> tuple[bool, float]:
    """Return ``(ok, max |Gram - I|)`` with the Gram matrix by 2^14-node trapezoid."""
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    dev = float(np.max(np.abs(gram_matrix(basis) - np.eye(basis.p))))
    return dev <= tol, dev


@dataclass(frozen=True)
class DriftFunction:
    """``L(t) = sum_i mu_i phi_i(t mod 1)``."""

    basis: PeriodicBasis
    mu: tuple[float, ...]

    def __post_init__(self):
        mu = tuple(float(m) for m in np.atleast_1d(self.mu))
        if len(mu) != self.basis.p:
            raise BasisError(f"expected {self.basis.p} coefficients, got {len(mu)}")
        object.__setattr__(self, "mu", mu)

    def __call__(self, t):
        return eval_drift(self, t)


def eval_drift(d: DriftFunction, t):
    vals = np.tensordot(np.asarray(d.mu), d.basis(t), axes=1)
    return float(vals) if np.ndim(vals) == 0 else vals


def laplace_unit_integral(d: DriftFunction, alpha: float) -> float:
    """``int_0^inf exp(-alpha s) L(s) ds`` via one period and a geometric sum."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not any(d.mu):
        return 0.0
    points = None
    if d.basis.kind == "custom":
        points = d.basis.nodes[1:-1] if d.basis.nodes.size <= 52 else None
    val, _ = integrate.quad(
        lambda s: np.exp(-alpha * s) * eval_drift(d, s),
        0.0,
        1.0,
        epsabs=1e-13,
        epsrel=1e-12,
        limit=500,
        points=points,
    )
    return val / -np.expm1(-alpha)
