"""Dense complex matrix kernels and an adaptive integrator for linear matrix ODEs.

The integrator transports a fundamental matrix ``Y`` along a polyline in the
complex plane, solving ``dY/dz = coeff(z) Y``.  It uses the Dormand-Prince 8(5,3)
embedded pair (tableau taken from :class:`scipy.integrate.DOP853`) with error
control measured column by column, relative to each column's own size.  Each
column is an independent solution, and near an irregular singularity their
magnitudes can differ by many orders of magnitude, so a single absolute or
componentwise tolerance would sacrifice the small ones.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.integrate import DOP853

from .errors import EigenvalueCollision, ResonantShift, StepUnderflow

__all__ = [
    "eig_distinct",
    "mat_exp",
    "solve_ad_shift",
    "integrate_linear",
    "PolylinePath",
    "circle_path",
]

PolylinePath = Sequence[complex]


def eig_distinct(M, gap_tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a matrix whose eigenvalues must be pairwise distinct.

    Eigenvalues are sorted lexicographically by (real, imaginary) part so that
    every downstream ordering is deterministic.  Returns ``(values, V)`` with
    ``M = V diag(values) V^-1``.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("eig_distinct expects a square matrix")
    scale = np.linalg.norm(M)
    if gap_tol is None:
        gap_tol = 1e-8 * scale
    vals, vecs = np.linalg.eig(M)
    order = np.lexsort((vals.imag, vals.real))
    vals, vecs = vals[order], vecs[:, order]
    n = len(vals)
    if n > 1:
        gaps = np.abs(vals[:, None] - vals[None, :]) + np.diag(np.full(n, np.inf))
        if gaps.min() <= gap_tol:
            raise EigenvalueCollision(
                f"eigenvalue gap {gaps.min():.3e} is below {gap_tol:.3e}"
            )
    return vals, vecs


def mat_exp(M) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade approximation)."""
    return scipy.linalg.expm(np.asarray(M, dtype=complex))


def solve_ad_shift(D, B, s: complex = 0.0, tol: float = 1e-12) -> np.ndarray:
    """Solve ``[D, X] + s X = B`` for diagonal ``D``.

    Entrywise ``X_ab = B_ab / (d_a - d_b + s)``.  Entries where ``B`` vanishes are
    left at zero whatever the denominator.
    """
    D = np.asarray(D, dtype=complex)
    B = np.asarray(B, dtype=complex)
    d = np.diag(D) if D.ndim == 2 else D
    denom = d[:, None] - d[None, :] + s
    needed = B != 0
    bad = needed & (np.abs(denom) < tol)
    if bad.any():
        a, b = np.argwhere(bad)[0]
        raise ResonantShift(f"denominator d_{a} - d_{b} + s vanishes")
    X = np.zeros_like(B)
    X[needed] = B[needed] / denom[needed]
    return X


_A = DOP853.A
_B = DOP853.B
_C = DOP853.C
_E3 = DOP853.E3
_E5 = DOP853.E5
_STAGES = DOP853.n_stages
_ROUNDOFF = 32 * np.finfo(float).eps


def _column_error(K: np.ndarray, h: float, Y: np.ndarray, Ynew: np.ndarray) -> float:
    flat = K.reshape(K.shape[0], -1)
    err5 = (_E5 @ flat).reshape(Y.shape)
    err3 = (_E3 @ flat).reshape(Y.shape)
    e5 = np.sum(np.abs(err5) ** 2, axis=0)
    e3 = np.sum(np.abs(err3) ** 2, axis=0)
    denom = e5 + 0.01 * e3
    est = np.where(denom > 0, abs(h) * e5 / np.sqrt(np.where(denom > 0, denom, 1.0)), 0.0)
    scale = np.maximum(np.linalg.norm(Y, axis=0), np.linalg.norm(Ynew, axis=0))
    scale = np.where(scale > 0, scale, 1.0)
    return float(np.max(est / scale))


def _segment(coeff, z0: complex, z1: complex, Y: np.ndarray, tol: float,
             max_steps: int) -> np.ndarray:
    dz = z1 - z0
    length = abs(dz)

    def f(s: float, y: np.ndarray) -> np.ndarray:
        return (coeff(z0 + s * dz) @ y) * dz

    s = 0.0
    K = np.empty((_STAGES + 1,) + Y.shape, dtype=complex)
    flat = K.reshape(_STAGES + 1, -1)
    K[0] = f(0.0, Y)
    rate = np.linalg.norm(K[0]) / max(np.linalg.norm(Y), 1e-300)
    h = min(1.0, 0.1 / rate) if rate > 0 else 1.0
    steps = 0
    while s < 1.0:
        if steps > max_steps:
            raise StepUnderflow(f"more than {max_steps} steps on a path segment")
        h = min(h, 1.0 - s)
        if h < 1e-13:
            raise StepUnderflow(f"step size underflow near z = {z0 + s * dz}")
        for i in range(1, _STAGES):
            dy = (_A[i, :i] @ flat[:i]).reshape(Y.shape) * h
            K[i] = f(s + _C[i] * h, Y + dy)
        Ynew = Y + h * (_B @ flat[:_STAGES]).reshape(Y.shape)
        K[_STAGES] = f(s + h, Ynew)
        err = _column_error(K, h, Y, Ynew)
        # local error per unit arclength, floored at roundoff level so that steps
        # forced small by stiffness are not rejected for rounding noise
        allowed = max(tol * h * max(length, 1e-300), _ROUNDOFF)
        steps += 1
        if err <= allowed:
            s += h
            Y = Ynew
            K[0] = K[_STAGES]
            ratio = 10.0 if err == 0 else min(10.0, max(0.2, 0.9 * (allowed / err) ** (1 / 8)))
            h *= ratio
        else:
            h *= max(0.2, 0.9 * (allowed / err) ** (1 / 8))
    return Y


def integrate_linear(
    coeff: Callable[[complex], np.ndarray],
    path: PolylinePath,
    frame0,
    tol: float = 1e-10,
    max_steps: int = 200_000,
) -> np.ndarray:
    """Transport ``frame0`` along ``path`` under ``dY/dz = coeff(z) Y``.

    ``path`` is a sequence of at least two complex vertices.  The local error per
    unit arclength is kept below ``tol`` relative to each column's size.
    """
    vertices = np.asarray(path, dtype=complex)
    if vertices.ndim != 1 or len(vertices) < 2:
        raise ValueError("a polyline path needs at least two vertices")
    Y = np.array(frame0, dtype=complex)
    for z0, z1 in zip(vertices[:-1], vertices[1:]):
        if z0 == z1:
            raise ValueError("consecutive path vertices must be distinct")
        Y = _segment(coeff, complex(z0), complex(z1), Y, tol, max_steps)
    return Y


def circle_path(center: complex, radius: float, start_angle: float, sweep: float,
                pieces_per_turn: int = 64) -> np.ndarray:
    """Polyline approximation of a circular arc, homotopic to the arc itself."""
    count = max(2, int(np.ceil(abs(sweep) / (2 * np.pi) * pieces_per_turn)))
    angles = start_angle + np.linspace(0.0, sweep, count + 1)
    return center + radius * np.exp(1j * angles)
