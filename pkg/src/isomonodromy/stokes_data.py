"""Combinatorics and algebra of Stokes data at a single pole.

Indices of the exponential factors ``q_0 .. q_{n-1}`` are zero-based throughout.
A root ``(i, j)`` of a direction ``d`` means ``q_i - q_j`` is negative real along
``d`` to leading order, so ``exp(q_i - q_j)`` decays fastest there.  A Stokes
factor at ``d`` is unipotent with off-diagonal support on the roots of ``d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .connection_model import FormalNormalForm
from .errors import BaseOnRay, DegenerateLeadingTerm, NotUnipotent, SupportViolation
from .matcore import mat_exp

__all__ = [
    "AntiStokesSet",
    "StokesFactor",
    "StokesMatrices",
    "anti_stokes",
    "half_period_order",
    "labelled_directions",
    "compose_factors",
    "factor_unipotent",
    "local_monodromy",
    "torus_act",
    "support_mask",
]

ANGLE_TOL = 1e-10
TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class AntiStokesSet:
    """Anti-Stokes directions in ``[0, 2 pi)`` with their roots."""

    order: int
    rank: int
    directions: tuple[float, ...]
    roots: tuple[tuple[tuple[int, int], ...], ...]
    near_merges: tuple[tuple[int, int], ...] = ()

    @property
    def count(self) -> int:
        return len(self.directions)

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(len(r) for r in self.roots)

    @property
    def half_period_length(self) -> int:
        if self.count == 0:
            return 0
        return self.count // (2 * self.order - 2)

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "directions": list(self.directions),
            "roots": [[list(r) for r in rs] for rs in self.roots],
            "multiplicities": list(self.multiplicities),
            "near_merges": [list(p) for p in self.near_merges],
        }


@dataclass(frozen=True)
class StokesFactor:
    direction: int
    K: np.ndarray
    roots: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class StokesMatrices:
    """Stokes matrices ``S_1..S_{2k-2}``, the permutation ``P`` and ``Lambda'``."""

    S: tuple[np.ndarray, ...]
    P: np.ndarray
    exponent: np.ndarray  # diagonal of Lambda' = P^-1 Lambda P
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def Lambda_prime(self) -> np.ndarray:
        return np.diag(self.exponent)

    def product(self) -> np.ndarray:
        """``S_{2k-2} ... S_2 S_1``."""
        n = len(self.exponent)
        out = np.eye(n, dtype=complex)
        for s in self.S:
            out = s @ out
        return out


def anti_stokes(nf: FormalNormalForm, angle_tol: float = ANGLE_TOL,
                near_tol: float = 1e-6) -> AntiStokesSet:
    """Anti-Stokes directions and their roots for a normal form of order ``k``.

    For ``k = 1`` (and for rank one) the set is empty by convention.
    """
    k, n = nf.order, nf.rank
    if k < 2 or n < 2:
        return AntiStokesSet(k, n, (), ())
    lead = nf.leading_q()
    scale = max(np.abs(lead).max(), 1e-300)
    raw: list[tuple[float, tuple[int, int]]] = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            c = lead[i] - lead[j]
            if abs(c) <= 1e-12 * scale:
                raise DegenerateLeadingTerm(f"q_{i} - q_{j} has zero leading coefficient")
            for m in range(k - 1):
                theta = (np.angle(c) - np.pi + TWO_PI * m) / (k - 1)
                raw.append((float(np.mod(theta, TWO_PI)), (i, j)))
    raw.sort()
    directions: list[float] = []
    roots: list[list[tuple[int, int]]] = []
    for theta, pair in raw:
        if directions and abs(theta - directions[-1]) <= angle_tol:
            roots[-1].append(pair)
        else:
            directions.append(theta)
            roots.append([pair])
    # wrap-around merge between the last direction and 2 pi + the first
    if len(directions) > 1 and directions[0] + TWO_PI - directions[-1] <= angle_tol:
        roots[0].extend(roots.pop())
        directions.pop()
    near = []
    count = len(directions)
    for a in range(count):
        b = (a + 1) % count
        gap = np.mod(directions[b] - directions[a], TWO_PI)
        if count > 1 and gap <= near_tol:
            near.append((a, b))
    return AntiStokesSet(
        k, n, tuple(directions), tuple(tuple(sorted(r)) for r in roots), tuple(near)
    )


def labelled_directions(aset: AntiStokesSet, base_angle: float,
                        angle_tol: float = ANGLE_TOL) -> list[int]:
    """Direction indices ``d_1, ..., d_r`` starting from the first ray met when
    turning positively from ``base_angle``."""
    if aset.count == 0:
        return []
    dirs = np.asarray(aset.directions)
    offsets = np.mod(dirs - base_angle, TWO_PI)
    dist = np.minimum(offsets, TWO_PI - offsets)
    if dist.min() <= angle_tol:
        raise BaseOnRay(f"base angle {base_angle} lies on an anti-Stokes ray")
    start = int(np.argmin(offsets))
    return [(start + s) % aset.count for s in range(aset.count)]


def half_period_order(aset: AntiStokesSet, base_angle: float,
                      angle_tol: float = ANGLE_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Dominance order of the ``q_i`` on the half-period after ``base_angle``.

    Returns ``(pi, P)`` where ``pi[i]`` is the position of ``q_i`` in increasing
    order and ``P[i, pi[i]] = 1``, so ``P^-1 K P`` is upper triangular for every
    Stokes factor ``K`` of the half-period.
    """
    n = aset.rank
    if aset.count == 0:
        return np.arange(n), np.eye(n, dtype=complex)
    labels = labelled_directions(aset, base_angle, angle_tol)
    l = aset.half_period_length
    less = np.zeros((n, n), dtype=bool)
    for d in labels[:l]:
        for i, j in aset.roots[d]:
            less[i, j] = True
    below = less.sum(axis=0)  # number of q_j below q_i (column sums of less[j, i])
    pi = np.array([int(below[i]) for i in range(n)])
    if sorted(pi.tolist()) != list(range(n)):
        raise DegenerateLeadingTerm("roots of the half-period do not form a total order")
    P = np.zeros((n, n), dtype=complex)
    P[np.arange(n), pi] = 1.0
    return pi, P


def support_mask(roots, n: int) -> np.ndarray:
    """Boolean mask of entries allowed to differ from the identity."""
    mask = np.zeros((n, n), dtype=bool)
    for i, j in roots:
        mask[i, j] = True
    return mask


def _check_support(K: np.ndarray, roots, tol: float) -> None:
    n = K.shape[0]
    dev = K - np.eye(n)
    dev[support_mask(roots, n)] = 0
    if np.abs(dev).max(initial=0.0) > tol * max(1.0, np.abs(K).max()):
        raise SupportViolation("Stokes factor has entries off its root set")


def compose_factors(factors: list[StokesFactor], P, tol: float = 1e-12) -> np.ndarray:
    """``K_l ... K_2 K_1`` for the factors of one half-period (``K_1`` first in the list)."""
    P = np.asarray(P, dtype=complex)
    n = P.shape[0]
    out = np.eye(n, dtype=complex)
    for f in factors:
        if f.roots or n > 1:
            _check_support(np.asarray(f.K), f.roots, tol)
        out = np.asarray(f.K) @ out
    U = P.T @ out @ P
    scale = max(1.0, np.abs(U).max())
    if np.abs(np.tril(U, -1)).max(initial=0.0) > 1e-10 * scale or \
            np.abs(np.diag(U) - 1).max(initial=0.0) > 1e-10 * scale:
        raise NotUnipotent("product is not in P U_+ P^-1")
    return out


def factor_unipotent(U, aset: AntiStokesSet, half_period: list[int], P) -> list[StokesFactor]:
    """Unique factorization ``U = K_l ... K_1`` with ``K_s`` in the Stokes group of
    ``half_period[s]``.

    Entries are peeled by height in the dominance order: the height-``h`` part of
    a product is the sum of the factors' height-``h`` entries plus terms built
    from lower heights only.
    """
    U = np.asarray(U, dtype=complex)
    P = np.asarray(P, dtype=complex)
    n = U.shape[0]
    pi = np.argmax(P.real, axis=1)
    Up = P.T @ U @ P
    scale = max(1.0, np.abs(Up).max())
    if np.abs(np.tril(Up, -1)).max(initial=0.0) > 1e-10 * scale or \
            np.abs(np.diag(Up) - 1).max(initial=0.0) > 1e-10 * scale:
        raise NotUnipotent("P^-1 U P is not unipotent upper triangular")
    owner: dict[tuple[int, int], int] = {}
    for s, d in enumerate(half_period):
        for root in aset.roots[d]:
            owner[root] = s
    Ks = [np.eye(n, dtype=complex) for _ in half_period]
    by_height: dict[int, list[tuple[int, int]]] = {}
    for (i, j) in owner:
        by_height.setdefault(int(pi[j] - pi[i]), []).append((i, j))
    for h in sorted(by_height):
        prod = np.eye(n, dtype=complex)
        for K in Ks:
            prod = K @ prod
        for (i, j) in by_height[h]:
            Ks[owner[(i, j)]][i, j] = U[i, j] - prod[i, j]
    return [StokesFactor(d, K, aset.roots[d]) for d, K in zip(half_period, Ks)]


def local_monodromy(sm: StokesMatrices) -> np.ndarray:
    """``P S_{2k-2} ... S_1 P^-1 M_0`` with ``M_0 = exp(2 pi i P Lambda' P^-1)``."""
    P = sm.P
    Pinv = P.T
    M0 = mat_exp(2j * np.pi * P @ sm.Lambda_prime @ Pinv)
    return P @ sm.product() @ Pinv @ M0


def torus_act(t, sm: StokesMatrices) -> StokesMatrices:
    """Conjugate every Stokes matrix by the diagonal matrix ``t``."""
    t = np.asarray(t, dtype=complex)
    if t.ndim == 1:
        t = np.diag(t)
    tinv = np.diag(1.0 / np.diag(t))
    return StokesMatrices(tuple(t @ s @ tinv for s in sm.S), sm.P.copy(), sm.exponent.copy(),
                          dict(sm.diagnostics))
