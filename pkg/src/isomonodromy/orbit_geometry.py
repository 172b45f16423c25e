"""Symplectic geometry of extended coadjoint orbits of jet groups.

Conventions
-----------
* A jet ``X`` in ``gl_n(C[z]/z^k)`` is an array ``(k, n, n)`` holding ``X_0 .. X_{k-1}``
  (constant term first).  Jet group elements use the same layout.
* A dual element ``A = A_k dz/z^k + ... + A_1 dz/z`` is an array ``(k, n, n)`` with
  ``A_k`` first, the same layout as :class:`PrincipalPart` coefficients.
* The pairing is ``<A, X> = Res Tr(A X) = sum_i Tr(A_i X_{i-1})``.
* A tangent vector to the extended orbit at ``(g0, A)`` is carried as a lift
  ``(X, Rdot)``; the ambient tangent it represents is
  ``(g0 X(0), [A, X] + g0^-1 Rdot g0)``, with the bracket taken in the dual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _series
from .connection_model import PrincipalPart, formal_diagonalize
from .errors import OffLevelSet, OffSlice, ShapeMismatch, SimplePoleUnsupported

__all__ = [
    "ExtendedOrbitPoint",
    "TangentLift",
    "pairing",
    "coadjoint",
    "adjoint",
    "dual_bracket",
    "jet_bracket",
    "winding",
    "winding_preimage",
    "omega_extended",
    "ambient_tangent",
    "lift_from_ambient",
    "fundamental_lift",
    "moments",
    "kernel_lift",
    "random_extended_point",
    "random_lift",
    "self_check",
    "decouple",
    "recouple",
    "decoupled_tangent",
    "cotangent_form",
    "orbit_form",
    "orbit_generator",
    "moduli_form",
    "on_extended_orbit",
    "orbit_curve",
]


@dataclass(frozen=True)
class ExtendedOrbitPoint:
    g0: np.ndarray
    A: np.ndarray  # dual element, A_k first

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def rank(self) -> int:
        return self.A.shape[1]

    @property
    def residue(self) -> np.ndarray:
        return self.A[-1]


@dataclass(frozen=True)
class TangentLift:
    X: np.ndarray  # jet, X_0 first
    Rdot: np.ndarray  # diagonal entries

    def __add__(self, other: "TangentLift") -> "TangentLift":
        return TangentLift(self.X + other.X, self.Rdot + other.Rdot)

    def scale(self, s: complex) -> "TangentLift":
        return TangentLift(self.X * s, self.Rdot * s)


def _check(A: np.ndarray, X: np.ndarray) -> None:
    if A.shape != X.shape:
        raise ShapeMismatch(f"dual element {A.shape} and jet {X.shape} differ")


def pairing(A, X) -> complex:
    """``sum_{i=1..k} Tr(A_i X_{i-1})``."""
    A = np.asarray(A, dtype=complex)
    X = np.asarray(X, dtype=complex)
    _check(A, X)
    k = A.shape[0]
    return complex(sum(np.trace(A[k - i] @ X[i - 1]) for i in range(1, k + 1)))


def _dual_laurent(A: np.ndarray) -> _series.Laurent:
    return _series.Laurent(-A.shape[0], np.asarray(A, dtype=complex))


def _principal(L: _series.Laurent, k: int) -> np.ndarray:
    return np.array([L.coeff(-j) for j in range(k, 0, -1)])


def coadjoint(g, A) -> np.ndarray:
    """Principal part of ``g A g^-1`` (truncated series arithmetic)."""
    g = np.asarray(g, dtype=complex)
    A = np.asarray(A, dtype=complex)
    _check(A, g)
    k = A.shape[0]
    ginv = _series.inv(g, k)
    L = _series.Laurent(0, g) @ _dual_laurent(A) @ _series.Laurent(0, ginv)
    return _principal(L, k)


def adjoint(g, X) -> np.ndarray:
    """``g X g^-1`` in the truncated jet algebra."""
    g = np.asarray(g, dtype=complex)
    k = g.shape[0]
    return _series.mul(_series.mul(g, X, k), _series.inv(g, k), k)


def jet_bracket(X, Y) -> np.ndarray:
    k = X.shape[0]
    return _series.mul(X, Y, k) - _series.mul(Y, X, k)


def dual_bracket(A, X) -> np.ndarray:
    """Principal part of ``A X - X A``: the infinitesimal coadjoint action of ``-X``."""
    k = A.shape[0]
    L = _dual_laurent(A)
    Xl = _series.Laurent(0, np.asarray(X, dtype=complex))
    return _principal((L @ Xl) - (Xl @ L), k)


def winding(g, R, A0) -> ExtendedOrbitPoint:
    """``(g(0), PP(g^-1 (A0 + R dz/z) g))`` for diagonal residue entries ``R``."""
    g = np.asarray(g, dtype=complex)
    A0 = np.array(A0, dtype=complex)
    A0[-1] = A0[-1] + np.diag(np.asarray(R, dtype=complex))
    ginv = _series.inv(g, g.shape[0])
    return ExtendedOrbitPoint(g[0].copy(), coadjoint(ginv, A0))


def winding_preimage(pt: ExtendedOrbitPoint) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A jet ``g`` and diagonal data ``(R, A0)`` with ``winding(g, R, A0) = pt``.

    ``g`` is the formal normalizing transformation truncated to ``k`` terms.
    """
    k = pt.order
    ghat, nf = formal_diagonalize(PrincipalPart(pt.A), pt.g0, max(k, 1))
    A0 = nf.polar_part()
    A0[-1] = 0
    return ghat[:k].copy(), nf.exponent.copy(), A0


def on_extended_orbit(pt: ExtendedOrbitPoint, A0_ref, tol: float = 1e-8) -> bool:
    """Membership test: the irregular part of ``g0 A g0^-1`` lies on the orbit of
    ``A0_ref`` (checked through the formal normal form)."""
    k = pt.order
    A0_ref = np.asarray(A0_ref, dtype=complex)
    try:
        _, nf = formal_diagonalize(PrincipalPart(pt.A), pt.g0, max(k, 1))
    except Exception:
        return False
    if k == 1:
        vals = nf.exponent
        n = len(vals)
        lead = pt.g0 @ pt.A[0] @ np.linalg.inv(pt.g0)
        if np.linalg.norm(lead - np.diag(np.diag(lead))) > tol * max(1.0, np.linalg.norm(lead)):
            return False
        for a in range(n):
            for b in range(n):
                if a != b:
                    d = vals[a] - vals[b]
                    if abs(d - np.round(d.real)) <= tol:
                        return False
        return True
    ref = A0_ref[:k - 1]
    got = nf.polar_part()[:k - 1]
    return bool(np.abs(ref - got).max() <= tol * max(1.0, np.abs(ref).max()))


def _tilde(g0: np.ndarray, X0: np.ndarray) -> np.ndarray:
    return g0 @ X0 @ np.linalg.inv(g0)


def omega_extended(pt: ExtendedOrbitPoint, v1: TangentLift, v2: TangentLift) -> complex:
    """Symplectic form of the extended orbit evaluated on two lifts."""
    _check(pt.A, v1.X)
    _check(pt.A, v2.X)
    t1 = np.diag(_tilde(pt.g0, v1.X[0]))
    t2 = np.diag(_tilde(pt.g0, v2.X[0]))
    r1 = np.asarray(v1.Rdot, dtype=complex)
    r2 = np.asarray(v2.Rdot, dtype=complex)
    return complex(np.dot(r1, t2) - np.dot(r2, t1) + pairing(pt.A, jet_bracket(v1.X, v2.X)))


def ambient_tangent(pt: ExtendedOrbitPoint, v: TangentLift) -> tuple[np.ndarray, np.ndarray]:
    """``(dg0, dA)`` represented by a lift."""
    dA = dual_bracket(pt.A, v.X)
    dA[-1] = dA[-1] + np.linalg.inv(pt.g0) @ np.diag(v.Rdot) @ pt.g0
    return pt.g0 @ v.X[0], dA


def lift_from_ambient(pt: ExtendedOrbitPoint, dg0, dA) -> tuple[TangentLift, float]:
    """Least-squares lift of an ambient tangent; returns the lift and the relative residual."""
    k, n = pt.order, pt.rank
    size = k * n * n + n
    columns = []
    for idx in range(size):
        e = np.zeros(size, dtype=complex)
        e[idx] = 1.0
        columns.append(_lift_vector(pt, e))
    M = np.array(columns).T
    rhs = np.concatenate([np.asarray(dg0, complex).ravel(), np.asarray(dA, complex).ravel()])
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    resid = np.linalg.norm(M @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
    return TangentLift(sol[:k * n * n].reshape(k, n, n), sol[k * n * n:]), float(resid)


def _lift_vector(pt: ExtendedOrbitPoint, e: np.ndarray) -> np.ndarray:
    k, n = pt.order, pt.rank
    v = TangentLift(e[:k * n * n].reshape(k, n, n), e[k * n * n:])
    dg0, dA = ambient_tangent(pt, v)
    return np.concatenate([dg0.ravel(), dA.ravel()])


def fundamental_lift(pt: ExtendedOrbitPoint, xi) -> TangentLift:
    """Lift of the generator of ``s -> exp(-s xi) . pt`` for the action
    ``h . (g0, A) = (g0 h^-1, h A h^-1)``."""
    k, n = pt.order, pt.rank
    X = np.zeros((k, n, n), dtype=complex)
    X[0] = xi
    return TangentLift(X, np.zeros(n, dtype=complex))


def moments(pt: ExtendedOrbitPoint) -> tuple[np.ndarray, np.ndarray]:
    """``(mu_G, mu_T)``: the residue of ``A`` and minus the formal exponent."""
    k = pt.order
    _, nf = formal_diagonalize(PrincipalPart(pt.A), pt.g0, max(k, 1))
    return pt.A[-1].copy(), -np.diag(nf.exponent)


def decouple(pt: ExtendedOrbitPoint) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(g0, residue of A, irregular part of g0 A g0^-1)`` for poles of order >= 2."""
    if pt.order < 2:
        raise SimplePoleUnsupported("decoupling needs a pole of order at least two")
    g0inv = np.linalg.inv(pt.g0)
    B = pt.g0 @ pt.A @ g0inv
    B[-1] = 0
    return pt.g0.copy(), pt.A[-1].copy(), B


def recouple(g0, S, B) -> ExtendedOrbitPoint:
    """Inverse of :func:`decouple`: ``(g0, g0^-1 B g0 + S)``."""
    g0 = np.asarray(g0, dtype=complex)
    A = np.linalg.inv(g0) @ np.asarray(B, dtype=complex) @ g0
    A[-1] = A[-1] + S
    return ExtendedOrbitPoint(g0.copy(), A)


def decoupled_tangent(pt: ExtendedOrbitPoint, v: TangentLift) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Push a lift forward through :func:`decouple`.

    Returns ``(xi, Sdot, Bdot)`` with ``xi`` the left-trivialized framing velocity.
    """
    dg0, dA = ambient_tangent(pt, v)
    g0inv = np.linalg.inv(pt.g0)
    xi = g0inv @ dg0
    Sdot = dA[-1].copy()
    Bdot = pt.g0 @ (dA + dual_bracket(pt.A, -np.concatenate([xi[None], np.zeros_like(pt.A[1:])]))) @ g0inv
    Bdot[-1] = 0
    return xi, Sdot, Bdot


def cotangent_form(S, tan1, tan2) -> complex:
    """Left-trivialized canonical form on ``T*G`` at ``(g0, S)``."""
    xi1, S1 = tan1
    xi2, S2 = tan2
    return complex(np.trace(S1 @ xi2) - np.trace(S2 @ xi1) - np.trace(S @ (xi1 @ xi2 - xi2 @ xi1)))


def orbit_generator(B, Bdot) -> tuple[np.ndarray, float]:
    """A jet ``Y`` with ``Y(0) = 0`` and ``PP[B, Y] = Bdot`` (least squares)."""
    B = np.asarray(B, dtype=complex)
    k, n, _ = B.shape
    size = (k - 1) * n * n
    cols = []
    for idx in range(size):
        Y = np.zeros((k, n, n), dtype=complex)
        Y[1:].reshape(-1)[idx] = 1.0
        out = dual_bracket(B, Y)
        out[-1] = 0
        cols.append(out.ravel())
    M = np.array(cols).T
    rhs = np.asarray(Bdot, dtype=complex).ravel()
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    Y = np.zeros((k, n, n), dtype=complex)
    Y[1:] = sol.reshape(k - 1, n, n)
    resid = np.linalg.norm(M @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
    return Y, float(resid)


def orbit_form(B, Y1, Y2) -> complex:
    """Orbit form ``<B, [Y1, Y2]>`` on generators."""
    return pairing(B, jet_bracket(Y1, Y2))


def orbit_curve(g, R, A0, v: TangentLift, s: float) -> ExtendedOrbitPoint:
    """The point ``winding(g exp(s X), R + s Rdot, A0)``; its velocity at ``s = 0``
    is the tangent represented by ``v``."""
    g = np.asarray(g, dtype=complex)
    gs = _series.mul(g, _series.exp(s * np.asarray(v.X, dtype=complex)), g.shape[0])
    return winding(gs, np.asarray(R) + s * np.asarray(v.Rdot), A0)


def moduli_form(points: Sequence[ExtendedOrbitPoint], lifts1: Sequence[TangentLift],
                lifts2: Sequence[TangentLift], level_tol: float = 1e-9,
                slice_tol: float = 1e-10) -> complex:
    """Reduced form on the moduli space, evaluated on the gauge slice ``g0 = 1`` at
    the first pole."""
    if not (len(points) == len(lifts1) == len(lifts2)):
        raise ShapeMismatch("one lift per pole is required")
    n = points[0].rank
    scale = max(1.0, max(np.abs(p.A).max() for p in points))
    total = sum(p.A[-1] for p in points)
    if np.linalg.norm(total) > level_tol * scale:
        raise OffLevelSet("residues do not sum to zero")
    if np.linalg.norm(points[0].g0 - np.eye(n)) > slice_tol * max(1.0, np.linalg.norm(points[0].g0)):
        raise OffSlice("the first framing is not the identity")
    for lifts in (lifts1, lifts2):
        dres = sum(ambient_tangent(p, v)[1][-1] for p, v in zip(points, lifts))
        size = max(1.0, max(np.abs(v.X).max(initial=0.0) for v in lifts))
        if np.linalg.norm(dres) > level_tol * scale * size:
            raise OffLevelSet("lift is not tangent to the zero level of the residue sum")
    return complex(sum(omega_extended(p, v, w) for p, v, w in zip(points, lifts1, lifts2)))


def kernel_lift(pt: ExtendedOrbitPoint, W) -> TangentLift:
    """A lift representing the zero tangent: ``g^-1 W g`` for a diagonal jet ``W``
    with ``W(0) = 0`` (``g`` from :func:`winding_preimage`)."""
    g, _, _ = winding_preimage(pt)
    W = np.asarray(W, dtype=complex)
    return TangentLift(adjoint(_series.inv(g, pt.order), W) if pt.order > 1 else np.zeros_like(W),
                       np.zeros(pt.rank, dtype=complex))


def random_extended_point(rng: np.random.Generator, n: int, k: int,
                          scale: float = 1.0) -> ExtendedOrbitPoint:
    """Random generic point: a random jet acting on a diagonal normal form."""
    def rc(*shape):
        return rng.normal(size=shape) + 1j * rng.normal(size=shape)

    A0 = np.zeros((k, n, n), dtype=complex)
    for m in range(k - 1):
        A0[m] = np.diag(rc(n)) * scale
    g = 0.3 * rc(k, n, n)
    g[0] = np.eye(n) + 0.3 * rc(n, n)
    return winding(g, 0.3 * rc(n), A0)


def random_lift(rng: np.random.Generator, pt: ExtendedOrbitPoint) -> TangentLift:
    def rc(*shape):
        return rng.normal(size=shape) + 1j * rng.normal(size=shape)

    return TangentLift(rc(pt.order, pt.rank, pt.rank), rc(pt.rank))


def self_check(pt: ExtendedOrbitPoint, rng: np.random.Generator, samples: int = 4,
               step: float = 1e-4) -> dict:
    """Largest defects of the form's identities at one point, over random lifts:
    skewness, independence of the lift, the moment-map identity (central
    differences with one Richardson step), and for ``k >= 2`` the decoupling
    round trip and agreement of the form with its decoupled expression."""
    g, R, A0 = winding_preimage(pt)
    n, k = pt.rank, pt.order
    out = {"skew": 0.0, "lift_independence": 0.0, "moment_map": 0.0,
           "decouple_roundtrip": 0.0, "decoupled_form": 0.0}
    for _ in range(samples):
        v1, v2 = random_lift(rng, pt), random_lift(rng, pt)
        w12 = omega_extended(pt, v1, v2)
        size = max(1.0, abs(w12))
        out["skew"] = max(out["skew"], abs(w12 + omega_extended(pt, v2, v1)) / size)
        W = np.zeros((k, n, n), dtype=complex)
        for m in range(1, k):
            W[m] = np.diag(rng.normal(size=n) + 1j * rng.normal(size=n))
        shifted = v1 + kernel_lift(pt, W)
        out["lift_independence"] = max(out["lift_independence"],
                                       abs(omega_extended(pt, shifted, v2) - w12) / size)
        xi = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))

        def moment(s):
            return np.trace(orbit_curve(g, R, A0, v1, s).residue @ xi)

        d1 = (moment(step) - moment(-step)) / (2 * step)
        d2 = (moment(step / 2) - moment(-step / 2)) / step
        fd = (4 * d2 - d1) / 3
        exact = omega_extended(pt, v1, fundamental_lift(pt, xi))
        out["moment_map"] = max(out["moment_map"], float(abs(fd - exact) / max(1.0, abs(exact))))
        if k >= 2:
            g0, S, B = decouple(pt)
            back = recouple(g0, S, B)
            out["decouple_roundtrip"] = max(
                out["decouple_roundtrip"],
                float(np.abs(back.A - pt.A).max() + np.abs(back.g0 - pt.g0).max()))
            xi1, S1, B1 = decoupled_tangent(pt, v1)
            xi2, S2, B2 = decoupled_tangent(pt, v2)
            Y1, _ = orbit_generator(B, B1)
            Y2, _ = orbit_generator(B, B2)
            split = cotangent_form(S, (xi1, S1), (xi2, S2)) + orbit_form(B, Y1, Y2)
            out["decoupled_form"] = max(out["decoupled_form"], abs(split - w12) / size)
    return out
