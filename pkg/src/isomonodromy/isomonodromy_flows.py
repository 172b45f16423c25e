"""Isomonodromic deformations: Schlesinger and Jimbo-Miwa-Ueno flows.

A :class:`FlowState` holds pole positions, principal parts and compatible
framings.  Deformation parameters are the pole positions and the irregular
types; a tangent to the parameter space is a :class:`DeformationTangent`.

The deformation one-form ``Omega`` (contracted with a tangent) is the unique
rational matrix function with principal part ``PP(ghat^-1 X ghat)`` at each pole,
where ``X`` is the parameter derivative of the normal form ``dQ + Lambda dz/z``
expressed in the moving local coordinate, plus a constant fixed by the
normalization:

* ``"slice"``: the framing correction at the first pole vanishes, so a first
  framing equal to the identity stays equal to the identity;
* ``"infinity"``: ``Omega`` vanishes at infinity, which on simple poles gives the
  Schlesinger equations verbatim.

Principal parts then move by ``dA/dt = dOmega/dz + [Omega, A]`` and framings by
``dg0/dt = -g0 Theta``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from . import _series
from .connection_model import (
    MeromorphicConnection,
    complex_to_json,
    formal_diagonalize,
    pole_genericity,
)
from .errors import (
    EigenvalueCollision,
    GenericityLost,
    PoleCollision,
    ResonantShift,
    StepUnderflow,
    ValidationError,
)
from .orbit_geometry import (
    ExtendedOrbitPoint,
    TangentLift,
    ambient_tangent,
    lift_from_ambient,
    moduli_form,
    orbit_curve,
    winding_preimage,
)

__all__ = [
    "FlowState",
    "DeformationTangent",
    "DeformationPoint",
    "FlowCheckpoint",
    "schlesinger_rhs",
    "schlesinger_velocity",
    "jmu_one_form",
    "theta_induced",
    "jmu_rhs",
    "jmu_consistency",
    "integrate_flow",
    "flow_trajectory",
    "integrate_schlesinger",
    "transport_tangents",
    "random_fiber_tangents",
    "invariance_report",
    "write_trajectory_csv",
]

COLLISION_TOL = 1e-10


# ---------------------------------------------------------------- state types


@dataclass(frozen=True)
class FlowState:
    """Pole positions, principal parts (``A_k`` first) and compatible framings."""

    positions: np.ndarray
    parts: tuple[np.ndarray, ...]
    framings: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "positions", np.array(self.positions, dtype=complex).reshape(-1))
        object.__setattr__(self, "parts", tuple(np.array(p, dtype=complex) for p in self.parts))
        object.__setattr__(self, "framings", tuple(np.array(g, dtype=complex) for g in self.framings))
        if not (len(self.positions) == len(self.parts) == len(self.framings)):
            raise ValidationError("positions, principal parts and framings must have equal length")

    @classmethod
    def from_connection(cls, conn: MeromorphicConnection, gauge_slice: bool = True) -> "FlowState":
        """State with the connection's framings; with ``gauge_slice`` a constant
        gauge transformation makes the first framing the identity."""
        framings = [conn.framing(i) for i in range(len(conn.positions))]
        parts = [p.coefficients for p in conn.parts]
        if gauge_slice:
            h = framings[0]
            hinv = np.linalg.inv(h)
            parts = [h @ p @ hinv for p in parts]
            framings = [g @ hinv for g in framings]
        return cls(conn.positions, tuple(parts), tuple(framings))

    @property
    def rank(self) -> int:
        return self.parts[0].shape[1]

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(p.shape[0] for p in self.parts)

    @property
    def scale(self) -> float:
        return max(1.0, max(np.abs(p).max() for p in self.parts))

    def connection(self) -> MeromorphicConnection:
        return MeromorphicConnection(self.positions, self.parts, self.framings)

    def residue_sum(self) -> np.ndarray:
        return sum(p[-1] for p in self.parts)

    def local_forms(self, N: int | None = None, compat_tol: float = 1e-2) -> list:
        """``(ghat, normal form)`` per pole, with ``ghat`` to order ``N`` (default ``k``).

        The compatibility tolerance is loose because integrators evaluate the
        vector field at stage points slightly off the set of compatible framings.
        """
        conn = self.connection()
        out = []
        for i, part in enumerate(conn.parts):
            order = part.order if N is None else N
            tail = conn.local_tail(i, order + part.order + 1)
            try:
                out.append(formal_diagonalize(part, self.framings[i], order, tail, compat_tol))
            except (EigenvalueCollision, ResonantShift) as exc:
                raise GenericityLost(f"pole {i}: {exc}") from exc
        return out

    def exponents(self) -> np.ndarray:
        return np.array([nf.exponent for _, nf in self.local_forms()])

    def irregular_types(self) -> tuple[np.ndarray, ...]:
        return tuple(nf.irregular.copy() for _, nf in self.local_forms())

    def orbit_points(self) -> tuple[ExtendedOrbitPoint, ...]:
        return tuple(ExtendedOrbitPoint(g, p) for g, p in zip(self.framings, self.parts))

    # flat vector layout used by the integrators
    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.positions] + [p.ravel() for p in self.parts]
                              + [g.ravel() for g in self.framings])

    def from_vector(self, vec: np.ndarray) -> "FlowState":
        m, n = len(self.positions), self.rank
        pos = vec[:m]
        idx = m
        parts = []
        for p in self.parts:
            parts.append(vec[idx:idx + p.size].reshape(p.shape))
            idx += p.size
        framings = []
        for _ in range(m):
            framings.append(vec[idx:idx + n * n].reshape(n, n))
            idx += n * n
        return FlowState(pos, tuple(parts), tuple(framings))

    def to_json(self) -> dict:
        return {
            "positions": complex_to_json(self.positions),
            "parts": [complex_to_json(p) for p in self.parts],
            "framings": [complex_to_json(g) for g in self.framings],
        }


@dataclass(frozen=True)
class DeformationTangent:
    """Velocities of pole positions and of irregular types.

    ``irregular[i]`` has the layout of :attr:`FormalNormalForm.irregular`: row ``m``
    is the diagonal of the coefficient of ``dz/z^(k-m)``.
    """

    positions: np.ndarray
    irregular: tuple[np.ndarray, ...]

    @classmethod
    def zero(cls, state: FlowState) -> "DeformationTangent":
        n = state.rank
        return cls(np.zeros(len(state.positions), dtype=complex),
                   tuple(np.zeros((k - 1, n), dtype=complex) for k in state.orders))

    @classmethod
    def moving_poles(cls, state: FlowState, velocities) -> "DeformationTangent":
        zero = cls.zero(state)
        return cls(np.asarray(velocities, dtype=complex), zero.irregular)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.positions) ** 2)
                             + sum(np.sum(np.abs(q) ** 2) for q in self.irregular)))


@dataclass(frozen=True)
class DeformationPoint:
    """A point of the deformation space: pole positions and irregular types
    (``None`` entries keep the current irregular type)."""

    positions: np.ndarray
    irregular: tuple[np.ndarray | None, ...] | None = None

    def tangent_to(self, other: "DeformationPoint", state: FlowState) -> DeformationTangent:
        dpos = np.asarray(other.positions, complex) - np.asarray(self.positions, complex)
        n = state.rank
        irr = []
        for i, k in enumerate(state.orders):
            a = None if self.irregular is None else self.irregular[i]
            b = None if other.irregular is None else other.irregular[i]
            if a is None or b is None:
                irr.append(np.zeros((k - 1, n), dtype=complex))
            else:
                irr.append(np.asarray(b, complex) - np.asarray(a, complex))
        return DeformationTangent(dpos, tuple(irr))


# ---------------------------------------------------------------- Schlesinger


def _check_collisions(positions) -> None:
    pos = np.asarray(positions)
    for i in range(len(pos)):
        for j in range(i):
            if abs(pos[i] - pos[j]) < COLLISION_TOL:
                raise PoleCollision(f"poles {j} and {i} collide")


def schlesinger_rhs(state: FlowState) -> np.ndarray:
    """``D[i, j] = dA_i/da_j`` for simple poles, shape ``(m, m, n, n)``."""
    if any(k != 1 for k in state.orders):
        raise ValidationError("the Schlesinger system needs simple poles only")
    _check_collisions(state.positions)
    res = [p[0] for p in state.parts]
    a = state.positions
    m, n = len(a), state.rank
    out = np.zeros((m, m, n, n), dtype=complex)
    for i in range(m):
        for j in range(m):
            if i != j:
                term = (res[i] @ res[j] - res[j] @ res[i]) / (a[i] - a[j])
                out[i, j] = term
                out[i, i] -= term
    return out


def schlesinger_velocity(state: FlowState, velocities) -> np.ndarray:
    """``dA_i/dt`` for pole velocities ``da_j/dt``, shape ``(m, n, n)``."""
    D = schlesinger_rhs(state)
    return np.einsum("ijab,j->iab", D, np.asarray(velocities, dtype=complex))


def integrate_schlesinger(positions, residues, path: Sequence, tol: float = 1e-12):
    """Residues transported by the Schlesinger equations along a polyline of pole
    position vectors (``path[0]`` must equal ``positions``)."""
    res = np.array(residues, dtype=complex)
    m, n = res.shape[0], res.shape[1]
    vertices = [np.asarray(p, dtype=complex) for p in path]
    if np.abs(vertices[0] - np.asarray(positions)).max() > 1e-12:
        raise ValidationError("the path must start at the current pole positions")
    for p0, p1 in zip(vertices[:-1], vertices[1:]):
        vel = p1 - p0

        def rhs(s, y, p0=p0, vel=vel):
            st = FlowState(p0 + s * vel, tuple(y.reshape(m, 1, n, n)),
                           tuple(np.eye(n) for _ in range(m)))
            return schlesinger_velocity(st, vel).ravel()

        sol = solve_ivp(rhs, (0.0, 1.0), res.ravel(), method="DOP853", rtol=tol,
                        atol=tol * max(1.0, np.abs(res).max()))
        if sol.status != 0:
            raise StepUnderflow(sol.message)
        res = sol.y[:, -1].reshape(m, n, n)
    return res


# ---------------------------------------------------------------- JMU


def _principal_taylor(coeffs: np.ndarray, delta: complex, count: int) -> np.ndarray:
    """Taylor coefficients at ``w = 0`` of ``sum_q coeffs[k-q] (w + delta)^-q``."""
    k, n = coeffs.shape[0], coeffs.shape[1]
    out = np.zeros((count, n, n), dtype=complex)
    for q in range(1, k + 1):
        c = coeffs[k - q]
        for p in range(count):
            out[p] += (-1) ** p * comb(q + p - 1, p) * delta ** (-q - p) * c
    return out


def _normal_form_velocity(nf, k: int, adot: complex, irr_dot: np.ndarray) -> _series.Laurent:
    """Parameter derivative of ``Q(z) + Lambda log z`` in the moving coordinate,
    as a Laurent series in ``z`` (powers ``-k .. -1``)."""
    n = nf.rank
    c = np.zeros((k, n, n), dtype=complex)
    for p in range(1, k + 1):
        entry = np.zeros(n, dtype=complex)
        if p + 1 <= k:  # Q-dot: coefficient of z^-p is -Adot0_{p+1}/p
            entry += -irr_dot[k - (p + 1)] / p
        if p == 1:
            entry += -adot * nf.exponent
        else:
            entry += -adot * nf.coefficient(p)
        c[k - p] = np.diag(entry)
    return _series.Laurent(-k, c)


@dataclass
class _Local:
    k: int
    ghat: np.ndarray
    nf: object
    conj: _series.Laurent  # ghat^-1 X ghat


def _local_data(state: FlowState, t: DeformationTangent) -> list[_Local]:
    forms = state.local_forms()
    out = []
    for i, (ghat, nf) in enumerate(forms):
        k = state.orders[i]
        X = _normal_form_velocity(nf, k, t.positions[i], t.irregular[i])
        g = _series.Laurent(0, ghat[:k + 1])
        ginv = _series.Laurent(0, _series.inv(ghat[:k + 1], k + 1))
        out.append(_Local(k, ghat, nf, ginv @ X @ g))
    return out


def _omega_constant(state: FlowState, t: DeformationTangent, local: list[_Local],
                    normalization: str) -> np.ndarray:
    n = state.rank
    if normalization == "infinity":
        return np.zeros((n, n), dtype=complex)
    if normalization != "slice":
        raise ValueError(f"unknown normalization {normalization!r}")
    first = local[0]
    g0inv = np.linalg.inv(first.ghat[0])
    C = first.conj.coeff(0) + t.positions[0] * (g0inv @ first.ghat[1] if first.ghat.shape[0] > 1
                                                 else np.zeros((n, n)))
    for j in range(1, len(local)):
        pp = local[j].conj.principal()
        C = C - _principal_taylor(pp.c, state.positions[0] - state.positions[j], 1)[0]
    return C


def jmu_one_form(state: FlowState, t: DeformationTangent, z: complex,
                 normalization: str = "slice") -> np.ndarray:
    """``Omega`` contracted with ``t``, evaluated at ``z``."""
    local = _local_data(state, t)
    out = _omega_constant(state, t, local, normalization).copy()
    for i, loc in enumerate(local):
        w = z - state.positions[i]
        if abs(w) < COLLISION_TOL:
            raise ValidationError("the one-form is evaluated at a pole")
        pp = loc.conj.principal()
        for idx, coef in enumerate(pp.c):
            out = out + coef * w ** (pp.low + idx)
    return out


def _omega_jet(state: FlowState, i: int, local: list[_Local], C: np.ndarray,
               count: int) -> np.ndarray:
    """Holomorphic part of ``Omega`` at pole ``i``: Taylor coefficients ``0..count-1``."""
    n = state.rank
    H = np.zeros((count, n, n), dtype=complex)
    H[0] += C
    for j, loc in enumerate(local):
        if j != i:
            pp = loc.conj.principal()
            H += _principal_taylor(pp.c, state.positions[i] - state.positions[j], count)
    return H


def theta_induced(state: FlowState, i: int, t: DeformationTangent,
                  normalization: str = "slice") -> np.ndarray:
    """Framing correction ``Theta_i``: the framings move by ``dg0/dt = -g0 Theta_i``.

    ``Theta_i = Const(Omega) - Const(ghat^-1 X ghat) - adot_i g0^-1 g1`` at pole ``i``.
    """
    local = _local_data(state, t)
    C = _omega_constant(state, t, local, normalization)
    return _theta(state, i, t, local, C)


def _theta(state, i, t, local, C) -> np.ndarray:
    loc = local[i]
    H0 = _omega_jet(state, i, local, C, 1)[0]
    g0inv = np.linalg.inv(loc.ghat[0])
    g1 = loc.ghat[1] if loc.ghat.shape[0] > 1 else np.zeros_like(g0inv)
    return H0 - loc.conj.coeff(0) - t.positions[i] * (g0inv @ g1)


def _jmu_parts(state: FlowState, t: DeformationTangent, normalization: str):
    local = _local_data(state, t)
    C = _omega_constant(state, t, local, normalization)
    conn = state.connection()
    dparts, dframes, defects = [], [], []
    for i, loc in enumerate(local):
        k = loc.k
        pp_omega = loc.conj.principal()
        omega = pp_omega + _series.Laurent(0, _omega_jet(state, i, local, C, k))
        A = _series.Laurent(-k, state.parts[i]) + _series.Laurent(0, conn.local_tail(i, k))
        rhs = omega.derivative() + (omega @ A) - (A @ omega)
        coeffs = state.parts[i]
        dA = np.zeros_like(coeffs)
        adot = t.positions[i]
        for j in range(1, k + 1):
            prev = coeffs[k - (j - 1)] if j >= 2 else 0.0
            dA[k - j] = rhs.coeff(-j) - (j - 1) * prev * adot
        defect = rhs.coeff(-(k + 1)) - k * coeffs[0] * adot
        defects.append(float(np.abs(defect).max()))
        dparts.append(dA)
        dframes.append(-state.framings[i] @ _theta(state, i, t, local, C))
    return dparts, dframes, defects


def jmu_rhs(state: FlowState, t: DeformationTangent, normalization: str = "slice") -> FlowState:
    """Derivative of the state along ``t``, packaged as a :class:`FlowState` of
    velocities (positions, principal parts, framings)."""
    _check_collisions(state.positions)
    dparts, dframes, _ = _jmu_parts(state, t, normalization)
    return FlowState(np.asarray(t.positions, dtype=complex), tuple(dparts), tuple(dframes))


def jmu_consistency(state: FlowState, t: DeformationTangent,
                    normalization: str = "slice") -> float:
    """Largest defect in the most singular coefficient of the flatness equation,
    which must equal ``k A_k adot``; a check on the one-form."""
    return max(_jmu_parts(state, t, normalization)[2])


# ---------------------------------------------------------------- flows


def _path_points(path) -> list[DeformationPoint]:
    out = []
    for p in path:
        if isinstance(p, DeformationPoint):
            out.append(p)
        else:
            out.append(DeformationPoint(np.asarray(p, dtype=complex)))
    return out


def _segment_length(a: DeformationPoint, b: DeformationPoint, state: FlowState) -> float:
    return a.tangent_to(b, state).norm()


@dataclass
class FlowCheckpoint:
    arclength: float
    parameters: DeformationPoint
    state: FlowState
    extra: dict = field(default_factory=dict)


def _integrate_stack(states: list[FlowState], start: DeformationPoint, end: DeformationPoint,
                     tol: float, normalization: str) -> list[FlowState]:
    template = states[0]
    t = start.tangent_to(end, template)
    if t.norm() == 0.0:
        return states
    sizes = [len(s.to_vector()) for s in states]
    y0 = np.concatenate([s.to_vector() for s in states])
    p0 = np.asarray(start.positions, dtype=complex)

    def rhs(s, y):
        out = []
        idx = 0
        pos = p0 + s * t.positions
        _check_collisions(pos)
        for st, size in zip(states, sizes):
            cur = st.from_vector(y[idx:idx + size])
            cur = FlowState(pos, cur.parts, cur.framings)
            d = jmu_rhs(cur, t, normalization)
            out.append(d.to_vector())
            idx += size
        return np.concatenate(out)

    scale = max(s.scale for s in states)
    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=tol, atol=tol * scale)
    if sol.status != 0:
        raise StepUnderflow(f"flow integration failed: {sol.message}")
    y = sol.y[:, -1]
    out, idx = [], 0
    for st, size in zip(states, sizes):
        cur = st.from_vector(y[idx:idx + size])
        out.append(FlowState(np.asarray(end.positions, dtype=complex), cur.parts, cur.framings))
        idx += size
    return out


def _check_generic(state: FlowState) -> None:
    conn = state.connection()
    for i, part in enumerate(conn.parts):
        ok, why = pole_genericity(part)
        if not ok:
            raise GenericityLost(f"pole {i}: {why}")


def _subdivide(points: list[DeformationPoint], state: FlowState, pieces: int):
    """Split a polyline into ``pieces`` pieces of equal parameter-space length."""
    lengths = [_segment_length(a, b, state) for a, b in zip(points[:-1], points[1:])]
    total = sum(lengths)
    if pieces <= 1 or total == 0.0:
        return [points], total
    targets = [total * j / pieces for j in range(1, pieces)]
    chunks, current, acc, seg = [], [points[0]], 0.0, 0
    for target in targets:
        while seg < len(lengths) and acc + lengths[seg] < target - 1e-15:
            acc += lengths[seg]
            current.append(points[seg + 1])
            seg += 1
        frac = (target - acc) / lengths[seg]
        mid = _interpolate(points[seg], points[seg + 1], frac)
        current.append(mid)
        chunks.append(current)
        current = [mid]
        points = points[:seg + 1] + [mid] + points[seg + 1:]
        lengths = lengths[:seg] + [lengths[seg] * frac, lengths[seg] * (1 - frac)] + lengths[seg + 1:]
        acc += lengths[seg]
        seg += 1
    current.extend(points[seg + 1:])
    chunks.append(current)
    return chunks, total


def _interpolate(a: DeformationPoint, b: DeformationPoint, s: float) -> DeformationPoint:
    pos = (1 - s) * np.asarray(a.positions) + s * np.asarray(b.positions)
    if a.irregular is None or b.irregular is None:
        return DeformationPoint(pos, a.irregular if b.irregular is None else None)
    irr = tuple(None if (x is None or y is None) else (1 - s) * np.asarray(x) + s * np.asarray(y)
                for x, y in zip(a.irregular, b.irregular))
    return DeformationPoint(pos, irr)


def _run(states: list[FlowState], path, tol: float, normalization: str,
         checkpoints: int = 0, on_checkpoint=None):
    points = _path_points(path)
    base = states[0]
    if np.abs(np.asarray(points[0].positions) - base.positions).max() > 1e-12 * max(
            1.0, np.abs(base.positions).max()):
        raise ValidationError("the path must start at the state's pole positions")
    for p in points:
        _check_collisions(p.positions)
    chunks, total = _subdivide(points, base, max(checkpoints, 1))
    arclength = 0.0
    if on_checkpoint is not None:
        on_checkpoint(0.0, points[0], states)
    for chunk in chunks:
        for a, b in zip(chunk[:-1], chunk[1:]):
            states = _integrate_stack(states, a, b, tol, normalization)
            arclength += _segment_length(a, b, base)
        _check_generic(states[0])
        if on_checkpoint is not None and checkpoints > 0:
            on_checkpoint(arclength, chunk[-1], states)
    return states, total


def integrate_flow(state: FlowState, path, tol: float = 1e-11,
                   normalization: str = "slice") -> FlowState:
    """Transport ``state`` along a polyline of deformation points (or of pole
    position vectors) by the isomonodromy flow."""
    states, _ = _run([state], path, tol, normalization)
    return states[0]


def flow_trajectory(state: FlowState, path, checkpoints: int = 8, tol: float = 1e-11,
                    normalization: str = "slice") -> list[FlowCheckpoint]:
    """Flow with the state recorded at ``checkpoints`` equally spaced points."""
    record: list[FlowCheckpoint] = []

    def keep(s, point, states):
        record.append(FlowCheckpoint(s, point, states[0]))

    _run([state], path, tol, normalization, checkpoints, keep)
    return record


# ---------------------------------------------------------------- tangents


def random_fiber_tangents(state: FlowState, rng: np.random.Generator,
                          count: int = 2) -> list[list[TangentLift]]:
    """Random lifts tangent to the moduli fiber: the residue sum stays zero and the
    first framing stays fixed."""
    points = state.orbit_points()
    n = state.rank
    sizes = [p.order * n * n + n for p in points]
    total = sum(sizes)
    rows = []
    for idx in range(total):
        e = np.zeros(total, dtype=complex)
        e[idx] = 1.0
        lifts = _unpack_lifts(points, e)
        dres = sum(ambient_tangent(p, v)[1][-1] for p, v in zip(points, lifts))
        rows.append(np.concatenate([dres.ravel(), lifts[0].X[0].ravel()]))
    M = np.array(rows).T
    basis = scipy.linalg.null_space(M)
    out = []
    for _ in range(count):
        coef = rng.normal(size=basis.shape[1]) + 1j * rng.normal(size=basis.shape[1])
        vec = basis @ coef
        vec = vec / np.linalg.norm(vec)
        out.append(_unpack_lifts(points, vec))
    return out


def _unpack_lifts(points, vec) -> list[TangentLift]:
    n = points[0].rank
    out, idx = [], 0
    for p in points:
        k = p.order
        X = vec[idx:idx + k * n * n].reshape(k, n, n)
        idx += k * n * n
        R = vec[idx:idx + n]
        idx += n
        out.append(TangentLift(X.copy(), R.copy()))
    return out


def _perturbed(state: FlowState, preimages, lifts: Sequence[TangentLift], s: float) -> FlowState:
    parts, framings = [], []
    for (g, R, A0), v in zip(preimages, lifts):
        pt = orbit_curve(g, R, A0, v, s)
        parts.append(pt.A)
        framings.append(pt.g0)
    return FlowState(state.positions, tuple(parts), tuple(framings))


@dataclass
class TransportResult:
    state: FlowState
    lifts: list[list[TangentLift]]
    lift_residual: float


def transport_tangents(state: FlowState, tangents: Sequence[Sequence[TangentLift]], path,
                       tol: float = 1e-12, h: float | None = None,
                       normalization: str = "slice") -> TransportResult:
    """Transport tangent lifts along the flow by central differences with one
    Richardson step.  All perturbed copies are integrated as one system so they
    share step sizes, which keeps the difference quotients smooth."""
    h = 1e-5 * state.scale if h is None else h
    preimages = [winding_preimage(p) for p in state.orbit_points()]
    copies = [state]
    for lifts in tangents:
        for s in (h, -h, h / 2, -h / 2):
            copies.append(_perturbed(state, preimages, lifts, s))
    finals, _ = _run(copies, path, tol, normalization)
    base = finals[0]
    points = base.orbit_points()
    out, worst = [], 0.0
    for j in range(len(tangents)):
        plus, minus, plus2, minus2 = finals[1 + 4 * j: 5 + 4 * j]
        lifts = []
        for i, pt in enumerate(points):
            def diff(a, b, step):
                return ((a.framings[i] - b.framings[i]) / (2 * step),
                        (a.parts[i] - b.parts[i]) / (2 * step))
            dg_h, dA_h = diff(plus, minus, h)
            dg_2, dA_2 = diff(plus2, minus2, h / 2)
            dg = (4 * dg_2 - dg_h) / 3
            dA = (4 * dA_2 - dA_h) / 3
            lift, resid = lift_from_ambient(pt, dg, dA)
            worst = max(worst, resid)
            lifts.append(lift)
        out.append(lifts)
    return TransportResult(base, out, worst)


# ---------------------------------------------------------------- invariance


def invariance_report(state: FlowState, path, checkpoints: int = 4, tol: float = 1e-11,
                      seed: int = 0, monodromy_params=None, normalization: str = "slice",
                      symplectic: bool = True, fd_step: float | None = None) -> dict:
    """Drift of conjugation-invariant monodromy functions and of the moduli form
    on transported tangent pairs along a deformation path."""
    from .monodromy_numeric import (MonodromyParams, default_tentacles, framed_invariants,
                                    monodromy_data, trace_invariants)
    from .errors import BaseOnRay, NumericalFailure

    params = monodromy_params or MonodromyParams()
    conn0 = state.connection()
    tent0 = default_tentacles(conn0, params)
    p0 = tent0.p0
    reference = list(tent0.base_angles)
    md0 = monodromy_data(conn0, tent0, params)
    inv0, framed0 = trace_invariants(md0), framed_invariants(md0)
    exps0 = state.exponents()
    rows = []
    drift = framed_drift = 0.0
    skipped = 0

    def check(s, point, states):
        nonlocal drift, framed_drift, reference, skipped
        st = states[0]
        row = {"arclength": s, "positions": st.positions.copy(),
               "exponent_drift": float(np.abs(st.exponents() - exps0).max()),
               "residue_sum": float(np.abs(st.residue_sum()).max())}
        try:
            tent = default_tentacles(st.connection(), params, p0=p0, reference_angles=reference)
            md = monodromy_data(st.connection(), tent, params)
            reference = list(tent.base_angles)
            inv, framed = trace_invariants(md), framed_invariants(md)
            d = float(np.max(np.abs(inv - inv0) / np.maximum(1.0, np.abs(inv0))))
            f = float(np.max(np.abs(framed - framed0) / np.maximum(1.0, np.abs(framed0)),
                             initial=0.0))
            row.update(monodromy_drift=d, framed_drift=f, relation_residual=md.residual)
            drift = max(drift, d)
            framed_drift = max(framed_drift, f)
        except (BaseOnRay, NumericalFailure):
            # guard band near anti-Stokes degenerations: skip this checkpoint
            skipped += 1
            row.update(monodromy_drift=float("nan"), framed_drift=float("nan"),
                       relation_residual=float("nan"))
        rows.append(row)

    final_states, total = _run([state], path, tol, normalization, checkpoints, check)
    final = final_states[0]
    report = {
        "path_length": total,
        "checkpoints": len(rows),
        "skipped_checkpoints": skipped,
        "monodromy_drift": drift,
        "framed_drift": framed_drift,
        "exponent_drift": max([float(np.abs(final.exponents() - exps0).max())]
                              + [r["exponent_drift"] for r in rows]),
        "residue_sum_drift": float(np.abs(final.residue_sum()).max()),
        "rows": rows,
        "final_state": final,
    }
    if symplectic:
        rng = np.random.default_rng(seed)
        pair = random_fiber_tangents(state, rng, 2)
        before = moduli_form(state.orbit_points(), pair[0], pair[1])
        moved = transport_tangents(state, pair, path, tol=min(tol, 1e-12), h=fd_step,
                                   normalization=normalization)
        after = moduli_form(moved.state.orbit_points(), moved.lifts[0], moved.lifts[1],
                            level_tol=1e-6, slice_tol=1e-8)
        report.update(
            symplectic_before=before,
            symplectic_after=after,
            symplectic_drift=float(abs(after - before) / max(abs(before), 1e-300)),
            lift_residual=moved.lift_residual,
        )
    return report


def write_trajectory_csv(path: str, rows: Iterable[dict]) -> None:
    """One row per checkpoint: step, arclength, pole positions, drift columns."""
    rows = list(rows)
    if not rows:
        return
    m = len(rows[0]["positions"])
    drift_cols = [k for k in rows[0] if k not in ("arclength", "positions")]
    header = ["step", "arclength"]
    for i in range(m):
        header += [f"pole{i}_re", f"pole{i}_im"]
    header += drift_cols
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for step, row in enumerate(rows):
            line = [step, repr(float(row["arclength"]))]
            for a in row["positions"]:
                line += [repr(float(a.real)), repr(float(a.imag))]
            line += [repr(float(row[c])) for c in drift_cols]
            writer.writerow(line)
