"""Numerical monodromy data: Stokes matrices, connection matrices, formal monodromy.

Strategy
--------
At a pole ``a`` of order ``k`` with compatible framing ``g0`` the formal
solution is ``ghat(z)^-1 z^Lambda exp(Q(z))`` (``z`` the local coordinate
``z - a``).  On each Stokes sector the canonical solution is approximated by the
truncated series evaluated at a small matching radius on the sector bisector.
For two exponents the bisector is where ``q_a - q_b`` is purely imaginary, so
matching errors are not amplified there.  The frame is then transported
numerically out to a moderate radius, where consecutive sectors are compared
after crossing one anti-Stokes ray along an arc.  At that radius the exponential
amplification ``exp|q_a - q_b|`` is mild.

Global data use a base point ``p0`` with the base frame fixed to the identity,
straight paths towards each pole followed by a short arc inside the pole's
disc, and the relation ``rho_m ... rho_1 = 1`` with poles ordered by increasing
angle seen from ``p0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import _series
from .connection_model import MeromorphicConnection, complex_to_json, formal_diagonalize
from .errors import MatchingUnreliable, SupportViolation, TentacleDegenerate
from .matcore import circle_path, integrate_linear, mat_exp
from .stokes_data import (
    StokesMatrices,
    anti_stokes,
    half_period_order,
    labelled_directions,
    support_mask,
)

__all__ = [
    "MonodromyParams",
    "LocalSolutions",
    "Tentacles",
    "PoleMonodromy",
    "MonodromyData",
    "canonical_frame",
    "stokes_numeric",
    "default_tentacles",
    "monodromy_data",
    "degree_of",
    "degree_by_quadrature",
    "loop_monodromy",
    "torus_equivariance_check",
    "trace_invariants",
    "framed_invariants",
]

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class MonodromyParams:
    """Numerical parameters.  ``N = k + truncation_extra`` unless ``truncation`` is set."""

    truncation_extra: int = 5
    truncation: int | None = None
    match_tol: float = 1e-14
    tol: float = 1e-12
    support_tol: float = 1e-6
    r_match: float | None = None
    disc_fraction: float = 0.35
    loop_fraction: float = 0.6
    arc_pieces: int = 64

    def order_for(self, k: int) -> int:
        return self.truncation if self.truncation is not None else k + self.truncation_extra

    def refined(self) -> "MonodromyParams":
        """Halved integrator tolerance and two more series terms."""
        return replace(self, tol=self.tol / 2, truncation_extra=self.truncation_extra + 2,
                       truncation=None if self.truncation is None else self.truncation + 2,
                       r_match=None if self.r_match is None else self.r_match / 2)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _wrap(angle: float) -> float:
    """Representative in ``(-pi, pi]``."""
    w = np.mod(angle + np.pi, TWO_PI) - np.pi
    return float(np.pi if w == -np.pi else w)


def disc_radius(conn: MeromorphicConnection, i: int, fraction: float) -> float:
    others = [abs(conn.positions[i] - a) for j, a in enumerate(conn.positions) if j != i]
    return fraction * min(others) if others else 1.0


class LocalSolutions:
    """Formal data and canonical sector frames at one pole.

    ``base_angle`` selects the base sector (the one containing it) and the branch of
    ``log z`` there; the other sectors are reached by turning positively, with
    ``arg z`` increasing continuously, so the base sector is reached last.
    """

    def __init__(self, conn: MeromorphicConnection, index: int, base_angle: float,
                 params: MonodromyParams = MonodromyParams(), g0=None, radius: float | None = None):
        self.conn = conn
        self.index = index
        self.params = params
        self.center = complex(conn.positions[index])
        part = conn.parts[index]
        self.k, self.n = part.order, part.rank
        self.g0 = np.asarray(conn.framing(index) if g0 is None else g0, dtype=complex)
        self.radius = radius if radius is not None else disc_radius(conn, index, params.disc_fraction)
        self.N = params.order_for(self.k)
        extra = 2
        tail = conn.local_tail(index, self.N + extra + self.k + 1)
        self.ghat, self.nf = formal_diagonalize(part, self.g0, self.N + extra, tail)
        self.finv = _series.inv(self.ghat, self.N + extra + 1)
        self.aset = anti_stokes(self.nf)
        self.base_angle = float(base_angle)
        self.pi, self.P = half_period_order(self.aset, self.base_angle)
        self.labels = labelled_directions(self.aset, self.base_angle)
        self.bisectors = self._bisectors()
        self._cache: dict[tuple[int, float], tuple[np.ndarray, float, float]] = {}

    # sector geometry ---------------------------------------------------------

    def _bisectors(self) -> list[float]:
        """Unwrapped bisector angles of sectors ``1..r``; the last is the base sector."""
        if not self.labels:
            self.sector_bounds = [(self.base_angle - np.pi, self.base_angle + np.pi)]
            return [self.base_angle]
        dirs = np.asarray(self.aset.directions)
        first = dirs[self.labels[0]]
        d1 = self.base_angle + np.mod(first - self.base_angle, TWO_PI) - TWO_PI
        unwrapped = [d1 + np.mod(dirs[d] - first, TWO_PI) for d in self.labels]
        unwrapped.append(d1 + TWO_PI)
        self.sector_bounds = [(unwrapped[s], unwrapped[s + 1]) for s in range(len(self.labels))]
        return [0.5 * (lo + hi) for lo, hi in self.sector_bounds]

    @property
    def sector_count(self) -> int:
        return len(self.bisectors)

    @property
    def base_bisector(self) -> float:
        return self.bisectors[-1]

    # formal solution ---------------------------------------------------------

    def formal_frame(self, r: float, arg: float, terms: int | None = None) -> np.ndarray:
        z = r * np.exp(1j * arg)
        terms = self.N + 1 if terms is None else terms
        F = _series.evaluate(self.finv[:terms], z)
        expo = self.nf.exponent * (np.log(r) + 1j * arg) + self.nf.Q(z)
        return F * np.exp(expo)[None, :]

    def column_growth(self, column: int, r: float, arg: float) -> float:
        """``max_b Re(q_a - q_b)`` at the point, clipped at zero: the log of the worst
        factor by which other solutions can contaminate column ``a`` there."""
        if self.n < 2:
            return 0.0
        re = self.nf.Q(r * np.exp(1j * arg)).real
        return float(max(0.0, re[column] - re.min()))

    def truncation_estimate(self, r: float, arg: float, column: int | None = None) -> float:
        """Size of the first dropped series terms relative to the leading term, times
        the exponential contamination factor of the column (worst column if ``None``)."""
        N = self.N
        dropped = max(np.linalg.norm(self.finv[N + 1]) * r ** (N + 1),
                      np.linalg.norm(self.finv[N + 2]) * r ** (N + 2))
        columns = range(self.n) if column is None else [column]
        growth = max(self.column_growth(c, r, arg) for c in columns)
        return dropped / np.linalg.norm(self.finv[0]) * np.exp(min(growth, 700.0))

    def matching_angle(self, sector: int, column: int, r: float) -> float:
        """Angle minimising the contamination of one column at radius ``r``.

        The search covers the sector widened on each side by most of the extra
        width on which its canonical solution keeps the formal asymptotics.
        """
        bis = self.bisectors[sector - 1]
        if self.n < 2 or self.k < 2:
            return bis
        lo, hi = self.sector_bounds[sector - 1]
        widen = 0.8 * np.pi / (2 * (self.k - 1))
        if self.column_growth(column, r, bis) == 0.0:
            return bis
        # nearest angle to the bisector where the column dominates nothing
        steps = np.linspace(0.0, 1.0, 201)[1:]
        best, best_val = bis, self.column_growth(column, r, bis)
        for t in steps:
            for a in (bis + t * (hi + widen - bis), bis - t * (bis - lo + widen)):
                val = self.column_growth(column, r, a)
                if val == 0.0:
                    return float(a)
                if val < best_val:
                    best, best_val = float(a), val
        width = (hi - lo + 2 * widen) / 400
        res = minimize_scalar(lambda a: self.column_growth(column, r, a),
                              bounds=(best - width, best + width), method="bounded",
                              options={"xatol": 1e-12})
        return float(res.x) if res.fun < best_val else best

    def matching_point(self, sector: int, column: int) -> tuple[float, float, float]:
        """``(r_match, angle, estimate)`` for one column: the largest grid radius
        meeting ``match_tol``."""
        if self.params.r_match is not None:
            r = min(self.params.r_match, self.radius)
            arg = self.matching_angle(sector, column, r)
            est = self.truncation_estimate(r, arg, column)
            if est > self.params.match_tol:
                raise MatchingUnreliable(
                    f"truncation estimate {est:.2e} at r={r:.3g} exceeds {self.params.match_tol:.1e}")
            return r, arg, est
        best = np.inf
        for j in range(0, 161):
            r = self.radius * 0.5 ** (j / 4)
            arg = self.matching_angle(sector, column, r)
            est = self.truncation_estimate(r, arg, column)
            if est <= self.params.match_tol:
                return r, arg, est
            best = min(best, est)
        raise MatchingUnreliable(
            f"no matching radius reaches {self.params.match_tol:.1e} (best {best:.2e})")

    def _coeff(self, z: complex) -> np.ndarray:
        return self.conn(z)

    def _shifted_coeff(self, column: int):
        """Coefficient of the ODE for ``w = y exp(-q_a(z) - lambda_a log z)``."""
        eye = np.eye(self.n)
        powers = range(2, self.k + 1)
        coeffs = [self.nf.coefficient(j)[column] for j in powers]
        lam = self.nf.exponent[column]

        def coeff(z: complex) -> np.ndarray:
            w = z - self.center
            dq = sum(c * w ** (-j) for c, j in zip(coeffs, powers)) + lam / w
            return self.conn(z) - dq * eye

        return coeff

    def frame_at(self, sector: int, radius: float) -> tuple[np.ndarray, float, float]:
        """Canonical frame of a sector (``1..r``; ``0`` means the base sector) at
        ``center + radius * exp(i bisector)``.

        Each column is evaluated from the truncated series at its own matching
        point, then transported radially to ``radius`` and along an arc to the
        bisector.  Returns ``(frame, smallest r_match, largest estimate)``.
        """
        s = self.sector_count if sector == 0 else sector
        key = (s, float(radius))
        if key in self._cache:
            return self._cache[key]
        bis = self.bisectors[s - 1]
        frame = np.empty((self.n, self.n), dtype=complex)
        radii, estimates = [], []
        for a in range(self.n):
            r_m, arg, est = self.matching_point(s, a)
            # Transport w = column * exp(-q_a - lambda_a log z), which stays moderate
            # while the column itself may overflow or underflow near the pole.
            col = _series.evaluate(self.finv[:self.N + 1], r_m * np.exp(1j * arg))[:, a:a + 1]
            path = [self.center + r_m * np.exp(1j * arg)]
            if abs(radius - r_m) > 1e-14 * radius:
                path.append(self.center + radius * np.exp(1j * arg))
            if abs(bis - arg) > 1e-14:
                arc = circle_path(self.center, radius, arg, bis - arg, self.params.arc_pieces)
                path.extend(arc[1:])
            if len(path) > 1:
                col = integrate_linear(self._shifted_coeff(a), path, col, self.params.tol)
            z_end = radius * np.exp(1j * bis)
            log_scale = self.nf.exponent[a] * (np.log(radius) + 1j * bis) + self.nf.Q(z_end)[a]
            frame[:, a] = col[:, 0] * np.exp(log_scale)
            radii.append(r_m)
            estimates.append(est)
        self._cache[key] = (frame, min(radii), max(estimates))
        return self._cache[key]

    def formal_monodromy(self) -> np.ndarray:
        return np.diag(np.exp(TWO_PI * 1j * self.nf.exponent))

    # Stokes data -------------------------------------------------------------

    def stokes_factors(self) -> tuple[list[np.ndarray], dict]:
        """Stokes factors ``K_1..K_r`` (``K_s`` crosses the ``s``-th labelled ray)."""
        R = self.radius
        r = self.sector_count
        frames = [self.frame_at(s, R)[0] for s in range(1, r + 1)]
        M0inv = np.diag(np.exp(-TWO_PI * 1j * self.nf.exponent))
        Ks: list[np.ndarray] = [None] * r  # type: ignore[list-item]
        proj = 0.0
        for s in range(1, r + 1):
            start = self.bisectors[s - 1]
            sweep = (self.bisectors[s] if s < r else self.bisectors[0] + TWO_PI) - start
            arc = circle_path(self.center, R, start, sweep, self.params.arc_pieces)
            moved = integrate_linear(self._coeff, arc, frames[s - 1], self.params.tol)
            if s < r:
                K = np.linalg.solve(frames[s], moved)
                target = s  # crosses ray s+1, stored zero-based
            else:
                K = np.linalg.solve(frames[0], moved) @ M0inv
                target = 0
            roots = self.aset.roots[self.labels[target]]
            mask = support_mask(roots, self.n)
            dev = K - np.eye(self.n)
            off = np.where(mask, 0.0, dev)
            size = float(np.abs(off).max(initial=0.0))
            if size > self.params.support_tol * max(1.0, np.abs(K).max()):
                raise SupportViolation(
                    f"Stokes factor {target + 1} at pole {self.index} has off-support entries of size {size:.2e}")
            proj = max(proj, size)
            Ks[target] = np.eye(self.n) + np.where(mask, dev, 0.0)
        info = {
            "projection_norm": proj,
            "radius": R,
            "matching_radii": [self.frame_at(s, R)[1] for s in range(1, r + 1)],
            "truncation_estimates": [self.frame_at(s, R)[2] for s in range(1, r + 1)],
        }
        return Ks, info

    def stokes(self) -> StokesMatrices:
        n, k = self.n, self.k
        exponent_prime = self.nf.exponent[np.argsort(self.pi)]
        if k < 2:
            return StokesMatrices((), self.P, exponent_prime, {"radius": self.radius})
        if not self.labels:
            S = tuple(np.eye(n, dtype=complex) for _ in range(2 * k - 2))
            return StokesMatrices(S, self.P, exponent_prime, {"radius": self.radius})
        Ks, info = self.stokes_factors()
        l = self.aset.half_period_length
        S = []
        for i in range(2 * k - 2):
            prod = np.eye(n, dtype=complex)
            for K in Ks[i * l:(i + 1) * l]:
                prod = K @ prod
            S.append(self.P.T @ prod @ self.P)
        return StokesMatrices(tuple(S), self.P.copy(), exponent_prime, info)

    def loop_monodromy(self) -> np.ndarray:
        """Monodromy of the base-sector frame around a circle of radius
        ``loop_fraction * radius``, integrated directly."""
        R2 = self.params.loop_fraction * self.radius
        frame, _, _ = self.frame_at(0, R2)
        loop = circle_path(self.center, R2, self.base_bisector, TWO_PI, self.params.arc_pieces)
        moved = integrate_linear(self._coeff, loop, frame, self.params.tol)
        return np.linalg.solve(frame, moved)


def canonical_frame(conn: MeromorphicConnection, pole: int, sector: int, N: int,
                    r_match: float, branch: float, g0=None,
                    match_tol: float = 1e-14) -> tuple[np.ndarray, float]:
    """Truncated formal solution on a sector bisector at radius ``r_match``.

    ``branch`` is the base angle fixing the log branch; ``sector`` counts sectors
    turning positively from it (``0`` is the base sector).  Returns the frame and
    the truncation estimate.
    """
    params = MonodromyParams(truncation=N, r_match=r_match, match_tol=match_tol)
    loc = LocalSolutions(conn, pole, branch, params, g0=g0)
    s = loc.sector_count if sector == 0 else sector
    arg = loc.bisectors[s - 1]
    est = loc.truncation_estimate(r_match, arg)
    if est > match_tol:
        raise MatchingUnreliable(f"truncation estimate {est:.2e} exceeds {match_tol:.1e}")
    return loc.formal_frame(r_match, arg), est


def stokes_numeric(conn: MeromorphicConnection, pole: int,
                   params: MonodromyParams = MonodromyParams(),
                   base_angle: float | None = None, g0=None) -> StokesMatrices:
    """Stokes matrices at one pole (base sector chosen by ``base_angle``)."""
    if base_angle is None:
        base_angle = _default_base_angle(conn, pole, None, None)
    return LocalSolutions(conn, pole, base_angle, params, g0=g0).stokes()


def loop_monodromy(conn: MeromorphicConnection, pole: int,
                   params: MonodromyParams = MonodromyParams(),
                   base_angle: float | None = None, g0=None) -> np.ndarray:
    if base_angle is None:
        base_angle = _default_base_angle(conn, pole, None, None)
    return LocalSolutions(conn, pole, base_angle, params, g0=g0).loop_monodromy()


# ---------------------------------------------------------------- tentacles


@dataclass(frozen=True)
class Tentacles:
    """Base point, per-pole base angles (unwrapped, fixing the log branch), disc
    radii, paths from the base point and the order used in the product relation."""

    p0: complex
    base_angles: tuple[float, ...]
    radii: tuple[float, ...]
    paths: tuple[np.ndarray, ...]
    order: tuple[int, ...]

    def to_json(self) -> dict:
        return {
            "p0": complex_to_json(self.p0),
            "base_angles": list(self.base_angles),
            "radii": list(self.radii),
            "order": list(self.order),
        }


def _sector_bisectors_mod(conn: MeromorphicConnection, i: int, g0) -> list[float]:
    part = conn.parts[i]
    if part.order < 2 or part.rank < 2:
        return []
    _, nf = formal_diagonalize(part, g0, part.order)
    aset = anti_stokes(nf)
    dirs = list(aset.directions)
    out = []
    for s, d in enumerate(dirs):
        nxt = dirs[(s + 1) % len(dirs)] + (TWO_PI if s + 1 == len(dirs) else 0.0)
        out.append(0.5 * (d + nxt))
    return out


def _default_base_angle(conn, i, reference, g0) -> float:
    ref = reference
    if ref is None:
        others = [a for j, a in enumerate(conn.positions) if j != i]
        if others:
            c = np.mean(others)
            ref = float(np.angle(conn.positions[i] - c)) + 0.5
        else:
            ref = 0.3
    g0 = conn.framing(i) if g0 is None else g0
    bis = _sector_bisectors_mod(conn, i, g0)
    if not bis:
        return float(ref)
    best = min(bis, key=lambda b: abs(_wrap(b - ref)))
    return float(ref + _wrap(best - ref))


def _segment_distance(p: complex, a: complex, b: complex) -> float:
    ab = b - a
    t = np.clip(((p - a) * np.conj(ab)).real / max(abs(ab) ** 2, 1e-300), 0.0, 1.0)
    return abs(p - (a + t * ab))


_P0_DIRECTIONS = (-np.pi / 2 + 0.1234, np.pi / 2 + 0.2345, 0.3456, np.pi + 0.4567,
                  -np.pi / 4 + 0.05, 3 * np.pi / 4 + 0.07, np.pi / 4 + 0.09, -3 * np.pi / 4 + 0.11)


def default_tentacles(conn: MeromorphicConnection, params: MonodromyParams = MonodromyParams(),
                      p0: complex | None = None,
                      reference_angles: Sequence[float] | None = None) -> Tentacles:
    """Far base point, straight paths to each pole's disc, then an arc inside the disc
    to the base-sector bisector nearest the arrival point (or to ``reference_angles``)."""
    m = len(conn.positions)
    pos = np.asarray(conn.positions)
    radii = tuple(disc_radius(conn, i, params.disc_fraction) for i in range(m))
    centroid = complex(pos.mean())
    spread = float(np.abs(pos - centroid).max()) + max(radii)
    if p0 is not None:
        candidates = [complex(p0)]
    else:
        extra = [-np.pi + TWO_PI * (j + 0.37) / 48 for j in range(48)]
        candidates = [centroid + (4 * spread + 2) * np.exp(1j * a)
                      for a in (*_P0_DIRECTIONS, *extra)]

    def clearance(cand: complex) -> float:
        worst = np.inf
        for i in range(m):
            near = pos[i] + radii[i] * np.exp(1j * np.angle(cand - pos[i]))
            for j in range(m):
                if j != i:
                    worst = min(worst, _segment_distance(pos[j], cand, near) / radii[j])
        return worst

    scores = [clearance(c) for c in candidates]
    good = [c for c, sc in zip(candidates, scores) if sc >= 1.5]
    if good:
        chosen = good[0]
    else:
        best = int(np.argmax(scores))
        if scores[best] < 1.0:
            raise TentacleDegenerate("no base point gives paths that avoid the other poles")
        chosen = candidates[best]
    angles, paths = [], []
    for i in range(m):
        phi_near = float(np.angle(chosen - pos[i]))
        ref = phi_near if reference_angles is None else float(reference_angles[i])
        theta = _default_base_angle(conn, i, ref, None)
        near = pos[i] + radii[i] * np.exp(1j * phi_near)
        sweep = _wrap(theta - phi_near)
        verts = [chosen, near]
        if abs(sweep) > 1e-12:
            arc = circle_path(pos[i], radii[i], phi_near, sweep, params.arc_pieces)
            verts.extend(arc[1:])
        angles.append(theta)
        paths.append(np.array(verts))
    rel = [float(np.angle((pos[i] - chosen) / (centroid - chosen))) if m > 1 else 0.0
           for i in range(m)]
    order = tuple(int(i) for i in np.argsort(rel, kind="stable"))
    return Tentacles(chosen, tuple(angles), radii, tuple(paths), order)


# ---------------------------------------------------------------- global data


@dataclass
class PoleMonodromy:
    C: np.ndarray
    stokes: StokesMatrices
    rho: np.ndarray

    def to_json(self) -> dict:
        return {
            "C": complex_to_json(self.C),
            "S": [complex_to_json(s) for s in self.stokes.S],
            "Lambda": complex_to_json(self.stokes.Lambda_prime),
            "P": [[int(round(x.real)) for x in row] for row in self.stokes.P],
        }


@dataclass
class MonodromyData:
    poles: list[PoleMonodromy]
    order: tuple[int, ...]
    residual: float
    degree: complex
    tentacles: Tentacles
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "poles": [p.to_json() for p in self.poles],
            "relation_residual": self.residual,
            "degree": complex_to_json(self.degree),
            "relation_order": list(self.order),
            "tentacles": self.tentacles.to_json(),
            "diagnostics": self.diagnostics,
        }


def monodromy_data(conn: MeromorphicConnection, tentacles: Tentacles | None = None,
                   params: MonodromyParams = MonodromyParams()) -> MonodromyData:
    """Connection matrices, Stokes matrices and exponents for every pole.

    The base frame at ``p0`` is the identity; ``C_i = P_i^-1 Phi_0^-1 Y`` with
    ``Y`` the base frame transported to the matching point of pole ``i`` and
    ``Phi_0`` the canonical frame of the base sector there.
    """
    if tentacles is None:
        tentacles = default_tentacles(conn, params)
    n = conn.rank
    poles = []
    diag: dict = {"poles": []}
    for i in range(len(conn.positions)):
        loc = LocalSolutions(conn, i, tentacles.base_angles[i], params, radius=tentacles.radii[i])
        sm = loc.stokes()
        frame, r_m, est = loc.frame_at(0, tentacles.radii[i])
        Y = integrate_linear(conn, tentacles.paths[i], np.eye(n), params.tol)
        C = loc.P.T @ np.linalg.solve(frame, Y)
        rho = np.linalg.solve(C, sm.product() @ mat_exp(TWO_PI * 1j * sm.Lambda_prime) @ C)
        poles.append(PoleMonodromy(C, sm, rho))
        entry = {"order": loc.k, "matching_radius": r_m, "truncation_estimate": est}
        entry.update({k: v for k, v in sm.diagnostics.items() if k in ("projection_norm",)})
        diag["poles"].append(entry)
    prod = np.eye(n, dtype=complex)
    for i in tentacles.order:
        prod = poles[i].rho @ prod
    residual = float(np.linalg.norm(prod - np.eye(n)))
    degree = complex(sum(np.sum(p.stokes.exponent) for p in poles))
    return MonodromyData(poles, tentacles.order, residual, degree, tentacles, diag)


def degree_of(md: MonodromyData) -> float:
    """Sum of the traces of the formal exponents (real part; the imaginary part is
    kept in ``md.degree``)."""
    return float(md.degree.real)


def degree_by_quadrature(conn: MeromorphicConnection, fraction: float = 0.3,
                         points: int = 256) -> complex:
    """``(1/2 pi i) sum_i (loop integral of tr A dz)`` on small circles around each pole."""
    total = 0.0j
    theta = TWO_PI * np.arange(points) / points
    for i, a in enumerate(conn.positions):
        r = disc_radius(conn, i, fraction)
        zs = a + r * np.exp(1j * theta)
        vals = np.array([np.trace(conn(z)) for z in zs])
        total += np.mean(vals * r * np.exp(1j * theta))
    return complex(total)


def trace_invariants(md: MonodromyData) -> np.ndarray:
    """Traces of ordered products of the loop monodromies over all nonempty subsets
    (increasing relation order).  They are invariant under overall conjugation."""
    order = md.order
    rhos = [md.poles[i].rho for i in order]
    m = len(rhos)
    out = []
    for mask in range(1, 2 ** m):
        prod = np.eye(rhos[0].shape[0], dtype=complex)
        for s in range(m):
            if mask >> s & 1:
                prod = rhos[s] @ prod
        out.append(np.trace(prod))
    return np.array(out)


def framed_invariants(md: MonodromyData) -> np.ndarray:
    """Entries of all Stokes matrices and of ``C_i C_0^-1``.  They do not depend on
    the base frame, but do depend on the framings and on the log branches, so they
    are comparable only when both are followed continuously."""
    parts = [s.ravel() for p in md.poles for s in p.stokes.S]
    C0inv = np.linalg.inv(md.poles[0].C)
    parts += [(p.C @ C0inv).ravel() for p in md.poles[1:]]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=complex)


def torus_equivariance_check(conn: MeromorphicConnection, t, poles: Sequence[int] | None = None,
                             params: MonodromyParams = MonodromyParams(),
                             tentacles: Tentacles | None = None, tol: float = 1e-8) -> dict:
    """Recompute the data with framings ``t g0`` at the chosen poles and compare with
    the predicted transformation ``C -> t' C``, ``S -> t' S t'^-1`` where
    ``t' = P^-1 t P``."""
    t = np.asarray(t, dtype=complex)
    if t.ndim == 1:
        t = np.diag(t)
    m = len(conn.positions)
    poles = list(range(m)) if poles is None else list(poles)
    framed = conn.with_framings([conn.framing(i) for i in range(m)])
    if tentacles is None:
        tentacles = default_tentacles(framed, params)
    base = monodromy_data(framed, tentacles, params)
    twisted_conn = framed.with_framings(
        [t @ framed.framings[i] if i in poles else framed.framings[i] for i in range(m)])
    twisted = monodromy_data(twisted_conn, tentacles, params)
    worst = 0.0
    for i in range(m):
        P = base.poles[i].stokes.P
        tp = P.T @ t @ P if i in poles else np.eye(len(t))
        tpinv = np.linalg.inv(tp)
        predC = tp @ base.poles[i].C
        scale = max(1.0, np.abs(predC).max())
        worst = max(worst, np.abs(predC - twisted.poles[i].C).max() / scale)
        for s0, s1 in zip(base.poles[i].stokes.S, twisted.poles[i].stokes.S):
            pred = tp @ s0 @ tpinv
            worst = max(worst, np.abs(pred - s1).max() / max(1.0, np.abs(pred).max()))
    return {"max_deviation": float(worst), "passed": bool(worst <= tol),
            "poles": poles, "tolerance": tol}
