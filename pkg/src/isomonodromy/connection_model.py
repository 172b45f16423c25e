"""Meromorphic connections on the trivial bundle over the Riemann sphere.

A connection ``d - A`` is stored through its principal parts at finitely many
finite poles::

    A(z) = sum_i sum_{j=1..k_i} A^(i)_j dz / (z - a_i)^j

with no pole at infinity, which is the requirement that the residues sum to
zero.  The module also computes the formal normal form at a pole: the unique
formal gauge transformation ``ghat`` with ``ghat(0) = g_0`` taking the local
connection to ``dQ + Lambda dz/z`` with ``Q`` diagonal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb
from typing import Any, Sequence

import numpy as np

from . import _series
from .errors import (
    ConfigError,
    EigenvalueCollision,
    IncompatibleFraming,
    PoleEvaluation,
    TruncationTooShort,
    ValidationError,
)
from .matcore import eig_distinct, solve_ad_shift

__all__ = [
    "PolarDivisor",
    "PrincipalPart",
    "MeromorphicConnection",
    "FormalNormalForm",
    "ValidationReport",
    "validate",
    "evaluate",
    "formal_diagonalize",
    "default_framing",
    "framing_is_compatible",
    "connection_from_json",
    "connection_to_json",
    "complex_to_json",
    "complex_from_json",
]


@dataclass(frozen=True)
class PolarDivisor:
    """Pole positions with their orders."""

    positions: tuple[complex, ...]
    orders: tuple[int, ...]

    def __post_init__(self):
        if len(self.positions) != len(self.orders):
            raise ValidationError("positions and orders differ in length")
        if any(k < 1 for k in self.orders) or sum(self.orders) <= 0:
            raise ValidationError("pole orders must be positive")
        pts = np.asarray(self.positions, dtype=complex)
        if not np.all(np.isfinite(pts)):
            raise ValidationError("pole positions must be finite")
        for i in range(len(pts)):
            for j in range(i):
                if pts[i] == pts[j]:
                    raise ValidationError("pole positions must be distinct")


@dataclass(frozen=True)
class PrincipalPart:
    """Polar coefficients ``A_k, ..., A_1`` of ``dz/(z-a)^j``, leading one first."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex)
        if c.ndim == 2:
            c = c[None]
        if c.ndim != 3 or c.shape[1] != c.shape[2] or c.shape[0] < 1:
            raise ValidationError("principal part must have shape (k, n, n)")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def order(self) -> int:
        return self.coefficients.shape[0]

    @property
    def rank(self) -> int:
        return self.coefficients.shape[1]

    def coefficient(self, j: int) -> np.ndarray:
        """The matrix multiplying ``dz/(z-a)^j``."""
        return self.coefficients[self.order - j]

    @property
    def leading(self) -> np.ndarray:
        return self.coefficients[0]

    @property
    def residue(self) -> np.ndarray:
        return self.coefficients[-1]

    def conjugate(self, h) -> "PrincipalPart":
        """``h A h^-1`` coefficientwise."""
        h = np.asarray(h, dtype=complex)
        return PrincipalPart(h @ self.coefficients @ np.linalg.inv(h))


@dataclass(frozen=True)
class MeromorphicConnection:
    positions: np.ndarray
    parts: tuple[PrincipalPart, ...]
    framings: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=complex).reshape(-1)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        parts = tuple(p if isinstance(p, PrincipalPart) else PrincipalPart(p) for p in self.parts)
        object.__setattr__(self, "parts", parts)
        if len(parts) != len(pos):
            raise ValidationError("one principal part per pole is required")
        if len({p.rank for p in parts}) > 1:
            raise ValidationError("all principal parts must have the same rank")
        if self.framings is not None:
            fr = tuple(np.array(g, dtype=complex) for g in self.framings)
            if len(fr) != len(pos):
                raise ValidationError("one framing per pole is required")
            object.__setattr__(self, "framings", fr)

    @property
    def divisor(self) -> PolarDivisor:
        return PolarDivisor(tuple(complex(a) for a in self.positions),
                            tuple(p.order for p in self.parts))

    @property
    def rank(self) -> int:
        return self.parts[0].rank

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(p.order for p in self.parts)

    @property
    def scale(self) -> float:
        return max(1.0, max(np.abs(p.coefficients).max() for p in self.parts))

    def __call__(self, z: complex) -> np.ndarray:
        return evaluate(self, z)

    def framing(self, i: int) -> np.ndarray:
        if self.framings is not None:
            return self.framings[i]
        return default_framing(self.parts[i])

    def with_framings(self, framings: Sequence[np.ndarray]) -> "MeromorphicConnection":
        return MeromorphicConnection(self.positions, self.parts, tuple(framings))

    def local_tail(self, i: int, count: int) -> np.ndarray:
        """Holomorphic coefficients at ``a_i`` of the other poles' principal parts.

        Returns ``T`` of shape ``(count, n, n)`` with ``A(z) = PP_i + sum_p T[p] z_i^p``.
        """
        n = self.rank
        out = np.zeros((count, n, n), dtype=complex)
        ai = self.positions[i]
        for j, part in enumerate(self.parts):
            if j == i:
                continue
            delta = ai - self.positions[j]
            for l in range(1, part.order + 1):
                coef = part.coefficient(l)
                for p in range(count):
                    binom = (-1) ** p * comb(l + p - 1, p)
                    out[p] += binom * delta ** (-l - p) * coef
        return out


@dataclass(frozen=True)
class FormalNormalForm:
    """Diagonal formal type ``dQ + Lambda dz/z`` at a pole of order ``k``.

    ``irregular[m]`` holds the diagonal of the coefficient of ``dz/z^(k-m)`` for
    ``m = 0 .. k-2``; ``exponent`` is the diagonal of ``Lambda``.  ``Q`` has zero
    constant term: ``Q = sum_{j=2..k} A0_j z^(1-j)/(1-j)``.
    """

    order: int
    irregular: np.ndarray
    exponent: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.exponent)

    @property
    def Lambda(self) -> np.ndarray:
        return np.diag(self.exponent)

    def coefficient(self, j: int) -> np.ndarray:
        """Diagonal of the coefficient of ``dz/z^j`` (``j >= 2``)."""
        return self.irregular[self.order - j]

    def q_coefficients(self) -> np.ndarray:
        """Rows ``c_p`` with ``Q = sum_{p=1..k-1} c_p z^-p`` (row ``p-1``)."""
        k = self.order
        out = np.zeros((max(k - 1, 0), self.rank), dtype=complex)
        for p in range(1, k):
            out[p - 1] = self.coefficient(p + 1) / (-p)
        return out

    def Q(self, z: complex) -> np.ndarray:
        coeffs = self.q_coefficients()
        return sum((coeffs[p - 1] * z ** (-p) for p in range(1, self.order)),
                   np.zeros(self.rank, dtype=complex))

    def leading_q(self) -> np.ndarray:
        """Coefficient of ``z^-(k-1)`` in each ``q_i``."""
        if self.order < 2:
            return np.zeros(self.rank, dtype=complex)
        return self.q_coefficients()[self.order - 2]

    def polar_part(self) -> np.ndarray:
        """The normal form as a principal-part array (leading first)."""
        k = self.order
        out = np.zeros((k, self.rank, self.rank), dtype=complex)
        for m in range(k - 1):
            out[m] = np.diag(self.irregular[m])
        out[k - 1] = np.diag(self.exponent)
        return out


@dataclass
class ValidationReport:
    passed: bool
    residue_sum_norm: float
    scale: float
    poles: list[dict[str, Any]] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "residue_sum_norm": self.residue_sum_norm,
            "scale": self.scale,
            "poles": self.poles,
        }


def _mod_z_gap(values: np.ndarray) -> float:
    n = len(values)
    best = np.inf
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            d = values[a] - values[b]
            best = min(best, abs(d - np.round(d.real)))
    return best


def pole_genericity(part: PrincipalPart, gap_tol: float = 1e-8) -> tuple[bool, str]:
    """Whether a principal part is generic, with a reason when it is not."""
    if part.order >= 2:
        try:
            eig_distinct(part.leading, gap_tol * max(np.linalg.norm(part.leading), 1e-300))
        except EigenvalueCollision as exc:
            return False, f"leading coefficient has repeated eigenvalues ({exc})"
        return True, "leading coefficient has distinct eigenvalues"
    try:
        vals, _ = eig_distinct(part.residue, gap_tol * max(np.linalg.norm(part.residue), 1e-300))
    except EigenvalueCollision as exc:
        return False, f"residue has repeated eigenvalues ({exc})"
    if part.rank > 1 and _mod_z_gap(vals) <= gap_tol:
        return False, "residue eigenvalues coincide modulo integers"
    return True, "residue eigenvalues distinct modulo integers"


def validate(conn: MeromorphicConnection, tol: float = 1e-10) -> ValidationReport:
    """Genericity at every pole and the residue-sum constraint."""
    total = sum(p.residue for p in conn.parts)
    scale = conn.scale
    res_norm = float(np.linalg.norm(total))
    poles = []
    ok = res_norm <= tol * scale
    for i, part in enumerate(conn.parts):
        generic, reason = pole_genericity(part)
        entry = {"index": i, "order": part.order, "generic": generic, "reason": reason}
        if conn.framings is not None:
            entry["framing_compatible"] = framing_is_compatible(part, conn.framings[i])
            generic = generic and entry["framing_compatible"]
        poles.append(entry)
        ok = ok and generic
    return ValidationReport(bool(ok), res_norm, scale, poles)


def evaluate(conn: MeromorphicConnection, z: complex) -> np.ndarray:
    """The ``dz`` coefficient of the connection at a non-pole ``z``."""
    n = conn.rank
    out = np.zeros((n, n), dtype=complex)
    for a, part in zip(conn.positions, conn.parts):
        w = z - a
        if w == 0:
            raise PoleEvaluation(f"z = {z} is a pole")
        inv = 1.0 / w
        acc = np.zeros((n, n), dtype=complex)
        # Horner in 1/w:  A_1 w^-1 + ... + A_k w^-k = w^-1 (A_1 + w^-1 (A_2 + ...))
        for coef in part.coefficients:
            acc = (acc + coef) * inv
        out += acc
    return out


def default_framing(part: PrincipalPart) -> np.ndarray:
    """A compatible framing: the inverse eigenvector matrix of the leading term.

    Eigenvalues are ordered lexicographically so the result is deterministic.
    """
    _, V = eig_distinct(part.leading)
    return np.linalg.inv(V)


def framing_is_compatible(part: PrincipalPart, g0, tol: float = 1e-10) -> bool:
    g0 = np.asarray(g0, dtype=complex)
    lead = g0 @ part.leading @ np.linalg.inv(g0)
    off = lead - np.diag(np.diag(lead))
    return bool(np.linalg.norm(off) <= tol * max(np.linalg.norm(part.leading), 1e-300))


def formal_diagonalize(
    part: PrincipalPart,
    g0,
    N: int,
    tail: np.ndarray | None = None,
    compat_tol: float = 1e-8,
) -> tuple[np.ndarray, FormalNormalForm]:
    """Formal gauge transformation to diagonal normal form.

    Returns ``ghat`` of shape ``(N+1, n, n)``, the coefficients of
    ``ghat(z) = g0 (1 + h_1 z + ... + h_N z^N)``, and the normal form, such that
    ``ghat A ghat^-1 + dghat ghat^-1 = dQ + Lambda dz/z + O(z^(N-k)) dz``.

    ``tail`` carries the holomorphic coefficients of the local connection
    (coefficient of ``z^p dz`` in row ``p``); they are needed for jets of order
    ``>= k`` and default to zero.
    """
    k = part.order
    n = part.rank
    if N < k:
        raise TruncationTooShort(f"truncation N={N} is below the pole order {k}")
    g0 = np.asarray(g0, dtype=complex)
    g0inv = np.linalg.inv(g0)
    lead = g0 @ part.leading @ g0inv
    if np.linalg.norm(lead - np.diag(np.diag(lead))) > compat_tol * max(np.linalg.norm(lead), 1e-300):
        raise IncompatibleFraming("g0 does not diagonalize the leading coefficient")
    M = N + k - 1 if k >= 2 else N
    # local coefficients B_m of z^(m-k), conjugated by g0
    B = np.zeros((M + 1, n, n), dtype=complex)
    B[:k] = part.coefficients
    if tail is not None:
        count = min(len(tail), M + 1 - k)
        B[k:k + count] = tail[:count]
    B = g0 @ B @ g0inv
    D0 = np.diag(np.diag(B[0]))
    H = np.zeros((M + 1, n, n), dtype=complex)
    H[0] = np.eye(n)
    D = np.zeros((M + 1, n, n), dtype=complex)
    D[0] = D0
    if k >= 2:
        for m in range(1, M + 1):
            R = B[m].copy()
            for j in range(1, m):
                R += H[j] @ B[m - j] - D[m - j] @ H[j]
            if m - k + 1 >= 1:
                R += (m - k + 1) * H[m - k + 1]
            D[m] = np.diag(np.diag(R))
            H[m] = solve_ad_shift(D0, R - D[m], 0.0)
        # remove the holomorphic diagonal terms with exp(f), f' = -D_hol, f(0) = 0
        f = np.zeros((N + 1, n, n), dtype=complex)
        for m in range(k, M + 1):
            p = m - k + 1
            if p <= N:
                f[p] = -D[m] / p
        E = _series.exp(f)
        ghat = _series.mul(E, H[:N + 1], N + 1) @ g0
        irregular = np.array([np.diag(D[m]) for m in range(k - 1)]).reshape(k - 1, n)
        exponent = np.diag(D[k - 1]).copy()
    else:
        for m in range(1, M + 1):
            R = B[m].copy()
            for j in range(1, m):
                R += H[j] @ B[m - j]
            H[m] = solve_ad_shift(D0, R, -m)
        ghat = H[:N + 1] @ g0
        irregular = np.zeros((0, n), dtype=complex)
        exponent = np.diag(D0).copy()
    return ghat, FormalNormalForm(k, irregular, exponent)


# ---------------------------------------------------------------- JSON


def complex_to_json(x):
    """Complex scalars become ``[re, im]``; arrays become nested lists of pairs."""
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 0:
        return [float(arr.real), float(arr.imag)]
    return [complex_to_json(v) for v in arr]


def complex_from_json(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.shape[-1:] != (2,):
        raise ConfigError("complex numbers must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def connection_from_json(document: dict[str, Any]) -> MeromorphicConnection:
    """Build a connection from the documented JSON schema."""
    try:
        n = int(document["rank"])
        positions, parts = [], []
        for pole in document["poles"]:
            positions.append(complex(*complex_from_json(pole["position"]).reshape(-1)[:1]))
            coeffs = complex_from_json(pole["principal_part"])
            k = int(pole.get("order", coeffs.shape[0]))
            if coeffs.shape != (k, n, n):
                raise ConfigError(f"principal part has shape {coeffs.shape}, expected {(k, n, n)}")
            parts.append(PrincipalPart(coeffs))
        framings = None
        if document.get("framings") is not None:
            framings = tuple(complex_from_json(g) for g in document["framings"])
        return MeromorphicConnection(np.array(positions), tuple(parts), framings)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed connection specification: {exc}") from exc


def connection_to_json(conn: MeromorphicConnection) -> dict[str, Any]:
    out: dict[str, Any] = {
        "rank": conn.rank,
        "poles": [
            {
                "position": complex_to_json(a),
                "order": part.order,
                "principal_part": complex_to_json(part.coefficients),
            }
            for a, part in zip(conn.positions, conn.parts)
        ],
    }
    if conn.framings is not None:
        out["framings"] = [complex_to_json(g) for g in conn.framings]
    return out


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)
