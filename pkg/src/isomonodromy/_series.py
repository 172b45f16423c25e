"""Truncated matrix-valued power and Laurent series.

A power series is an array of shape ``(L, n, n)`` holding the coefficients of
``z^0 .. z^(L-1)``.  A :class:`Laurent` series additionally carries the power of
its first coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


def mul(a: np.ndarray, b: np.ndarray, length: int | None = None) -> np.ndarray:
    """Product of two power series, truncated to ``length`` terms."""
    if length is None:
        length = min(len(a), len(b))
    n = a.shape[1]
    out = np.zeros((length, n, n), dtype=complex)
    for i in range(min(len(a), length)):
        for j in range(min(len(b), length - i)):
            out[i + j] += a[i] @ b[j]
    return out


def inv(a: np.ndarray, length: int | None = None) -> np.ndarray:
    """Multiplicative inverse of a power series with invertible constant term."""
    if length is None:
        length = len(a)
    n = a.shape[1]
    a0inv = np.linalg.inv(a[0])
    out = np.zeros((length, n, n), dtype=complex)
    out[0] = a0inv
    for m in range(1, length):
        acc = np.zeros((n, n), dtype=complex)
        for j in range(1, min(m, len(a) - 1) + 1):
            acc += a[j] @ out[m - j]
        out[m] = -a0inv @ acc
    return out


def toeplitz(a: np.ndarray) -> np.ndarray:
    """Block lower-triangular Toeplitz matrix representing multiplication by ``a``
    in the truncated algebra ``gl_n(C[z]/z^L)``."""
    length, n, _ = a.shape
    big = np.zeros((length * n, length * n), dtype=complex)
    for i in range(length):
        for j in range(i + 1):
            big[i * n:(i + 1) * n, j * n:(j + 1) * n] = a[i - j]
    return big


def from_toeplitz(big: np.ndarray, n: int) -> np.ndarray:
    length = big.shape[0] // n
    return np.array([big[i * n:(i + 1) * n, 0:n] for i in range(length)])


def exp(a: np.ndarray) -> np.ndarray:
    """Exponential in the truncated algebra (exact up to rounding)."""
    n = a.shape[1]
    return from_toeplitz(scipy.linalg.expm(toeplitz(a)), n)


def evaluate(a: np.ndarray, z: complex) -> np.ndarray:
    """Horner evaluation of a power series at ``z``."""
    out = np.array(a[-1], dtype=complex)
    for coef in a[-2::-1]:
        out = out * z + coef
    return out


@dataclass
class Laurent:
    """Finite Laurent series ``sum_p c[p] z^(low + p)`` with matrix coefficients."""

    low: int
    c: np.ndarray

    @property
    def high(self) -> int:
        return self.low + len(self.c) - 1

    @property
    def n(self) -> int:
        return self.c.shape[1]

    def coeff(self, power: int) -> np.ndarray:
        idx = power - self.low
        if 0 <= idx < len(self.c):
            return self.c[idx]
        return np.zeros((self.n, self.n), dtype=complex)

    def __add__(self, other: "Laurent") -> "Laurent":
        low = min(self.low, other.low)
        high = max(self.high, other.high)
        c = np.zeros((high - low + 1, self.n, self.n), dtype=complex)
        c[self.low - low:self.high - low + 1] += self.c
        c[other.low - low:other.high - low + 1] += other.c
        return Laurent(low, c)

    def __sub__(self, other: "Laurent") -> "Laurent":
        return self + other.scale(-1.0)

    def scale(self, s: complex) -> "Laurent":
        return Laurent(self.low, self.c * s)

    def __matmul__(self, other: "Laurent") -> "Laurent":
        length = len(self.c) + len(other.c) - 1
        c = np.zeros((length, self.n, self.n), dtype=complex)
        for i, x in enumerate(self.c):
            for j, y in enumerate(other.c):
                c[i + j] += x @ y
        return Laurent(self.low + other.low, c)

    def truncate(self, high: int) -> "Laurent":
        keep = high - self.low + 1
        if keep <= 0:
            return Laurent(self.low, np.zeros((1, self.n, self.n), dtype=complex))
        return Laurent(self.low, self.c[:keep].copy())

    def principal(self) -> "Laurent":
        """Strictly negative powers only."""
        if self.low >= 0:
            return Laurent(-1, np.zeros((1, self.n, self.n), dtype=complex))
        return Laurent(self.low, self.c[: -self.low].copy() if self.high >= 0 else self.c.copy())

    def derivative(self) -> "Laurent":
        powers = np.arange(self.low, self.high + 1)
        return Laurent(self.low - 1, self.c * powers[:, None, None])

    @staticmethod
    def power_series(a: np.ndarray) -> "Laurent":
        return Laurent(0, np.asarray(a, dtype=complex))
