"""Truncated Laurent series with scalar or square-matrix coefficients.

A series stores ``coeffs[i]`` as the coefficient of ``z**(valuation + i)``;
every coefficient up to ``order = valuation + len(coeffs) - 1`` is exact and
nothing beyond it is known.  Arithmetic propagates that truncation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np


def _conv(a: np.ndarray, b: np.ndarray, length: int) -> np.ndarray:
    """First ``length`` coefficients of the Cauchy product (matrix-aware)."""
    matrix = a.ndim == 3
    out = np.zeros((length,) + (a.shape[1:] if matrix else ()), dtype=complex)
    for t in range(length):
        lo = max(0, t - len(b) + 1)
        hi = min(t, len(a) - 1)
        for s in range(lo, hi + 1):
            out[t] += a[s] @ b[t - s] if matrix else a[s] * b[t - s]
    return out


@dataclass(frozen=True)
class LaurentSeries:
    valuation: int
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=complex))

    # bookkeeping ----------------------------------------------------------
    @property
    def order(self) -> int:
        return self.valuation + len(self.coeffs) - 1

    @property
    def is_matrix(self) -> bool:
        return self.coeffs.ndim == 3

    def __getitem__(self, power: int):
        if power > self.order:
            raise IndexError(f"coefficient of z^{power} is beyond the truncation order {self.order}")
        if power < self.valuation:
            return np.zeros(self.coeffs.shape[1:], dtype=complex) if self.is_matrix else 0j
        return self.coeffs[power - self.valuation]

    def powers(self) -> range:
        return range(self.valuation, self.order + 1)

    def truncate(self, order: int) -> "LaurentSeries":
        if order > self.order:
            raise ValueError(f"cannot extend truncation order {self.order} to {order}")
        return LaurentSeries(self.valuation, self.coeffs[: order - self.valuation + 1])

    def shift(self, k: int) -> "LaurentSeries":
        """Multiply by z**k."""
        return LaurentSeries(self.valuation + k, self.coeffs)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        pw = np.array(list(self.powers()))
        terms = z[..., None] ** pw
        if self.is_matrix:
            return np.einsum("...i,ijk->...jk", terms, self.coeffs)
        return terms @ self.coeffs

    # arithmetic -------------------------------------------------------------
    def _padded(self, val: int, order: int) -> np.ndarray:
        shape = (order - val + 1,) + self.coeffs.shape[1:]
        out = np.zeros(shape, dtype=complex)
        lo, hi = max(val, self.valuation), min(order, self.order)
        if hi >= lo:
            out[lo - val: hi - val + 1] = self.coeffs[lo - self.valuation: hi - self.valuation + 1]
        return out

    def __add__(self, other):
        if not isinstance(other, LaurentSeries):
            other = LaurentSeries(0, np.asarray([other], dtype=complex) if not self.is_matrix
                                  else np.asarray(other, dtype=complex)[None])
        val = min(self.valuation, other.valuation)
        order = min(self.order, other.order)
        return LaurentSeries(val, self._padded(val, order) + other._padded(val, order))

    __radd__ = __add__

    def __neg__(self):
        return LaurentSeries(self.valuation, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, LaurentSeries):
            return LaurentSeries(self.valuation, self.coeffs * other)
        val = self.valuation + other.valuation
        order = min(self.order + other.valuation, other.order + self.valuation)
        length = order - val + 1
        if self.is_matrix != other.is_matrix:
            a = self.coeffs if self.is_matrix else self.coeffs[:, None, None] * np.eye(other.coeffs.shape[1])
            b = other.coeffs if other.is_matrix else other.coeffs[:, None, None] * np.eye(self.coeffs.shape[1])
        else:
            a, b = self.coeffs, other.coeffs
        return LaurentSeries(val, _conv(a, b, length))

    __rmul__ = __mul__

    # scalar series operations ----------------------------------------------
    def derivative(self) -> "LaurentSeries":
        pw = np.array(list(self.powers()))
        return LaurentSeries(self.valuation - 1, self.coeffs * pw)

    def inverse(self) -> "LaurentSeries":
        """Multiplicative inverse; the leading coefficient must be nonzero."""
        if self.is_matrix:
            raise TypeError("inverse is implemented for scalar series only")
        a = self.coeffs
        if a[0] == 0:
            raise ZeroDivisionError("leading coefficient is zero")
        L = len(a)
        inv = np.zeros(L, dtype=complex)
        inv[0] = 1.0 / a[0]
        for t in range(1, L):
            inv[t] = -np.dot(a[1: t + 1], inv[t - 1:: -1][:t]) / a[0]
        return LaurentSeries(-self.valuation, inv)

    def log(self) -> "LaurentSeries":
        """Logarithm of a series with valuation 0, via the integral of h'/h.

        The constant term is the principal logarithm of the leading coefficient.
        """
        if self.valuation != 0:
            raise ValueError("logarithm needs a series of valuation 0")
        if self.is_matrix:
            raise TypeError("log is implemented for scalar series only")
        q = self.derivative() * self.inverse()
        # q has valuation >= 0 here (h' drops the constant); integrate term by term
        qc = q._padded(0, self.order - 1) if self.order >= 1 else np.zeros(0, dtype=complex)
        out = np.zeros(self.order + 1, dtype=complex)
        out[0] = np.log(self.coeffs[0])
        out[1:] = qc / np.arange(1, self.order + 1)
        return LaurentSeries(0, out)

    # matrix series operations ----------------------------------------------
    def det(self) -> "LaurentSeries":
        """Determinant of a square-matrix series.

        Uses Bird's division-free iteration in the ring of truncated power
        series, so no pivot needs to be invertible.
        """
        if not self.is_matrix:
            raise TypeError("det needs matrix coefficients")
        n = self.coeffs.shape[1]
        P = self.coeffs  # power series z^-v C, valuation 0
        L = len(P)
        X = P.copy()
        for _ in range(n - 1):
            mu = np.triu(X, 1)
            diag = np.einsum("tii->ti", X)
            suffix = np.cumsum(diag[:, ::-1], axis=1)[:, ::-1]
            idx = np.arange(n)
            mu[:, idx, idx] = 0.0
            mu[:, idx[:-1], idx[:-1]] = -suffix[:, 1:]
            X = _conv(mu, P, L)
        d = (-1) ** (n - 1) * X[:, 0, 0]
        return LaurentSeries(n * self.valuation, d)

    def det_leibniz(self) -> "LaurentSeries":
        """Determinant by the explicit permutation sum (for cross-checks, small n)."""
        n = self.coeffs.shape[1]
        L = len(self.coeffs)
        total = np.zeros(L, dtype=complex)
        for perm in permutations(range(n)):
            sign = _perm_sign(perm)
            prod = self.coeffs[:, 0, perm[0]]
            for i in range(1, n):
                prod = _conv(prod, self.coeffs[:, i, perm[i]], L)
            total += sign * prod
        return LaurentSeries(n * self.valuation, total)


def _perm_sign(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def from_matrices(valuation: int, mats) -> LaurentSeries:
    return LaurentSeries(valuation, np.asarray(mats, dtype=complex))

