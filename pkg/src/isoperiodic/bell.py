"""Power sums over branch points and the Bell-type polynomials built from them.

With Sigma_k = sum_j (u_j - y0)^{-k} over the finite branch points
u_j in {0, 1, x}, the y0-derivatives of omega(Q0) are
omega(Q0) * L_l(Sigma_1, ..., Sigma_l).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import PartitionBoundExceeded, PoleAtRamification, PoleCollision

__all__ = [
    "SigmaVector",
    "BellTable",
    "sigma_vector",
    "bell_table_recursive",
    "bell_explicit",
    "partitions",
    "ratio_derivative",
    "bell_table",
    "MAX_EXPLICIT_ORDER",
]

MAX_EXPLICIT_ORDER = 12
_POLE_TOL = 1e-8


@dataclass(frozen=True)
class SigmaVector:
    """Sigma_1..Sigma_N; ``values[k-1]`` holds Sigma_k."""

    values: np.ndarray
    x: complex | None = None
    y0: complex | None = None

    def __getitem__(self, k: int) -> complex:
        if k < 1:
            raise IndexError("Sigma is indexed from 1")
        return complex(self.values[k - 1])

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def from_values(cls, values: Sequence[complex]) -> "SigmaVector":
        return cls(np.asarray(values, dtype=complex))


@dataclass(frozen=True)
class BellTable:
    """L_0..L_N evaluated on a SigmaVector."""

    values: np.ndarray
    sigma: SigmaVector

    def __getitem__(self, l: int) -> complex:
        return complex(self.values[l])

    def __len__(self) -> int:
        return len(self.values)

    @property
    def N(self) -> int:
        return len(self.values) - 1


def sigma_vector(x: complex, y0: complex, N: int) -> SigmaVector:
    """Sigma_k = (-y0)^{-k} + (1-y0)^{-k} + (x-y0)^{-k} for k = 1..N."""
    if N < 1:
        raise ValueError("N must be at least 1")
    x, y0 = complex(x), complex(y0)
    d = np.array([-y0, 1 - y0, x - y0])
    if np.min(np.abs(d)) < _POLE_TOL:
        raise PoleAtRamification(f"y0={y0} coincides with a branch point")
    k = np.arange(1, N + 1)[:, None]
    return SigmaVector(np.sum(d[None, :] ** (-k), axis=1), x, y0)


def bell_table_recursive(sigma: SigmaVector, N: int) -> BellTable:
    """L_0 = 1, L_{n+1} = sum_{k=0}^n n!/(2 (n-k)!) L_{n-k} Sigma_{k+1}."""
    if N < 0:
        raise ValueError("N must be non-negative")
    if len(sigma) < N:
        raise ValueError(f"need Sigma_1..Sigma_{N}, got {len(sigma)} values")
    L = np.zeros(N + 1, dtype=complex)
    L[0] = 1.0
    s = sigma.values
    for n in range(N):
        falling = 1.0  # n!/(n-k)!
        acc = 0j
        for k in range(n + 1):
            acc += falling * L[n - k] * s[k]
            falling *= n - k
        L[n + 1] = 0.5 * acc
    return BellTable(L, sigma)


def partitions(l: int) -> Iterator[tuple[int, ...]]:
    """Multiplicity vectors (p_1..p_l) with p_1 + 2 p_2 + ... + l p_l = l."""

    def rec(remaining: int, part: int) -> Iterator[list[int]]:
        if part == 0:
            if remaining == 0:
                yield []
            return
        for p in range(remaining // part, -1, -1):
            for rest in rec(remaining - p * part, part - 1):
                yield rest + [p]

    for mult in rec(l, l):
        yield tuple(mult)


def bell_explicit(l: int, sigma: SigmaVector) -> complex:
    """L_l from its partition sum.

    l! * sum prod_k Sigma_k^{p_k} / (2^{sum p_k} prod_k p_k! k^{p_k}).
    """
    if l < 0:
        raise ValueError("l must be non-negative")
    if l > MAX_EXPLICIT_ORDER:
        raise PartitionBoundExceeded(f"explicit partition sum is capped at l={MAX_EXPLICIT_ORDER}")
    if l == 0:
        return 1.0 + 0j
    if len(sigma) < l:
        raise ValueError(f"need Sigma_1..Sigma_{l}")
    total = 0j
    for mult in partitions(l):
        term = 1.0 + 0j
        denom = 1.0
        for k, p in enumerate(mult, start=1):
            if p:
                term *= sigma[k] ** p
                denom *= 2.0**p * math.factorial(p) * float(k) ** p
        total += term / denom
    return math.factorial(l) * total


def ratio_derivative(n: int, x: complex, y0: complex, bell: BellTable) -> complex:
    """D_n = (1/omega(Q0)) d^n/dy0^n [omega(Q0)/(x - y0)].

    By Leibniz, D_n = sum_{k=0}^n n!/(n-k)! L_{n-k} / (x - y0)^{k+1}.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if len(bell) < n + 1:
        raise ValueError(f"bell table must hold L_0..L_{n}")
    d = complex(x) - complex(y0)
    if abs(d) < _POLE_TOL:
        raise PoleCollision(f"y0={y0} collides with x={x}")
    acc = 0j
    falling = 1.0
    for k in range(n + 1):
        acc += falling * bell[n - k] / d ** (k + 1)
        falling *= n - k
    return acc


def bell_table(x: complex, y0: complex, N: int) -> BellTable:
    """L_0..L_N at (x, y0) through the recursion."""
    return bell_table_recursive(sigma_vector(x, y0, max(N, 1)), N)
