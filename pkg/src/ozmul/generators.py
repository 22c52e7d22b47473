"""Seeded test-matrix generators for the accuracy experiments.

Random numbers come from the raw 64-bit output of PCG64 (seeded through
``SeedSequence``), so streams do not depend on numpy's sampling routines.
Uniforms use the top 53 bits; normals use the Box-Muller transform.
Independent streams for one seed are obtained with ``SeedSequence.spawn``
semantics via ``spawn_key=(stream,)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


class Stream:
    def __init__(self, seed: int, stream: int = 0):
        ss = np.random.SeedSequence(seed, spawn_key=(stream,))
        self._bits = np.random.PCG64(ss)

    def uniform(self, shape) -> np.ndarray:
        """U[0, 1) with 53 random bits."""
        n = int(np.prod(shape))
        raw = self._bits.random_raw(n).astype(np.uint64)
        return np.ldexp((raw >> np.uint64(11)).astype(np.float64), -53).reshape(shape)

    def uniform_range(self, lo: float, hi: float, shape) -> np.ndarray:
        return lo + (hi - lo) * self.uniform(shape)

    def normal(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        half = (n + 1) // 2
        u1 = 1.0 - self.uniform(half)  # (0, 1], keeps log finite
        u2 = self.uniform(half)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return z[:n].reshape(shape)


@dataclass(frozen=True)
class GenSpec:
    family: str  # inner-phi | lognormal-phi | kappaD-scaled | minij | wilkinson | hanowa | randn | randu
    m: int = 10
    k: int = 10
    n: int = 10
    badness: float = 0.0  # phi or kappa_D
    seed: int = 0
    rotate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _pow2(phi: float) -> float:
    return float(np.ldexp(1.0, int(phi))) if float(phi).is_integer() else float(2.0**phi)


def gen_inner_phi(phi: float, seed: int = 0):
    """``a = [2^-phi x, 1]`` (a 1x2 row) and ``b = [2^phi y, 1]`` (a 2x1 column)."""
    if phi < 0:
        raise ValueError("phi must be non-negative")
    x, y = Stream(seed).normal(2)
    a = np.array([[x / _pow2(phi), 1.0]])
    b = np.array([[y * _pow2(phi)], [1.0]])
    return a, b


def gen_lognormal(m: int = 10, k: int = 10, n: int = 10, phi: float = 8.0, seed: int = 0):
    """``A_ij = a_ij exp(phi x_ij)``, ``B_ij = b_ij exp(phi y_ij)``; a, b ~ U(-0.5, 0.5), x, y ~ N(0, 1)."""
    if phi < 0:
        raise ValueError("phi must be non-negative")
    sA, sB = Stream(seed, 0), Stream(seed, 1)
    A = sA.uniform_range(-0.5, 0.5, (m, k)) * np.exp(phi * sA.normal((m, k)))
    B = sB.uniform_range(-0.5, 0.5, (k, n)) * np.exp(phi * sB.normal((k, n)))
    return A + 0.0, B + 0.0


def kappa_diagonal(n: int, kappaD: float) -> np.ndarray:
    """Geometric diagonal from ``kappaD**-0.5`` to ``kappaD**0.5``."""
    if kappaD < 1:
        raise ValueError("kappa_D must be at least 1")
    if n == 1:
        return np.ones(1)
    return np.power(float(kappaD), np.arange(n) / (n - 1) - 0.5)


def gen_kappaD(n: int, kappaD: float, seed: int = 0, rotate: bool = False):
    """``A = Abar D``, ``B = D^-1 Bbar`` with ``Abar, Bbar ~ U(1, 2)``.

    With ``rotate``, row ``i`` of ``A`` and column ``i`` of ``B`` (1-based)
    are rotated circularly by ``i`` places.
    """
    d = kappa_diagonal(n, kappaD)
    Abar = Stream(seed, 0).uniform_range(1.0, 2.0, (n, n))
    Bbar = Stream(seed, 1).uniform_range(1.0, 2.0, (n, n))
    A = Abar * d[None, :]
    B = Bbar / d[:, None]
    if rotate:
        for i in range(n):
            A[i, :] = np.roll(A[i, :], i + 1)
            B[:, i] = np.roll(B[:, i], i + 1)
    return A, B


def minij(n: int) -> np.ndarray:
    i = np.arange(1, n + 1)
    return np.minimum.outer(i, i).astype(np.float64)


def wilkinson(n: int) -> np.ndarray:
    """Symmetric tridiagonal with ones off the diagonal and ``|i - (n+1)/2|`` on it."""
    d = np.abs(np.arange(1, n + 1) - (n + 1) / 2)
    return np.diag(d) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)


def hanowa(n: int, d: float = -1.0) -> np.ndarray:
    """``[d I, -D; D, d I]`` with ``D = diag(1..n/2)``; ``n`` must be even."""
    if n % 2:
        raise ValueError("hanowa needs an even order")
    h = n // 2
    D = np.diag(np.arange(1, h + 1, dtype=np.float64))
    I = d * np.eye(h)
    return np.block([[I, -D], [D, I]]) + 0.0


def randn(n: int, seed: int = 0) -> np.ndarray:
    return Stream(seed).normal((n, n))


def randu(n: int, seed: int = 0) -> np.ndarray:
    return Stream(seed).uniform((n, n))


NAMED = {
    "minij": lambda n, seed: minij(n),
    "wilkinson": lambda n, seed: wilkinson(n),
    "hanowa": lambda n, seed: hanowa(n),
    "randn": randn,
    "randu": randu,
}


def named(name: str, n: int, seed: int = 0) -> np.ndarray:
    try:
        return NAMED[name](n, seed)
    except KeyError:
        raise ValueError(f"unknown matrix {name!r}; choose from {sorted(NAMED)}") from None


def rhs(n: int, seed: int = 0) -> np.ndarray:
    """Right-hand side with U(0, 1) entries, on a stream separate from the matrix."""
    return Stream(seed, 7).uniform(n)


def generate(spec: GenSpec):
    """Dispatch on ``spec.family``; returns ``(A, B)`` or, for named matrices, ``(A, b)``."""
    f = spec.family
    if f == "inner-phi":
        return gen_inner_phi(spec.badness, spec.seed)
    if f == "lognormal-phi":
        return gen_lognormal(spec.m, spec.k, spec.n, spec.badness, spec.seed)
    if f == "kappaD-scaled":
        return gen_kappaD(spec.n, spec.badness, spec.seed, spec.rotate)
    return named(f, spec.n, spec.seed), rhs(spec.n, spec.seed)
