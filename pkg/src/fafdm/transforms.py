"""
Chirp transforms: DAFT, unitary DFT and the Dirichlet kernel.

All transforms use the unitary ``1/sqrt(N)`` normalization, so that the
DAFT matrix ``Phi`` and the DFT matrix ``F`` satisfy ``Phi @ Phi^H = I``.

The DAFT kernel is

    phi(n, m) = exp(-j 2 pi (c1 n^2 + c2 m^2 + n m / N))

and the fast path factors it as a post-chirp on the time index, an FFT and
a pre-chirp on the DAFT index.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "DaftParams",
    "daft_kernel",
    "idaft",
    "daft",
    "daft_matrix",
    "dft_unitary",
    "idft_unitary",
    "dft_matrix",
    "dirichlet",
]

_CONGRUENCE_TOL = 1e-9


@dataclass(frozen=True)
class DaftParams:
    """Parameters of an N-point DAFT.

    Attributes
    ----------
    N : int
        Frame length in symbols. Must be even.
    c1 : float
        Post-chirp parameter (applied on the time index). ``2 * c1 * N``
        must be an integer.
    c2 : float
        Pre-chirp parameter (applied on the DAFT index). Unconstrained.
    """

    N: int
    c1: float = 0.0
    c2: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N <= 0:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if self.N % 2:
            raise ValueError(f"N must be even, got {self.N}")
        two_c1_n = 2 * self.c1 * self.N
        if abs(two_c1_n - round(two_c1_n)) > 1e-9:
            raise ValueError(f"2*c1*N must be an integer, got {two_c1_n}")

    @classmethod
    def afdm(cls, N: int, c2: float = 0.0) -> "DaftParams":
        """Common AFDM choice ``c1 = 1/N``."""
        return cls(N, 1.0 / N, c2)

    @property
    def shift_per_tap(self) -> int:
        """Integer DAFT-index shift ``2 c1 N`` caused by one tap of delay."""
        return int(round(2 * self.c1 * self.N))

    def _post_chirp(self) -> np.ndarray:
        n = np.arange(self.N)
        # c1*n^2 reduced mod 1 through the exact rational 2c1N/(2N) avoids
        # phase error growth at large n
        frac = Fraction(self.shift_per_tap, 2 * self.N)
        ph = (frac.numerator * n.astype(np.int64) ** 2) % frac.denominator
        return np.exp(-2j * np.pi * ph / frac.denominator)

    def _pre_chirp(self) -> np.ndarray:
        m = np.arange(self.N, dtype=float)
        return np.exp(-2j * np.pi * self.c2 * m**2)


def _check_length(v: np.ndarray, N: int) -> np.ndarray:
    v = np.asarray(v)
    if v.shape[-1] != N:
        raise ValueError(f"expected length {N} along the last axis, got {v.shape[-1]}")
    return v


def daft_kernel(n, m, p: DaftParams):
    """DAFT kernel ``exp(-j2pi(c1 n^2 + c2 m^2 + n m / N))``.

    Defined for any integer (or array of integer) indices; broadcasting
    follows numpy rules.
    """
    n = np.asarray(n)
    m = np.asarray(m)
    if np.issubdtype(n.dtype, np.integer) and np.issubdtype(m.dtype, np.integer):
        n = n.astype(np.int64)
        m = m.astype(np.int64)
        frac = Fraction(p.shift_per_tap, 2 * p.N)
        phase = ((frac.numerator * n**2) % frac.denominator) / frac.denominator
        phase = phase + ((n * m) % p.N) / p.N
        phase = phase + np.mod(p.c2 * m.astype(float) ** 2, 1.0)
    else:
        n = n.astype(float)
        m = m.astype(float)
        phase = p.c1 * n**2 + p.c2 * m**2 + n * m / p.N
    phase = phase - np.floor(phase)
    out = np.exp(-2j * np.pi * phase)
    return out[()] if out.ndim == 0 else out


def dft_unitary(v: np.ndarray) -> np.ndarray:
    """Unitary DFT along the last axis."""
    return np.fft.fft(np.asarray(v), norm="ortho")


def idft_unitary(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dft_unitary`."""
    return np.fft.ifft(np.asarray(v), norm="ortho")


def daft(r: np.ndarray, p: DaftParams) -> np.ndarray:
    """N-point DAFT along the last axis, ``y = Phi @ r``.

    Computed as post-chirp, unitary FFT, pre-chirp in O(N log N).
    """
    r = _check_length(r, p.N)
    return p._pre_chirp() * np.fft.fft(r * p._post_chirp(), norm="ortho")


def idaft(x: np.ndarray, p: DaftParams) -> np.ndarray:
    """N-point inverse DAFT along the last axis, ``s = Phi^H @ x``."""
    x = _check_length(x, p.N)
    return np.conj(p._post_chirp()) * np.fft.ifft(x * np.conj(p._pre_chirp()), norm="ortho")


def daft_matrix(p: DaftParams) -> np.ndarray:
    """Explicit DAFT matrix with ``Phi[m, n] = daft_kernel(n, m) / sqrt(N)``."""
    idx = np.arange(p.N)
    return daft_kernel(idx[None, :], idx[:, None], p) / np.sqrt(p.N)


def dft_matrix(N: int) -> np.ndarray:
    """Explicit unitary DFT matrix ``F[k, n] = exp(-j2pi kn/N) / sqrt(N)``."""
    idx = np.arange(N)
    return np.exp(-2j * np.pi * ((np.outer(idx, idx) % N) / N)) / np.sqrt(N)


def dirichlet(k, N: int):
    """Dirichlet kernel ``Omega(k) = sum_{n=0}^{N-1} exp(j2pi nk/N)``.

    Uses the closed form ``exp(j pi k (N-1)/N) sin(pi k) / sin(pi k / N)``
    with the removable singularity at ``k = 0 (mod N)`` returning ``N``.
    """
    k = np.asarray(k, dtype=float)
    # Omega has period N for even N; reducing first keeps sin() accurate
    if N % 2 == 0:
        k = k - N * np.round(k / N)
    q = np.round(k / N)
    sing = np.abs(k - q * N) < _CONGRUENCE_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.sin(np.pi * k) / np.sin(np.pi * k / N)
    phase = np.exp(1j * np.pi * k * (N - 1) / N)
    out = np.where(sing, N + 0j, phase * np.where(sing, 0.0, ratio))
    return out[()] if out.ndim == 0 else out
