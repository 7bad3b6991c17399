"""Cyclically banded matrices in compact diagonal storage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["CyclicBandedMatrix", "band_approximate", "full_band_limits"]


def full_band_limits(N: int) -> tuple[int, int]:
    """``(lo, hi)`` for a band that stores every one of the N cyclic diagonals."""
    return N // 2, N - 1 - N // 2


@dataclass(frozen=True)
class CyclicBandedMatrix:
    """N x N matrix whose nonzeros sit on cyclic diagonals ``-hi..lo``.

    Diagonal offsets are ``d = (i - j) mod N`` wrapped into ``[-hi, lo]``;
    ``d > 0`` is below the main diagonal. Row ``k`` of ``bands`` holds
    offset ``d = k - hi``, indexed by column: ``bands[k, j] = M[(j + d) % N, j]``.
    """

    N: int
    lo: int
    hi: int
    bands: np.ndarray

    def __post_init__(self):
        if self.lo < 0 or self.hi < 0:
            raise ValueError("half-bandwidths must be nonnegative")
        if self.lo + self.hi + 1 > self.N:
            raise ValueError(f"lo + hi + 1 = {self.lo + self.hi + 1} exceeds N = {self.N}")
        if self.bands.shape != (self.lo + self.hi + 1, self.N):
            raise ValueError(f"bands must have shape {(self.lo + self.hi + 1, self.N)}, got {self.bands.shape}")

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.hi, self.lo + 1)

    @property
    def is_full(self) -> bool:
        return self.lo + self.hi + 1 == self.N

    @classmethod
    def from_dense(cls, M: np.ndarray, lo: int, hi: int) -> "CyclicBandedMatrix":
        """Keep the cyclic diagonals ``-hi..lo`` of a dense matrix."""
        M = np.asarray(M)
        N = M.shape[0]
        j = np.arange(N)
        d = np.arange(-hi, lo + 1)
        rows = (j[None, :] + d[:, None]) % N
        return cls(N, lo, hi, M[rows, j[None, :]].astype(complex))

    def to_dense(self) -> np.ndarray:
        N = self.N
        out = np.zeros((N, N), dtype=self.bands.dtype)
        j = np.arange(N)
        rows = (j[None, :] + self.offsets[:, None]) % N
        out[rows, np.broadcast_to(j, rows.shape)] = self.bands
        return out

    def diagonal(self, d: int) -> np.ndarray:
        """Cyclic diagonal ``d`` indexed by column."""
        return self.bands[d + self.hi]

    def take(self, i, j) -> np.ndarray:
        """Gather entries ``M[i, j]`` (broadcast index arrays); zero off-band."""
        i = np.asarray(i)
        j = np.asarray(j)
        d = (i - j) % self.N
        # wrap into [-hi, N - hi)
        d = np.where(d > self.lo, d - self.N, d)
        inside = d >= -self.hi
        k = np.where(inside, d + self.hi, 0)
        jj = np.broadcast_to(j, k.shape)
        return np.where(inside, self.bands[k, jj], 0)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """``M @ x``."""
        y = np.zeros(self.N, dtype=np.result_type(self.bands, x))
        for k, d in enumerate(self.offsets):
            y += np.roll(self.bands[k] * x, d)
        return y

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        """``M^H @ y``."""
        x = np.zeros(self.N, dtype=np.result_type(self.bands, y))
        for k, d in enumerate(self.offsets):
            x += np.conj(self.bands[k]) * np.roll(y, -d)
        return x

    def gram(self, sigma2: float = 0.0, half_bw: int | None = None) -> "CyclicBandedMatrix":
        """``M M^H + sigma2 I`` in band form.

        The product has half-bandwidth ``lo + hi``. ``half_bw`` may widen the
        stored band (extra diagonals are zero) but not narrow it.
        """
        N = self.N
        need = self.lo + self.hi
        b = need if half_bw is None else int(half_bw)
        if b < need:
            raise ValueError(f"half_bw {b} narrower than the product band {need}")
        if 2 * b + 1 > N:
            lo_g, hi_g = full_band_limits(N)
        else:
            lo_g = hi_g = b
        offs = self.offsets
        if 2 * need + 1 <= N:
            return self._gram_sliced(sigma2, lo_g, hi_g)
        G = np.zeros((lo_g + hi_g + 1, N), dtype=complex)
        # G[i, i - e] = sum_d M[i, i - d] conj(M[i - e, i - d]); bands are
        # column-indexed so M[i, i - d] = bands[d, i - d]
        j = np.arange(N)
        for ka, da in enumerate(offs):
            col = (j - da) % N
            a = self.bands[ka, col]  # M[j, j - da]
            b_ = self.bands[:, col]  # M[j - da + db, j - da] for every db
            e = da - offs  # G[j, j - e] += a conj(b_)
            e_w = ((e + hi_g) % N) - hi_g
            rows = (e_w + hi_g)[:, None]
            cols = (j[None, :] - e[:, None]) % N
            G[rows, cols] += a[None, :] * np.conj(b_)
        if sigma2:
            G[hi_g] += sigma2
        return CyclicBandedMatrix(N, lo_g, hi_g, G)

    def _gram_sliced(self, sigma2: float, lo_g: int, hi_g: int) -> "CyclicBandedMatrix":
        # product offsets do not alias mod N, so every update is a
        # contiguous slice of the row-indexed result RG[e, i] = G[i, i - e]
        N, lo, hi = self.N, self.lo, self.hi
        tiled = np.tile(self.bands, (1, 3))
        RG = np.zeros((lo_g + hi_g + 1, N), dtype=complex)
        for ka, da in enumerate(self.offsets):
            shifted = tiled[:, N - da : 2 * N - da]  # bands rolled by da
            prod = shifted[ka] * np.conj(shifted)  # row k contributes to e = da - (k - hi)
            RG[da - lo + hi_g : da + hi + hi_g + 1] += prod[::-1]
        if sigma2:
            RG[hi_g] += sigma2
        e = np.arange(-hi_g, lo_g + 1)
        cols = (np.arange(N)[None, :] + e[:, None]) % N
        return CyclicBandedMatrix(N, lo_g, hi_g, np.take_along_axis(RG, cols, axis=1))


def band_approximate(M, half_bw: int) -> CyclicBandedMatrix:
    """Keep the ``2 * half_bw + 1`` cyclic diagonals around the main diagonal.

    ``M`` may be a dense array, a :class:`~fafdm.channel.ChannelMatrix` or a
    wider :class:`CyclicBandedMatrix`. When ``2 * half_bw + 1 >= N`` every
    diagonal is kept.
    """
    if half_bw < 0:
        raise ValueError("half_bw must be nonnegative")
    if isinstance(M, CyclicBandedMatrix):
        N = M.N
        lo, hi = (half_bw, half_bw) if 2 * half_bw + 1 < N else full_band_limits(N)
        j = np.arange(N)
        d = np.arange(-hi, lo + 1)
        rows = (j[None, :] + d[:, None]) % N
        return CyclicBandedMatrix(N, lo, hi, M.take(rows, j[None, :]).astype(complex))
    entries = getattr(M, "entries", M)
    entries = np.asarray(entries)
    N = entries.shape[0]
    lo, hi = (half_bw, half_bw) if 2 * half_bw + 1 < N else full_band_limits(N)
    return CyclicBandedMatrix.from_dense(entries, lo, hi)
