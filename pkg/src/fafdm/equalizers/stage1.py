"""
Stage 1: banded LMMSE through a block Cholesky factorization.

For a cyclically banded ``Hb`` the Gram matrix ``G = Hb Hb^H + sigma2 I`` is
cyclically banded with half-bandwidth ``b``. Splitting at ``Q = N - b``,

    G = [[G1, G2], [G2^H, G4]],   L = [[A, 0], [B, C]],

``G1`` is an ordinary (non-cyclic) band matrix, so ``A`` comes from a band
Cholesky and ``B^H = A^{-1} G2`` from a band forward substitution. All the
cyclic-corner coupling lands in the small dense Schur complement
``G4 - B B^H = C C^H``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .banded import CyclicBandedMatrix
from .complexity import eta0

__all__ = ["BlockCholesky", "block_cholesky", "Stage1Output", "stage1_banded_lmmse", "full_block_lmmse"]


@dataclass(frozen=True)
class BlockCholesky:
    """Factor ``L`` of a cyclically banded HPD matrix, ``L L^H = G``.

    ``ab`` holds ``A`` in LAPACK lower band storage (``ab[i - j, j] = A[i, j]``),
    ``B`` is ``(N - Q) x Q`` dense and ``C`` is ``(N - Q) x (N - Q)`` lower
    triangular.
    """

    N: int
    Q: int
    kd: int
    ab: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def solve_lower(self, r: np.ndarray) -> np.ndarray:
        """``L^{-1} r`` for a vector or an ``(N, k)`` block."""
        r = np.asarray(r, dtype=complex)
        vec = r.ndim == 1
        r2 = r.reshape(self.N, -1)
        z1 = _tb(self.ab, r2[: self.Q], "N")
        rhs = r2[self.Q :] - self.B @ z1
        z2 = sla.solve_triangular(self.C, rhs, lower=True) if self.C.size else rhs
        z = np.vstack([z1, z2])
        return z[:, 0] if vec else z

    def solve_upper(self, z: np.ndarray) -> np.ndarray:
        """``L^{-H} z``."""
        z = np.asarray(z, dtype=complex)
        vec = z.ndim == 1
        z2d = z.reshape(self.N, -1)
        y2 = sla.solve_triangular(self.C, z2d[self.Q :], lower=True, trans="C") if self.C.size else z2d[self.Q :]
        y1 = _tb(self.ab, z2d[: self.Q] - self.B.conj().T @ y2, "C")
        y = np.vstack([y1, y2])
        return y[:, 0] if vec else y

    def entries(self, i, j) -> np.ndarray:
        """Gather ``L[i, j]`` for broadcast index arrays."""
        i, j = np.broadcast_arrays(np.asarray(i), np.asarray(j))
        out = np.zeros(i.shape, dtype=complex)
        Q = self.Q
        in_a = (i < Q) & (i >= j) & (i - j <= self.kd)
        out[in_a] = self.ab[(i - j)[in_a], j[in_a]]
        in_b = (i >= Q) & (j < Q)
        out[in_b] = self.B[i[in_b] - Q, j[in_b]]
        in_c = (i >= Q) & (j >= Q) & (i >= j)
        out[in_c] = self.C[i[in_c] - Q, j[in_c] - Q]
        return out

    def to_dense(self) -> np.ndarray:
        N, Q = self.N, self.Q
        out = np.zeros((N, N), dtype=complex)
        flat = out.reshape(-1)
        for d in range(self.kd + 1):
            j = np.arange(Q - d)
            flat[(j + d) * N + j] = self.ab[d, : Q - d]
        out[Q:, :Q] = self.B
        out[Q:, Q:] = np.tril(self.C)
        return out

    def inverse_frobenius_sq(self) -> float:
        """``||L^{-1}||_F^2``, which equals ``trace(G^{-1})``."""
        Q, nb = self.Q, self.N - self.Q
        a_inv = _tb(self.ab, np.eye(Q, dtype=complex), "N")
        total = float(np.sum(np.abs(a_inv) ** 2))
        if nb:
            c_inv = sla.solve_triangular(self.C, np.eye(nb, dtype=complex), lower=True)
            # ||C^{-1} B A^{-1}||_F = ||A^{-H} B^H C^{-H}||_F
            y = _tb(self.ab, self.B.conj().T @ c_inv.conj().T, "C")
            total += float(np.sum(np.abs(c_inv) ** 2) + np.sum(np.abs(y) ** 2))
        return total


def _tb(ab: np.ndarray, b: np.ndarray, trans: str) -> np.ndarray:
    if b.shape[0] == 0:
        return b.copy()
    x, info = lapack.ztbtrs(ab, b, uplo="L", trans=trans)
    if info != 0:
        raise np.linalg.LinAlgError(f"band triangular solve failed (info={info})")
    return x


def block_cholesky(G: CyclicBandedMatrix) -> BlockCholesky:
    """Block Cholesky factor of a cyclically banded Hermitian positive definite ``G``.

    Raises
    ------
    numpy.linalg.LinAlgError
        If ``G`` is not numerically positive definite.
    """
    N = G.N
    b = max(G.lo, G.hi)
    Q = N - b
    if Q < 1:
        raise ValueError("bandwidth too large for the block partition")
    kd = min(b, Q - 1)
    j = np.arange(Q)
    d = np.arange(kd + 1)
    i = j[None, :] + d[:, None]
    ab = np.where(i < Q, G.take(np.minimum(i, Q - 1), j[None, :]), 0).astype(complex)
    try:
        ab = sla.cholesky_banded(ab, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("Gram matrix is not positive definite") from exc
    tail = np.arange(Q, N)
    G2 = G.take(j[:, None], tail[None, :])
    BH = _tb(ab, G2.astype(complex), "N")
    B = BH.conj().T
    G4 = G.take(tail[:, None], tail[None, :])
    S = G4 - B @ BH
    S = (S + S.conj().T) / 2
    try:
        C = np.linalg.cholesky(S) if S.size else S
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("Schur complement is not positive definite") from exc
    return BlockCholesky(N, Q, kd, ab, B, C)


@dataclass(frozen=True)
class Stage1Output:
    """Initial LMMSE estimate.

    Attributes
    ----------
    s_hat : ndarray
        Estimate of the transmitted vector.
    err_var : ndarray
        Per-entry error variance, clamped to ``[1e-8, 1]``.
    cm_count : Fraction
        CM count of the stage.
    factor : BlockCholesky, optional
        Cholesky factor of the Gram matrix.
    """

    s_hat: np.ndarray
    err_var: np.ndarray
    cm_count: Fraction
    factor: Optional[BlockCholesky] = None


VAR_FLOOR = 1e-8


def _windowed_err_var(Hb: CyclicBandedMatrix, L: BlockCholesky, extra: int) -> np.ndarray:
    """``1 - ||z_n||^2`` with ``z_n`` the part of ``L^{-1} h_n`` on a short row window.

    The window covers the rows where column ``n`` of ``Hb`` is nonzero plus
    ``extra`` rows further down, where the forward substitution still
    spreads energy.
    """
    N = Hb.N
    w = min(Hb.lo + Hb.hi + 1 + extra, N)
    offs = np.arange(-Hb.hi, -Hb.hi + w)
    n = np.arange(N)
    W = np.sort((n[:, None] + offs[None, :]) % N, axis=1)  # (N, w)
    h = Hb.take(W, n[:, None])
    Lw = L.to_dense()[W[:, :, None], W[:, None, :]]
    # L[W, W] is lower triangular for sorted W: batched forward substitution
    z = np.empty_like(h)
    for k in range(w):
        z[:, k] = (h[:, k] - np.einsum("bj,bj->b", Lw[:, k, :k], z[:, :k])) / Lw[:, k, k]
    return 1.0 - np.sum(np.abs(z) ** 2, axis=1)


def _exact_err_var(Hb: CyclicBandedMatrix, L: BlockCholesky) -> np.ndarray:
    """``1 - ||L^{-1} h_n||^2`` from the full ``L^{-1} Hb``."""
    Z = L.solve_lower(Hb.to_dense())
    return 1.0 - np.sum(np.abs(Z) ** 2, axis=0)


def stage1_banded_lmmse(
    Hb: CyclicBandedMatrix,
    r: np.ndarray,
    sigma2: float,
    gram_half_bw: Optional[int] = None,
    err_var: str = "windowed",
    err_window_extra: Optional[int] = None,
) -> Stage1Output:
    """LMMSE estimate ``Hb^H (Hb Hb^H + sigma2 I)^{-1} r`` for a cyclically banded ``Hb``.

    Parameters
    ----------
    Hb : CyclicBandedMatrix
        Band-approximated channel matrix.
    r : ndarray
        Received vector in the same domain as ``Hb``.
    sigma2 : float
        Noise variance, positive.
    gram_half_bw : int, optional
        Half-bandwidth used for the Gram matrix. Defaults to
        ``Hb.lo + Hb.hi + 1``, one more than structurally needed, so that
        the bandwidth ``beta = 2 * half_bw + 1`` of a symmetric band matches
        the CM count.
    err_var : {"windowed", "exact", "trace", "none"}
        How the per-entry error variances are obtained. ``"trace"`` fills
        every entry with the exact mean ``sigma2 trace(G^{-1}) / N``;
        ``"none"`` returns ones and skips the work.
    err_window_extra : int, optional
        Rows added below the support window of ``h_n`` in the windowed
        variance. Defaults to the Gram half-bandwidth; 0 keeps only the
        support of ``h_n``.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    beta = Hb.lo + Hb.hi + 1
    b = beta if gram_half_bw is None else gram_half_bw
    G = Hb.gram(sigma2, half_bw=b)
    L = block_cholesky(G)
    y = L.solve_upper(L.solve_lower(r))
    s_hat = Hb.rmatvec(y)
    if err_var == "windowed":
        extra = max(G.lo, G.hi) if err_window_extra is None else int(err_window_extra)
        e = _windowed_err_var(Hb, L, extra)
    elif err_var == "exact":
        e = _exact_err_var(Hb, L)
    elif err_var == "trace":
        e = np.full(Hb.N, sigma2 * L.inverse_frobenius_sq() / Hb.N)
    elif err_var == "none":
        e = np.ones(Hb.N)
    else:
        raise ValueError(f"unknown err_var mode {err_var!r}")
    e = np.clip(e, VAR_FLOOR, 1.0)
    return Stage1Output(s_hat, e, eta0(Hb.N, beta), L)


def full_block_lmmse(H, r: np.ndarray, sigma2: float) -> np.ndarray:
    """Dense reference ``H^H (H H^H + sigma2 I)^{-1} r``.

    ``H`` may be a dense array, a ``ChannelMatrix`` or a ``CyclicBandedMatrix``.
    """
    if isinstance(H, CyclicBandedMatrix):
        H = H.to_dense()
    H = np.asarray(getattr(H, "entries", H))
    G = H @ H.conj().T + sigma2 * np.eye(H.shape[0])
    return H.conj().T @ np.linalg.solve(G, r)
