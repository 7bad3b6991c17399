"""
Stage 2: iterative local MMSE refinement with DAFT-domain soft decisions.

Each iteration maps the current estimate to the DAFT domain, forms symbol
posteriors (or hard decisions once the estimate is reliable), maps the
posterior mean and variance back as priors, and re-estimates every entry
with a small local MMSE filter that cancels its neighbours' interference.
The entry being estimated gets an uninformative prior (mean 0, variance 1)
so that its own posterior never feeds back into it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from ..qam import constellation, nearest_index
from ..transforms import DaftParams, daft, dft_unitary, idaft, idft_unitary
from .banded import CyclicBandedMatrix, band_approximate, full_band_limits
from .complexity import eta_hard, eta_soft
from .stage1 import VAR_FLOOR, Stage1Output, stage1_banded_lmmse

__all__ = [
    "EqualizerOptions",
    "IterationState",
    "EqualizeResult",
    "LocalWindows",
    "intermediate_daft_estimate",
    "symbol_posteriors",
    "hard_decisions",
    "fd_prior",
    "local_windows",
    "local_mmse_window",
    "local_mmse_sweep",
    "run_stage2",
    "two_stage_equalize",
    "td_two_stage_equalize",
    "stage1_only_equalize",
]

HARD_EPS = 1e-8


@dataclass(frozen=True)
class EqualizerOptions:
    """Settings of the two-stage equalizer.

    Attributes
    ----------
    half_bw : int
        Half-bandwidth of the band approximation; the bandwidth is
        ``2 * half_bw + 1``.
    i_max : int
        Maximum number of stage-2 iterations.
    halt_threshold : float, optional
        Stop when ``||x_i - x_{i-1}||_2`` drops below it. ``None`` means
        ``1e-2 * sqrt(N)``.
    fallback_threshold : float
        Switch to hard decisions when the mean error variance is below it.
    fallback_enabled : bool
    order : int
        QAM order.
    window_source : {"full", "banded"}
        Whether the local windows are cut from the unapproximated matrix
        (default) or from its band approximation. Full windows only need
        the diagonals within ``3 * half_bw`` of the main one.
    err_window_extra : int, optional
        Passed to the stage-1 windowed error variance.
    record_history : bool
        Keep an :class:`IterationState` per iteration.
    """

    half_bw: int = 3
    i_max: int = 15
    halt_threshold: Optional[float] = None
    fallback_threshold: float = 0.1
    fallback_enabled: bool = True
    order: int = 4
    window_source: str = "full"
    err_window_extra: Optional[int] = None
    record_history: bool = False

    def __post_init__(self):
        if self.half_bw < 0:
            raise ValueError("half_bw must be nonnegative")
        if self.i_max < 0:
            raise ValueError("i_max must be nonnegative")
        if self.window_source not in ("banded", "full"):
            raise ValueError(f"unknown window_source {self.window_source!r}")
        constellation(self.order)

    @classmethod
    def from_bandwidth(cls, beta: int, **kw) -> "EqualizerOptions":
        """Options for an odd total bandwidth ``beta`` (or ``alpha``)."""
        if beta < 1 or beta % 2 == 0:
            raise ValueError(f"bandwidth must be a positive odd integer, got {beta}")
        return cls(half_bw=(beta - 1) // 2, **kw)

    @property
    def beta(self) -> int:
        return 2 * self.half_bw + 1

    def halt(self, N: int) -> float:
        return 1e-2 * np.sqrt(N) if self.halt_threshold is None else float(self.halt_threshold)


@dataclass(frozen=True)
class IterationState:
    i: int
    s_hat: np.ndarray
    err_var: np.ndarray
    x_soft: np.ndarray
    v_soft: np.ndarray
    eps: float
    mu: float
    mode: str


@dataclass(frozen=True)
class EqualizeResult:
    """Equalizer output.

    ``x_hard`` holds constellation indices; ``cm_total`` is exact.
    """

    x_hard: np.ndarray
    x_soft_final: np.ndarray
    iterations_soft: int
    iterations_hard: int
    cm_total: Fraction
    converged: bool
    history: tuple = field(default=(), repr=False)


def intermediate_daft_estimate(s_hat: np.ndarray, err_var: np.ndarray, p: DaftParams):
    """DAFT-domain estimate ``Phi F^H s_hat`` and its mean error variance."""
    return daft(idft_unitary(s_hat), p), float(np.mean(err_var))


def symbol_posteriors(x_hat: np.ndarray, eps: float, points: np.ndarray):
    """Posterior mean and variance of each symbol under ``x_hat = x + CN(0, eps)``.

    Uses a uniform prior over ``points``. The exponent is shifted by its
    per-symbol maximum before exponentiation.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    logits = -np.abs(x_hat[:, None] - points[None, :]) ** 2 / eps
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=1, keepdims=True)
    mean = w @ points
    var = w @ (np.abs(points) ** 2) - np.abs(mean) ** 2
    return mean, np.maximum(var, 0.0)


def hard_decisions(x_hat: np.ndarray, points: np.ndarray):
    """Nearest points and zero variances."""
    idx = np.argmin(np.abs(x_hat[:, None] - points[None, :]) ** 2, axis=1)
    return points[idx], np.zeros(len(x_hat))


def fd_prior(x_tilde: np.ndarray, v_tilde: np.ndarray, p: DaftParams):
    """Frequency-domain prior ``F Phi^H x_tilde`` with flat variance ``mean(v_tilde)``.

    Returns ``(s_bar, psi, mu)``.
    """
    mu = float(np.mean(v_tilde))
    return dft_unitary(idaft(x_tilde, p)), np.full(len(x_tilde), mu), mu


def _window_offsets(half: int, N: int) -> np.ndarray:
    if 2 * half + 1 > N:
        lo, hi = full_band_limits(N)
        return np.arange(-hi, lo + 1)
    return np.arange(-half, half + 1)


@dataclass(frozen=True)
class LocalWindows:
    """Per-entry sub-matrices ``H[n + row_offs, n + col_offs]``, shape ``(N, w, c)``."""

    rows: np.ndarray
    cols: np.ndarray
    H: np.ndarray
    center_col: int

    @property
    def N(self) -> int:
        return self.H.shape[0]


def local_windows(H, half_bw: int) -> LocalWindows:
    """Gather the local windows (rows ``n +- half_bw``, columns ``n +- 2 half_bw``).

    Indices are taken modulo N. When a window would be longer than N every
    index is used once instead.
    """
    if not isinstance(H, CyclicBandedMatrix):
        entries = np.asarray(getattr(H, "entries", H))
        lo, hi = full_band_limits(entries.shape[0])
        H = CyclicBandedMatrix.from_dense(entries, lo, hi)
    N = H.N
    ro = _window_offsets(half_bw, N)
    co = _window_offsets(2 * half_bw, N)
    n = np.arange(N)
    rows = (n[:, None] + ro[None, :]) % N
    cols = (n[:, None] + co[None, :]) % N
    Hn = H.take(rows[:, :, None], cols[:, None, :])
    return LocalWindows(rows, cols, Hn, int(np.nonzero(co == 0)[0][0]))


def local_mmse_window(
    Hn: np.ndarray, rn: np.ndarray, sbar_n: np.ndarray, psi_n: np.ndarray, sigma2: float, center: int, mode: str
):
    """Batched local MMSE estimate of the centre entry of each window.

    Parameters
    ----------
    Hn : ndarray, shape (B, w, c)
    rn : ndarray, shape (B, w)
    sbar_n, psi_n : ndarray, shape (B, c)
        Prior means and variances; the centre column is overridden with
        mean 0 and variance 1.
    center : int
        Column of the entry being estimated.
    mode : {"soft", "hard"}
        ``"hard"`` assumes all off-centre variances are zero and uses the
        scalar closed form.

    Returns
    -------
    s_hat, err_var : ndarray, shape (B,)
    """
    sbar_n = np.array(sbar_n, dtype=complex)
    sbar_n[:, center] = 0.0
    h = Hn[:, :, center]
    res = rn - np.einsum("bwc,bc->bw", Hn, sbar_n)
    hh = np.sum(np.abs(h) ** 2, axis=1)
    if mode == "hard":
        s = np.einsum("bw,bw->b", h.conj(), res) / (hh + sigma2)
        e = sigma2 / (hh + sigma2)
        return s, e
    if mode != "soft":
        raise ValueError(f"unknown mode {mode!r}")
    psi_n = np.array(psi_n, dtype=float)
    psi_n[:, center] = 1.0
    Hs = Hn * np.sqrt(psi_n)[:, None, :]
    K = Hs @ np.conj(np.swapaxes(Hs, 1, 2))
    w = K.shape[1]
    K[:, np.arange(w), np.arange(w)] += sigma2
    u = np.linalg.solve(K, np.stack([res, h], axis=2))
    s = np.einsum("bw,bw->b", h.conj(), u[:, :, 0])
    e = 1.0 - np.real(np.einsum("bw,bw->b", h.conj(), u[:, :, 1]))
    return s, e


def local_mmse_sweep(
    H,
    r: np.ndarray,
    s_bar: np.ndarray,
    psi: np.ndarray,
    sigma2: float,
    half_bw: int,
    mode: str = "soft",
    windows: Optional[LocalWindows] = None,
):
    """Local MMSE re-estimate of every entry; returns ``(s_hat, err_var)``.

    ``windows`` can be passed to reuse the gathered sub-matrices of ``H``.
    """
    lw = local_windows(H, half_bw) if windows is None else windows
    psi = np.broadcast_to(np.asarray(psi, dtype=float), (lw.N,))
    s, e = local_mmse_window(lw.H, r[lw.rows], s_bar[lw.cols], psi[lw.cols], sigma2, lw.center_col, mode)
    return s, np.clip(e, VAR_FLOOR, 1.0)


def _decide(x_hat: np.ndarray, eps: float, points: np.ndarray, opts: EqualizerOptions):
    hard = (opts.fallback_enabled and eps < opts.fallback_threshold) or eps < HARD_EPS
    if hard:
        xt, vt = hard_decisions(x_hat, points)
    else:
        xt, vt = symbol_posteriors(x_hat, eps, points)
    return xt, vt, hard


def run_stage2(
    st1: Stage1Output,
    windows: LocalWindows,
    r: np.ndarray,
    sigma2: float,
    opts: EqualizerOptions,
    to_daft: Callable[[np.ndarray], np.ndarray],
    from_daft: Callable[[np.ndarray], np.ndarray],
) -> EqualizeResult:
    """Stage-2 iterations starting from a stage-1 estimate.

    ``to_daft`` maps an estimate in the working domain to the DAFT domain
    and ``from_daft`` is its inverse.
    """
    N = len(r)
    points = constellation(opts.order)
    halt = opts.halt(N)
    s_hat, e = st1.s_hat, st1.err_var
    es, eh = eta_soft(N, opts.beta, opts.order), eta_hard(N, opts.beta, opts.order)
    cm = Fraction(st1.cm_count)
    n_soft = n_hard = 0
    x_prev = None
    converged = False
    history = []
    xt = None
    for i in range(1, opts.i_max + 1):
        x_hat = to_daft(s_hat)
        eps = float(np.mean(e))
        xt, vt, hard = _decide(x_hat, eps, points, opts)
        if i >= 2 and np.linalg.norm(xt - x_prev) < halt:
            converged = True
            break
        x_prev = xt
        s_bar = from_daft(xt)
        mu = float(np.mean(vt))
        mode = "hard" if hard else "soft"
        s_hat, e = local_mmse_sweep(None, r, s_bar, mu, sigma2, opts.half_bw, mode, windows=windows)
        if hard:
            n_hard += 1
            cm += eh
        else:
            n_soft += 1
            cm += es
        if opts.record_history:
            history.append(IterationState(i, s_hat, e, xt, vt, eps, mu, mode))
    if not converged:
        xt, _, _ = _decide(to_daft(s_hat), float(np.mean(e)), points, opts)
    return EqualizeResult(nearest_index(xt, opts.order), xt, n_soft, n_hard, cm, converged, tuple(history))


def _as_band(H) -> CyclicBandedMatrix:
    if isinstance(H, CyclicBandedMatrix):
        return H
    entries = np.asarray(getattr(H, "entries", H))
    lo, hi = full_band_limits(entries.shape[0])
    return CyclicBandedMatrix.from_dense(entries, lo, hi)


def _check_domain(H, expected: str):
    dom = getattr(H, "domain", None)
    if dom is not None and dom != expected:
        raise ValueError(f"expected a {expected}-domain matrix, got {dom!r}")


def _equalize(H, r, sigma2, opts, to_daft, from_daft) -> EqualizeResult:
    H = _as_band(H)
    Hb = band_approximate(H, opts.half_bw)
    st1 = stage1_banded_lmmse(Hb, r, sigma2, err_window_extra=opts.err_window_extra)
    src = Hb if opts.window_source == "banded" else H
    return run_stage2(st1, local_windows(src, opts.half_bw), r, sigma2, opts, to_daft, from_daft)


def fd_maps(p: DaftParams):
    """``(to_daft, from_daft)`` for frequency-domain estimates."""
    return (lambda s: daft(idft_unitary(s), p)), (lambda x: dft_unitary(idaft(x, p)))


def td_maps(p: DaftParams):
    """``(to_daft, from_daft)`` for time-domain estimates."""
    return (lambda s: daft(s, p)), (lambda x: idaft(x, p))


def two_stage_equalize(H_fd, r_fd: np.ndarray, sigma2: float, p: DaftParams, opts: EqualizerOptions = EqualizerOptions()) -> EqualizeResult:
    """Two-stage equalization of a frequency-domain received vector.

    Parameters
    ----------
    H_fd : ChannelMatrix, CyclicBandedMatrix or ndarray
        Frequency-domain channel matrix. A band of half-width
        ``3 * opts.half_bw`` is enough for full windows and ``opts.half_bw``
        for banded ones.
    r_fd : ndarray
        Received vector after the unitary DFT.
    sigma2 : float
        Noise variance.
    p : DaftParams
        DAFT used at the transmitter.
    opts : EqualizerOptions
    """
    _check_domain(H_fd, "frequency")
    return _equalize(H_fd, r_fd, sigma2, opts, *fd_maps(p))


def td_two_stage_equalize(
    H_td,
    r_td: np.ndarray,
    sigma2: float,
    p: DaftParams,
    opts: EqualizerOptions = EqualizerOptions(),
    alpha: Optional[int] = None,
) -> EqualizeResult:
    """Same pipeline on the time-domain matrix; ``alpha`` overrides ``opts.half_bw``."""
    _check_domain(H_td, "time")
    if alpha is not None:
        opts = EqualizerOptions.from_bandwidth(
            alpha, **{k: getattr(opts, k) for k in opts.__dataclass_fields__ if k != "half_bw"}
        )
    return _equalize(H_td, r_td, sigma2, opts, *td_maps(p))


def stage1_only_equalize(
    H, r: np.ndarray, sigma2: float, p: DaftParams, opts: EqualizerOptions = EqualizerOptions(), domain: str = "frequency"
) -> EqualizeResult:
    """Banded LMMSE followed directly by hard decisions in the DAFT domain."""
    to_daft, _ = fd_maps(p) if domain == "frequency" else td_maps(p)
    Hb = band_approximate(_as_band(H), opts.half_bw)
    st1 = stage1_banded_lmmse(Hb, r, sigma2, err_var="none")
    x_hat = to_daft(st1.s_hat)
    idx = nearest_index(x_hat, opts.order)
    return EqualizeResult(idx, constellation(opts.order)[idx], 0, 0, Fraction(st1.cm_count), False)
