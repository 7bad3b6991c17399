"""
Filtered-AFDM transmit chain.

Time inside this module is measured in symbol periods unless an argument
says otherwise: ``x = t / T_s``. The prototype filter ``a(t)`` is the
unit-energy root raised cosine (RRC) and the composition filter
``g(t) = a(t) * a^*(-t)`` is the raised cosine (RC), so ``g(0) = 1`` and
``g(d T_s) = 0`` for every nonzero integer ``d``.

Tap convention
--------------
``g`` is kept on its natural symmetric support ``[-(D/2) T_s, (D/2) T_s]``.
A path with normalized delay ``l`` then touches the taps
``ceil(l) - D/2 <= d <= floor(l) + D/2``. Setting ``PulseConfig.causal``
shifts ``g`` by ``D/2`` symbols so the taps become
``ceil(l) <= d <= floor(l) + D``, the one-sided convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .transforms import DaftParams, idaft

__all__ = [
    "PulseConfig",
    "FrameConfig",
    "AfdmFrame",
    "raised_cosine",
    "root_raised_cosine",
    "composition_filter",
    "effective_support",
    "path_taps",
    "add_cpp",
    "modulate",
    "synthesize_oversampled",
]


def raised_cosine(x, rolloff: float) -> np.ndarray:
    """Raised-cosine pulse at normalized time ``x = t/T_s`` with ``g(0) = 1``."""
    x = np.asarray(x, dtype=float)
    b = float(rolloff)
    den = 1.0 - (2.0 * b * x) ** 2
    sing = np.abs(den) < 1e-10 if b > 0 else np.zeros(x.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.sinc(x) * np.cos(np.pi * b * x) / den
    if np.any(sing):
        # limit at x = +-1/(2b)
        g = np.where(sing, (np.pi / 4.0) * np.sinc(1.0 / (2.0 * b)), g)
    # exact Nyquist zeros at nonzero integer instants
    on_grid = (x == np.round(x)) & (x != 0)
    g = np.where(on_grid, 0.0, g)
    return g[()] if g.ndim == 0 else g


def root_raised_cosine(x, rolloff: float) -> np.ndarray:
    """Unit-energy root-raised-cosine pulse at normalized time ``x = t/T_s``.

    Energy is one in normalized time, i.e. ``int |a(x)|^2 dx = 1``.
    """
    x = np.asarray(x, dtype=float)
    b = float(rolloff)
    out = np.empty(x.shape, dtype=float)
    at_zero = np.abs(x) < 1e-12
    at_sing = (np.abs(np.abs(x) - 1.0 / (4.0 * b)) < 1e-10) if b > 0 else np.zeros(x.shape, bool)
    rest = ~(at_zero | at_sing)
    xr = x[rest]
    num = np.sin(np.pi * xr * (1 - b)) + 4 * b * xr * np.cos(np.pi * xr * (1 + b))
    den = np.pi * xr * (1 - (4 * b * xr) ** 2)
    out[rest] = num / den
    out[at_zero] = 1 - b + 4 * b / np.pi
    if b > 0:
        out[at_sing] = (b / np.sqrt(2)) * (
            (1 + 2 / np.pi) * np.sin(np.pi / (4 * b)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b))
        )
    return out[()] if out.ndim == 0 else out


def _last_crossing(func, threshold: float, rolloff: float) -> float:
    """Largest ``x >= 0`` with ``|func(x)| >= threshold * func(0)`` on a fine grid."""
    peak = abs(float(func(0.0, rolloff)))
    # beyond max(1/(pi thr), 1/rolloff) both pulses stay below 1/(pi x)
    x_max = 1.0 / (np.pi * threshold) + (1.0 / rolloff if rolloff > 0 else 0.0) + 4.0
    x = np.arange(0.0, x_max, 1.0 / 64)
    above = np.nonzero(np.abs(func(x, rolloff)) >= threshold * peak)[0]
    return float(x[above[-1]]) if above.size else 0.0


def effective_support(rolloff: float, trunc_threshold: float) -> int:
    """Smallest even ``D`` with ``|g(t)| < thr g(0)`` for ``|t| > (D/2) T_s``."""
    last = _last_crossing(raised_cosine, trunc_threshold, rolloff)
    return 2 * max(1, int(np.ceil(last + 1.0 / 64)))


@dataclass(frozen=True)
class PulseConfig:
    """Prototype / composition filter settings.

    ``D`` is derived from ``trunc_threshold`` and is not an init argument.
    """

    rolloff: float = 0.1
    symbol_period: float = 1.0 / 7.68e6
    trunc_threshold: float = 1e-3
    causal: bool = False
    D: int = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError(f"rolloff must lie in [0, 1], got {self.rolloff}")
        if self.symbol_period <= 0:
            raise ValueError("symbol_period must be positive")
        if not 0.0 < self.trunc_threshold < 1.0:
            raise ValueError("trunc_threshold must lie in (0, 1)")
        object.__setattr__(self, "D", effective_support(self.rolloff, self.trunc_threshold))

    @property
    def rrc_span(self) -> float:
        """Half-length (symbols) of the truncated RRC used by the waveform oracle."""
        return float(np.ceil(_last_crossing(root_raised_cosine, self.trunc_threshold, self.rolloff) + 1.0 / 64))


def composition_filter(t, pc: PulseConfig):
    """Composition filter ``g(t)`` in seconds (raised cosine, ``g(0) = 1``)."""
    return raised_cosine(np.asarray(t, dtype=float) / pc.symbol_period, pc.rolloff)


def path_taps(l: float, pc: PulseConfig) -> tuple[np.ndarray, np.ndarray]:
    """Integer taps ``d`` and weights ``g(d T_s - tau)`` for normalized delay ``l``.

    Only taps inside the effective support of ``g`` are returned.
    """
    half = pc.D // 2
    if pc.causal:
        d = np.arange(int(np.ceil(l)), int(np.floor(l)) + pc.D + 1)
        w = raised_cosine(d - l - half, pc.rolloff)
    else:
        d = np.arange(int(np.ceil(l - half)), int(np.floor(l + half)) + 1)
        w = raised_cosine(d - l, pc.rolloff)
    return d, w


@dataclass(frozen=True)
class FrameConfig:
    """AFDM frame parameters: ``N = B T_f`` symbols at symbol period ``1/B``.

    ``L_cpp`` of ``None`` means "pick a default from the channel" (see
    :func:`fafdm.channel.default_cpp_length`).
    """

    N: int = 512
    bandwidth_hz: float = 7.68e6
    c1: float = 1.0 / 512
    c2: float = 0.0
    L_cpp: Optional[int] = None

    @property
    def T_s(self) -> float:
        return 1.0 / self.bandwidth_hz

    @property
    def T_f(self) -> float:
        return self.N / self.bandwidth_hz

    @property
    def daft(self) -> DaftParams:
        return DaftParams(self.N, self.c1, self.c2)


@dataclass(frozen=True)
class AfdmFrame:
    """One AFDM frame: DAFT symbols, TD signal and TD signal with prefix."""

    x: np.ndarray
    s: np.ndarray
    s_cpp: np.ndarray
    L_cpp: int


def add_cpp(s: np.ndarray, p: DaftParams, L_cpp: int) -> np.ndarray:
    """Prepend an ``L_cpp``-long chirp-periodic prefix to ``s``.

    Prefix sample ``n`` (``-L_cpp <= n <= -1``) is
    ``s[N + n] exp(-j2pi c1 (N^2 + 2 N n))``.
    """
    s = np.asarray(s)
    N = s.shape[-1]
    if L_cpp < 0 or L_cpp > N:
        raise ValueError(f"L_cpp must lie in [0, N={N}], got {L_cpp}")
    if L_cpp == 0:
        return s.copy()
    n = np.arange(-L_cpp, 0)
    phase = np.mod(p.c1 * (N**2 + 2.0 * N * n), 1.0)
    prefix = s[..., N + n] * np.exp(-2j * np.pi * phase)
    return np.concatenate([prefix, s], axis=-1)


def modulate(x: np.ndarray, p: DaftParams, L_cpp: int) -> AfdmFrame:
    """Map DAFT-domain symbols to a TD frame with chirp-periodic prefix."""
    x = np.asarray(x, dtype=complex)
    s = idaft(x, p)
    return AfdmFrame(x=x, s=s, s_cpp=add_cpp(s, p, L_cpp), L_cpp=int(L_cpp))


def _rrc_kernel(pc: PulseConfig, osf: int, delay: float = 0.0) -> tuple[int, np.ndarray]:
    """Samples ``a(m/osf - delay)`` over the truncated RRC support.

    Returns the first index ``m_lo`` and the kernel. Samples outside
    ``|m/osf - delay| <= span`` are zero.
    """
    span = pc.rrc_span
    m_lo = int(np.ceil((delay - span) * osf))
    m_hi = int(np.floor((delay + span) * osf))
    m = np.arange(m_lo, m_hi + 1)
    return m_lo, root_raised_cosine(m / osf - delay, pc.rolloff)


def pulse_train(seq: np.ndarray, n0: int, pc: PulseConfig, osf: int, delay: float = 0.0):
    """Oversampled ``sum_i seq[i] a(t - (n0 + i) - delay)``.

    Returns ``(q0, y)`` where ``y[q]`` is the value at ``t = (q0 + q)/osf``
    symbol periods.
    """
    seq = np.asarray(seq, dtype=complex)
    up = np.zeros(len(seq) * osf, dtype=complex)
    up[::osf] = seq
    m_lo, kern = _rrc_kernel(pc, osf, delay)
    return n0 * osf + m_lo, np.convolve(up, kern)


def synthesize_oversampled(frame: AfdmFrame, pc: PulseConfig, osf: int, return_time: bool = False):
    """Continuous-time filtered-AFDM signal ``s(t) = sum_n s_cpp[n] a(t - n T_s)``.

    Sampled at ``osf`` points per symbol period. The truncated RRC is
    evaluated analytically, so no interpolation is involved.

    Parameters
    ----------
    frame : AfdmFrame
    pc : PulseConfig
    osf : int
        Oversampling factor, at least 4.
    return_time : bool
        Also return the sampling instants in seconds.

    Returns
    -------
    samples : ndarray
        Waveform samples with a unit-energy pulse in symbol-normalized
        time, so ``sum(|s|^2) / osf`` approximates ``||s_cpp||^2``.
    t : ndarray, optional
    """
    if osf < 4:
        raise ValueError("osf must be at least 4")
    q0, y = pulse_train(frame.s_cpp, -frame.L_cpp, pc, osf)
    if return_time:
        t = (q0 + np.arange(len(y))) / osf * pc.symbol_period
        return y, t
    return y
