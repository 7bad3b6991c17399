"""
Doubly selective physical channels and their f-AFDM channel matrices.

A channel is a finite set of paths with complex gain ``h_p``, continuous
delay ``tau_p = l_p T_s`` and Doppler ``nu_p = k_p / T_f``; ``l_p`` and
``k_p`` are real (off-grid). After the matched filter and symbol-rate
sampling, with the prefix interpreted as a cyclic prefix, the TD model is

    r[n] = sum_p ht_p exp(j2pi k_p n / N) sum_d g(d T_s - tau_p) s[(n - d)_N]

with ``ht_p = h_p exp(-j2pi nu_p tau_p)``. The FD and DAFT matrices are the
unitary conjugates ``F H F^H`` and ``Phi H Phi^H`` of the TD matrix, built
here from closed forms in the Dirichlet kernel.

Noise after the matched filter is modelled as white at symbol rate: the
raised-cosine composition filter is Nyquist, so the sampled noise has no
correlation at nonzero integer lags.
"""

from __future__ import annotations

import configparser
from functools import lru_cache
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .equalizers.banded import CyclicBandedMatrix, full_band_limits
from .transforms import DaftParams, dirichlet
from .waveform import AfdmFrame, FrameConfig, PulseConfig, path_taps, pulse_train, root_raised_cosine

__all__ = [
    "SPEED_OF_LIGHT",
    "PathParams",
    "ChannelProfile",
    "EVA",
    "EPA",
    "ETU",
    "PROFILES",
    "get_profile",
    "load_profile",
    "DoublySelectiveChannel",
    "ChannelMatrix",
    "sample_channel",
    "channel_from_speeds",
    "default_cpp_length",
    "td_channel_band",
    "fd_channel_band",
    "daft_channel_band",
    "td_channel_matrix",
    "fd_channel_matrix",
    "daft_channel_matrix",
    "apply_td_channel",
    "awgn",
    "propagate",
    "oversampled_propagate",
    "BandwidthEstimates",
    "bandwidth_estimates",
    "matrix_occupancy",
    "occupied_halfwidth",
]

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class PathParams:
    """One propagation path.

    ``l = delay_s / T_s`` and ``k = doppler_hz * T_f``; use
    :meth:`from_physical` to keep the two descriptions consistent.
    """

    gain: complex
    delay_s: float
    doppler_hz: float
    l: float
    k: float

    @classmethod
    def from_physical(cls, gain: complex, delay_s: float, doppler_hz: float, cfg: FrameConfig) -> "PathParams":
        if delay_s < 0:
            raise ValueError("path delay must be nonnegative")
        return cls(complex(gain), float(delay_s), float(doppler_hz), delay_s / cfg.T_s, doppler_hz * cfg.T_f)

    @classmethod
    def from_normalized(cls, gain: complex, l: float, k: float, cfg: FrameConfig) -> "PathParams":
        if l < 0:
            raise ValueError("normalized delay must be nonnegative")
        return cls(complex(gain), l * cfg.T_s, k / cfg.T_f, float(l), float(k))


@dataclass(frozen=True)
class ChannelProfile:
    """Tapped power-delay profile (delays in seconds, powers in dB)."""

    name: str
    tap_delays_s: tuple
    avg_powers_db: tuple
    normalize: bool = True

    def __post_init__(self):
        if len(self.tap_delays_s) != len(self.avg_powers_db):
            raise ValueError("delays and powers must have the same length")
        if len(self.tap_delays_s) == 0:
            raise ValueError("profile has no taps")
        if np.any(np.diff(self.tap_delays_s) < 0):
            raise ValueError("tap delays must be nondecreasing")

    @property
    def P(self) -> int:
        return len(self.tap_delays_s)

    def powers_linear(self) -> np.ndarray:
        p = 10.0 ** (np.asarray(self.avg_powers_db, dtype=float) / 10.0)
        return p / p.sum() if self.normalize else p


def _profile(name, delays_ns, powers_db):
    return ChannelProfile(name, tuple(1e-9 * np.asarray(delays_ns, float)), tuple(float(p) for p in powers_db))


# 3GPP TS 36.104 Annex B.2
EPA = _profile("EPA", [0, 30, 70, 90, 110, 190, 410], [0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8])
EVA = _profile(
    "EVA", [0, 30, 150, 310, 370, 710, 1090, 1730, 2510], [0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9]
)
ETU = _profile("ETU", [0, 50, 120, 200, 230, 500, 1600, 2300, 5000], [-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -3.0, -5.0, -7.0])
PROFILES = {p.name: p for p in (EPA, EVA, ETU)}


def get_profile(name: str) -> ChannelProfile:
    try:
        return PROFILES[name.upper()]
    except KeyError:
        raise ValueError(f"unknown channel profile {name!r}; known: {sorted(PROFILES)}") from None


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def load_profile(path) -> ChannelProfile:
    """Read a profile from a ``[profile]`` section with ``name``,
    ``delays_ns`` and ``powers_db`` keys (whitespace or comma separated)."""
    cp = configparser.ConfigParser()
    with open(Path(path)) as fh:
        cp.read_file(fh)
    sec = cp["profile"]
    normalize = sec.getboolean("normalize", fallback=True)
    return ChannelProfile(
        sec.get("name", Path(path).stem),
        tuple(1e-9 * np.asarray(_floats(sec["delays_ns"]))),
        tuple(_floats(sec["powers_db"])),
        normalize,
    )


@dataclass(frozen=True)
class DoublySelectiveChannel:
    """A realization of the spreading function: a tuple of paths."""

    paths: tuple

    @property
    def P(self) -> int:
        return len(self.paths)

    @property
    def l_max(self) -> float:
        return max(p.l for p in self.paths)

    @property
    def k_max(self) -> float:
        return max(abs(p.k) for p in self.paths)

    def arrays(self):
        """``(h, l, k)`` as numpy arrays."""
        h = np.array([p.gain for p in self.paths], dtype=complex)
        l = np.array([p.l for p in self.paths], dtype=float)
        k = np.array([p.k for p in self.paths], dtype=float)
        return h, l, k

    def effective_gains(self, N: int) -> np.ndarray:
        """``h_p exp(-j2pi nu_p tau_p)``; ``nu_p tau_p = k_p l_p / N``."""
        h, l, k = self.arrays()
        return h * np.exp(-2j * np.pi * k * l / N)


@dataclass(frozen=True)
class ChannelMatrix:
    """Dense N x N channel matrix tagged with its domain."""

    domain: str
    entries: np.ndarray

    def __post_init__(self):
        if self.domain not in ("time", "frequency", "daft"):
            raise ValueError(f"unknown domain {self.domain!r}")

    @property
    def N(self) -> int:
        return self.entries.shape[0]


def sample_channel(
    profile: ChannelProfile, fc: float, v_max: float, rng: np.random.Generator, cfg: FrameConfig
) -> DoublySelectiveChannel:
    """Draw one channel: Rayleigh gains on the profile taps and Jakes Doppler.

    Each tap gets ``h_p ~ CN(0, P_p)`` and ``nu_p = f_d cos(theta_p)`` with
    ``theta_p`` uniform and ``f_d = v_max fc / c``.
    """
    if fc <= 0:
        raise ValueError("carrier frequency must be positive")
    if v_max < 0:
        raise ValueError("v_max must be nonnegative")
    P = profile.P
    pw = profile.powers_linear()
    h = np.sqrt(pw / 2) * (rng.standard_normal(P) + 1j * rng.standard_normal(P))
    theta = rng.uniform(0.0, 2 * np.pi, P)
    nu = v_max * fc / SPEED_OF_LIGHT * np.cos(theta)
    paths = tuple(PathParams.from_physical(h[i], profile.tap_delays_s[i], nu[i], cfg) for i in range(P))
    return DoublySelectiveChannel(paths)


def channel_from_speeds(
    delays_s: Sequence[float],
    powers_db: Sequence[float],
    speeds_kmh: Sequence[float],
    fc: float,
    cfg: FrameConfig,
    phases: Optional[Sequence[float]] = None,
) -> DoublySelectiveChannel:
    """Channel with per-path powers and signed radial speeds given directly.

    ``nu_p = v_p fc / c``. Phases default to zero.
    """
    amps = np.sqrt(10.0 ** (np.asarray(powers_db, float) / 10.0))
    ph = np.zeros(len(amps)) if phases is None else np.asarray(phases, float)
    nu = np.asarray(speeds_kmh, float) / 3.6 * fc / SPEED_OF_LIGHT
    paths = tuple(
        PathParams.from_physical(amps[i] * np.exp(1j * ph[i]), delays_s[i], nu[i], cfg) for i in range(len(amps))
    )
    return DoublySelectiveChannel(paths)


def default_cpp_length(ch: DoublySelectiveChannel, pc: PulseConfig) -> int:
    """Prefix long enough for the whole effective channel memory."""
    memory = pc.D if pc.causal else pc.D // 2
    return memory + int(np.ceil(ch.l_max)) + 1


@lru_cache(maxsize=16)
def _circular_taps(ch: DoublySelectiveChannel, pc: PulseConfig, N: int) -> np.ndarray:
    """``c[p, d mod N] = sum g(d T_s - tau_p)`` over the taps of each path."""
    c = np.zeros((ch.P, N))
    for i, path in enumerate(ch.paths):
        d, w = path_taps(path.l, pc)
        np.add.at(c[i], d % N, w)
    c.flags.writeable = False
    return c


def _band_limits(N: int, lo: int, hi: int) -> tuple[int, int]:
    if lo + hi + 1 >= N:
        return full_band_limits(N)
    return lo, hi


def td_channel_band(ch: DoublySelectiveChannel, cfg: FrameConfig, pc: PulseConfig, lo: int, hi: int) -> CyclicBandedMatrix:
    """Cyclic diagonals ``-hi..lo`` of the TD channel matrix."""
    N = cfg.N
    lo, hi = _band_limits(N, lo, hi)
    ht = ch.effective_gains(N)
    _, _, k = ch.arrays()
    c = _circular_taps(ch, pc, N)
    offs = np.arange(-hi, lo + 1)
    j = np.arange(N)
    rows = (j[None, :] + offs[:, None]) % N
    bands = np.zeros((len(offs), N), dtype=complex)
    for p in range(ch.P):
        doppler = np.exp(2j * np.pi * k[p] * np.arange(N) / N)
        bands += ht[p] * c[p, offs % N][:, None] * doppler[rows]
    return CyclicBandedMatrix(N, lo, hi, bands)


def fd_channel_band(
    ch: DoublySelectiveChannel, cfg: FrameConfig, pc: PulseConfig, lo: int, hi: Optional[int] = None
) -> CyclicBandedMatrix:
    """Cyclic diagonals of the FD channel matrix.

    Entry ``(n_dot, n_bar)`` is ``sum_p ht_p gdot_p[n_bar] Omega(n_bar - n_dot + k_p) / N``
    where ``gdot_p`` is the N-point DFT of the path's taps.
    """
    N = cfg.N
    hi = lo if hi is None else hi
    lo, hi = _band_limits(N, lo, hi)
    ht = ch.effective_gains(N)
    _, _, k = ch.arrays()
    gdot = np.fft.fft(_circular_taps(ch, pc, N), axis=1)
    offs = np.arange(-hi, lo + 1)
    # offset d = n_dot - n_bar
    omega = dirichlet(k[None, :] - offs[:, None], N) / N  # (n_offs, P)
    bands = (omega * ht[None, :]) @ gdot
    return CyclicBandedMatrix(N, lo, hi, bands)


def _check_daft_constraint(p: DaftParams):
    if p.N % 2 or abs(2 * p.c1 * p.N - round(2 * p.c1 * p.N)) > 1e-9:
        raise ValueError("DAFT channel matrix needs N even and 2*c1*N integer")


def daft_channel_band(
    ch: DoublySelectiveChannel, cfg: FrameConfig, pc: PulseConfig, p: DaftParams, lo: int, hi: Optional[int] = None
) -> CyclicBandedMatrix:
    """Cyclic diagonals of the DAFT channel matrix ``Phi H Phi^H``.

    Entry ``(m_dot, m)`` is
    ``exp(-j2pi c2 (m_dot^2 - m^2)) sum_p ht_p sum_d g(d T_s - tau_p) exp(j2pi c1 d^2)
    exp(-j2pi d m / N) Omega(m - m_dot - 2 c1 N d + k_p) / N``.
    """
    _check_daft_constraint(p)
    N = cfg.N
    hi = lo if hi is None else hi
    lo, hi = _band_limits(N, lo, hi)
    ht = ch.effective_gains(N)
    _, _, k = ch.arrays()
    offs = np.arange(-hi, lo + 1)
    m = np.arange(N)
    shift = p.shift_per_tap
    acc = np.zeros((len(offs), N), dtype=complex)
    for i, path in enumerate(ch.paths):
        d, w = path_taps(path.l, pc)
        keep = w != 0
        d, w = d[keep], w[keep]
        c1d2 = np.mod(p.c1 * d.astype(float) ** 2, 1.0)
        coef = w * np.exp(2j * np.pi * c1d2) / N
        # offset e = m_dot - m, so the Dirichlet argument is k_p - e - shift*d
        omega = dirichlet(k[i] - offs[:, None] - shift * d[None, :], N)
        phase = np.exp(-2j * np.pi * ((np.outer(d, m)) % N) / N)
        acc += ht[i] * (omega * coef[None, :]) @ phase
    if p.c2 != 0:
        m_dot = (m[None, :] + offs[:, None]) % N
        c2m = np.mod(p.c2 * m.astype(float) ** 2, 1.0)
        acc *= np.exp(-2j * np.pi * (c2m[m_dot] - c2m[None, :]))
    return CyclicBandedMatrix(N, lo, hi, acc)


def td_channel_matrix(ch: DoublySelectiveChannel, cfg: FrameConfig, pc: PulseConfig) -> ChannelMatrix:
    """Dense TD channel matrix ``H``."""
    lo, hi = full_band_limits(cfg.N)
    return ChannelMatrix("time", td_channel_band(ch, cfg, pc, lo, hi).to_dense())


def fd_channel_matrix(ch: DoublySelectiveChannel, cfg: FrameConfig, pc: PulseConfig) -> ChannelMatrix:
    """Dense FD channel matrix, equal to ``F H F^H``."""
    lo, hi = full_band_limits(cfg.N)
    return ChannelMatrix("frequency", fd_channel_band(ch, cfg, pc, lo, hi).to_dense())


def daft_channel_matrix(
    ch: DoublySelectiveChannel, cfg: FrameConfig, pc: PulseConfig, p: Optional[DaftParams] = None
) -> ChannelMatrix:
    """Dense DAFT channel matrix, equal to ``Phi H Phi^H``."""
    p = cfg.daft if p is None else p
    lo, hi = full_band_limits(cfg.N)
    return ChannelMatrix("daft", daft_channel_band(ch, cfg, pc, p, lo, hi).to_dense())


def apply_td_channel(ch: DoublySelectiveChannel, s: np.ndarray, cfg: FrameConfig, pc: PulseConfig) -> np.ndarray:
    """Noise-free ``H @ s`` through per-path FFT circular convolution."""
    N = cfg.N
    ht = ch.effective_gains(N)
    _, _, k = ch.arrays()
    c = _circular_taps(ch, pc, N)
    conv = np.fft.ifft(np.fft.fft(c, axis=1) * np.fft.fft(s)[None, :], axis=1)
    doppler = np.exp(2j * np.pi * np.outer(k, np.arange(N)) / N)
    return np.sum(ht[:, None] * doppler * conv, axis=0)


def awgn(N: int, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Circular complex Gaussian noise with variance ``sigma2`` per sample."""
    if sigma2 < 0:
        raise ValueError("noise variance must be nonnegative")
    return np.sqrt(sigma2 / 2) * (rng.standard_normal(N) + 1j * rng.standard_normal(N))


def propagate(frame: AfdmFrame, H: ChannelMatrix, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """``r = H s + w`` with the TD matrix ``H``."""
    if H.domain != "time":
        raise ValueError(f"propagate needs a time-domain matrix, got {H.domain!r}")
    s = frame.s
    return H.entries @ s + awgn(len(s), sigma2, rng)


def oversampled_propagate(
    frame: AfdmFrame,
    ch: DoublySelectiveChannel,
    pc: PulseConfig,
    osf: int,
    sigma2: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Waveform-level reference receiver for the TD matrix.

    Builds ``sum_p h_p s(t - tau_p) exp(j2pi nu_p (t - tau_p))`` on an
    ``osf``-times oversampled grid from the analytic truncated RRC, passes it
    through the matched filter ``a^*(-t)`` and samples at ``t = n T_s``.
    The frame is extended periodically on both sides, so every output
    sample sees the cyclic input assumed by the matrix model.
    """
    if osf < 8:
        raise ValueError("osf must be at least 8")
    if pc.causal:
        raise ValueError("the waveform reference uses the symmetric pulse convention")
    s = np.asarray(frame.s)
    N = len(s)
    span = pc.rrc_span
    reach = int(np.ceil(2 * span)) + 2
    n_lo = -(reach + int(np.ceil(ch.l_max)))
    n_hi = N - 1 + reach
    seq = s[np.arange(n_lo, n_hi + 1) % N]

    parts = []
    for path in ch.paths:
        q0, y = pulse_train(seq, n_lo, pc, osf, delay=path.l)
        t = (q0 + np.arange(len(y))) / osf
        y = path.gain * y * np.exp(2j * np.pi * (path.k / N) * (t - path.l))
        parts.append((q0, y))
    q_start = min(q for q, _ in parts)
    q_end = max(q + len(y) for q, y in parts)
    rx = np.zeros(q_end - q_start, dtype=complex)
    for q0, y in parts:
        rx[q0 - q_start : q0 - q_start + len(y)] += y
    if sigma2 > 0:
        if rng is None:
            raise ValueError("rng required when sigma2 > 0")
        rx += awgn(len(rx), sigma2 * osf, rng)

    M = int(np.floor(span * osf))
    mm = np.arange(-M, M + 1)
    a = root_raised_cosine(mm / osf, pc.rolloff)
    n = np.arange(N)
    idx = (n * osf - q_start)[:, None] + mm[None, :]
    return rx[idx] @ a / osf


@dataclass(frozen=True)
class BandwidthEstimates:
    td_bw: int
    fd_halfbw: int
    daft_bw: int


def bandwidth_estimates(
    ch: DoublySelectiveChannel, cfg: FrameConfig, pc: PulseConfig, p: Optional[DaftParams] = None, gamma: int = 4
) -> BandwidthEstimates:
    """Analytic band sizes of the TD, FD and DAFT channel matrices.

    ``td_bw = D + ceil(l_max)``, ``fd_halfbw = gamma + ceil(k_max)`` and
    ``daft_bw = 2 c1 N (D + ceil(l_max)) + 2 (gamma + ceil(k_max)) + 1``.
    """
    p = cfg.daft if p is None else p
    lm = int(np.ceil(ch.l_max - 1e-12))
    km = int(np.ceil(ch.k_max - 1e-12))
    td = pc.D + lm
    fd = gamma + km
    return BandwidthEstimates(td, fd, p.shift_per_tap * td + 2 * fd + 1)


def matrix_occupancy(M, threshold_db: float = -30.0) -> np.ndarray:
    """Entries within ``threshold_db`` of the largest magnitude.

    Returns an ``(n, 3)`` array of ``(i, j, magnitude_db)`` rows, the
    magnitude relative to the matrix maximum.
    """
    if threshold_db >= 0:
        raise ValueError("threshold_db must be negative")
    A = np.abs(np.asarray(getattr(M, "entries", M)))
    peak = A.max()
    if peak == 0:
        return np.zeros((0, 3))
    with np.errstate(divide="ignore"):
        mag_db = 20 * np.log10(A / peak)
    i, j = np.nonzero(mag_db > threshold_db)
    return np.column_stack([i, j, mag_db[i, j]])


def occupied_halfwidth(triplets: np.ndarray, N: int) -> int:
    """Largest cyclic distance ``|i - j|`` (wrapped) among occupied entries."""
    if len(triplets) == 0:
        return 0
    d = (triplets[:, 0].astype(int) - triplets[:, 1].astype(int)) % N
    d = np.minimum(d, N - d)
    return int(d.max())
