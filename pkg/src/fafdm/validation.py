"""Quick self-checks of the numerical core, used by ``fafdm validate``."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .channel import EVA, fd_channel_matrix, daft_channel_matrix, sample_channel, td_channel_matrix
from .equalizers.banded import CyclicBandedMatrix, band_approximate, full_band_limits
from .equalizers.complexity import complexity_model
from .equalizers.stage1 import full_block_lmmse, stage1_banded_lmmse
from .equalizers.stage2 import local_mmse_window
from .transforms import DaftParams, daft, daft_matrix, dft_matrix, idaft
from .waveform import FrameConfig, PulseConfig

__all__ = ["Check", "run_checks", "REFERENCE_POWERS_DB", "REFERENCE_SPEEDS_KMH"]

# per-path powers and radial speeds of the reference EVA realization
REFERENCE_POWERS_DB = (-3.6, -5.9, -10.5, -4.2, -5.0, -6.8, -6.5, -9.2, -11.7)
REFERENCE_SPEEDS_KMH = (153.0, -472.0, 472.0, -380.0, 3.0, 189.0, 496.0, 482.0, -486.0)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def _transforms() -> Check:
    worst = 0.0
    rng = np.random.default_rng(0)
    for N in (4, 64, 512):
        p = DaftParams.afdm(N, c2=0.1)
        Phi = daft_matrix(p)
        err_u = np.linalg.norm(Phi @ Phi.conj().T - np.eye(N)) / (1e-10 * N)
        x = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        err_rt = np.max(np.abs(daft(idaft(x, p), p) - x)) / 1e-12
        worst = max(worst, err_u, err_rt)
    return Check("transform unitarity and round trip", worst < 1, f"worst error / tolerance = {worst:.2e}")


def _cross_domain() -> Check:
    rng = np.random.default_rng(1)
    cfg = FrameConfig(N=64, bandwidth_hz=7.68e6 / 8, c1=1 / 64)
    pc = PulseConfig(symbol_period=cfg.T_s)
    F, Phi = dft_matrix(64), daft_matrix(cfg.daft)
    worst = 0.0
    for _ in range(5):
        ch = sample_channel(EVA, 6e9, 500 / 3.6, rng, cfg)
        H = td_channel_matrix(ch, cfg, pc).entries
        nH = np.linalg.norm(H)
        worst = max(
            worst,
            np.linalg.norm(fd_channel_matrix(ch, cfg, pc).entries - F @ H @ F.conj().T) / nH,
            np.linalg.norm(daft_channel_matrix(ch, cfg, pc).entries - Phi @ H @ Phi.conj().T) / nH,
        )
    return Check("cross-domain channel matrices", worst < 1e-10, f"max relative error {worst:.2e}")


def _banded_solver() -> Check:
    rng = np.random.default_rng(2)
    N = 16
    M = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    lo, hi = full_band_limits(N)
    r = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    out = stage1_banded_lmmse(CyclicBandedMatrix.from_dense(M, lo, hi), r, 0.1)
    ref = full_block_lmmse(M, r, 0.1)
    eq = np.linalg.norm(out.s_hat - ref) / np.linalg.norm(ref)
    Hb = band_approximate(M, 2)
    G = Hb.gram(0.1, half_bw=5)
    L = stage1_banded_lmmse(Hb, r, 0.1).factor.to_dense()
    rec = np.linalg.norm(L @ L.conj().T - G.to_dense()) / np.linalg.norm(G.to_dense())
    return Check("banded LMMSE vs dense", eq < 1e-8 and rec < 1e-9, f"lossless {eq:.1e}, cholesky {rec:.1e}")


def _fallback_identity() -> Check:
    rng = np.random.default_rng(3)
    B, w, c = 200, 7, 13
    Hn = rng.standard_normal((B, w, c)) + 1j * rng.standard_normal((B, w, c))
    rn = rng.standard_normal((B, w)) + 1j * rng.standard_normal((B, w))
    sb = rng.standard_normal((B, c)) + 1j * rng.standard_normal((B, c))
    s_soft, e_soft = local_mmse_window(Hn, rn, sb, np.zeros((B, c)), 0.05, c // 2, "soft")
    s_hard, e_hard = local_mmse_window(Hn, rn, sb, np.zeros((B, c)), 0.05, c // 2, "hard")
    err = max(np.max(np.abs(s_soft - s_hard)), np.max(np.abs(e_soft - e_hard)))
    return Check("hard/soft local estimator identity", err < 1e-10, f"max difference {err:.1e}")


def _complexity() -> Check:
    rec = complexity_model(512, 7, 4, i_soft=3, i_hard=2)
    ok = rec.eta_soft == 179456 and rec.eta_hard == 20992 and rec.eta0 == Fraction(693869, 6)
    ok = ok and rec.total == rec.eta0 + 2 * rec.eta_hard + 3 * rec.eta_soft
    return Check("complexity closed forms", ok, f"eta0={rec.eta0} eta_soft={rec.eta_soft} eta_hard={rec.eta_hard}")


def run_checks() -> list[Check]:
    """Run all checks and return their outcomes."""
    return [_transforms(), _cross_domain(), _banded_solver(), _fallback_identity(), _complexity()]
