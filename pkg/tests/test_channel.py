import numpy as np
import pytest

from fafdm.channel import (
    EVA,
    SPEED_OF_LIGHT,
    ChannelMatrix,
    ChannelProfile,
    DoublySelectiveChannel,
    PathParams,
    apply_td_channel,
    bandwidth_estimates,
    channel_from_speeds,
    daft_channel_band,
    daft_channel_matrix,
    default_cpp_length,
    fd_channel_band,
    fd_channel_matrix,
    get_profile,
    load_profile,
    matrix_occupancy,
    occupied_halfwidth,
    oversampled_propagate,
    propagate,
    sample_channel,
    td_channel_band,
    td_channel_matrix,
)
from fafdm.equalizers.banded import band_approximate
from fafdm.transforms import DaftParams, daft_matrix, dft_matrix
from fafdm.waveform import FrameConfig, PulseConfig, modulate, raised_cosine

from conftest import crandn

# (500 km/h) * 6 GHz / c * (512 / 7.68 MHz), evaluated by hand
K_BOUND_REFERENCE = 0.1853133862211956


def single(cfg, h, l, k):
    return DoublySelectiveChannel((PathParams.from_normalized(h, l, k, cfg),))


def td_oracle(ch, cfg, pc):
    """Entry-by-entry evaluation of the TD matrix definition."""
    N = cfg.N
    H = np.zeros((N, N), complex)
    ht = ch.effective_gains(N)
    for p, path in enumerate(ch.paths):
        half = pc.D // 2
        for d in range(int(np.ceil(path.l - half)), int(np.floor(path.l + half)) + 1):
            g = raised_cosine(d - path.l, pc.rolloff)
            for n in range(N):
                H[n, (n - d) % N] += ht[p] * g * np.exp(2j * np.pi * path.k * n / N)
    return H


def test_path_params_normalization(small_cfg):
    cfg, _ = small_cfg
    p = PathParams.from_physical(1.0, 3.5 * cfg.T_s, 0.25 / cfg.T_f, cfg)
    assert p.l == pytest.approx(3.5) and p.k == pytest.approx(0.25)
    q = PathParams.from_normalized(1.0, 2.0, -0.5, cfg)
    assert q.delay_s == pytest.approx(2 * cfg.T_s) and q.doppler_hz == pytest.approx(-0.5 / cfg.T_f)


def test_profiles(tmp_path):
    assert EVA.P == 9 and get_profile("eva") is EVA
    assert EVA.powers_linear().sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        get_profile("XYZ")
    with pytest.raises(ValueError):
        ChannelProfile("bad", (0.0, 1e-9), (0.0,))
    with pytest.raises(ValueError):
        ChannelProfile("bad", (2e-9, 1e-9), (0.0, 0.0))
    f = tmp_path / "two.ini"
    f.write_text("[profile]\nname = two\ndelays_ns = 0, 100\npowers_db = 0 -3\n")
    prof = load_profile(f)
    assert prof.name == "two" and prof.tap_delays_s == pytest.approx((0.0, 1e-7))


def test_sample_channel_bounds():
    cfg = FrameConfig()
    rng = np.random.default_rng(5)
    kb = (500 / 3.6) * 6e9 / SPEED_OF_LIGHT * cfg.T_f
    assert kb == pytest.approx(K_BOUND_REFERENCE, rel=1e-12)
    for _ in range(20):
        ch = sample_channel(EVA, 6e9, 500 / 3.6, rng, cfg)
        assert ch.P == 9
        assert ch.k_max <= kb + 1e-12
        assert ch.l_max == pytest.approx(2510e-9 * 7.68e6)
    static = sample_channel(EVA, 6e9, 0.0, rng, cfg)
    assert static.k_max == 0
    with pytest.raises(ValueError):
        sample_channel(EVA, -1.0, 1.0, rng, cfg)


def test_channel_from_speeds():
    cfg = FrameConfig()
    ch = channel_from_speeds(EVA.tap_delays_s, [-3.0] * 9, [100.0] * 9, 6e9, cfg)
    _, _, k = ch.arrays()
    assert np.allclose(k, 100 / 3.6 * 6e9 / SPEED_OF_LIGHT * cfg.T_f)
    assert abs(ch.paths[0].gain) ** 2 == pytest.approx(10 ** -0.3)


def test_td_on_grid_examples(small_cfg):
    cfg, pc = small_cfg
    N = cfg.N
    H = td_channel_matrix(single(cfg, 1, 2, 0), cfg, pc).entries
    np.testing.assert_allclose(H, np.roll(np.eye(N), 2, axis=0), atol=1e-12)
    H = td_channel_matrix(single(cfg, 1, 0, 3), cfg, pc).entries
    np.testing.assert_allclose(H, np.diag(np.exp(2j * np.pi * 3 * np.arange(N) / N)), atol=1e-12)


def test_td_matches_entrywise_oracle(small_cfg):
    cfg, pc = small_cfg
    ch = sample_channel(EVA, 6e9, 500 / 3.6, np.random.default_rng(8), cfg)
    np.testing.assert_allclose(td_channel_matrix(ch, cfg, pc).entries, td_oracle(ch, cfg, pc), atol=1e-12)


def test_on_grid_degeneration(small_cfg):
    cfg, pc = small_cfg
    paths = tuple(PathParams.from_normalized(g, l, k, cfg) for g, l, k in [(1, 0, 1), (0.5j, 3, -2), (0.2, 7, 0)])
    H = td_channel_matrix(DoublySelectiveChannel(paths), cfg, pc).entries
    N = cfg.N
    i, j = np.nonzero(np.abs(H) > 1e-12)
    assert set(((i - j) % N).tolist()) <= {0, 3, 7}
    Hf = fd_channel_matrix(DoublySelectiveChannel((paths[2],)), cfg, pc).entries
    assert np.max(np.abs(Hf - np.diag(np.diag(Hf)))) < 1e-12


@pytest.mark.parametrize("c2", [0.0, 0.21])
def test_cross_domain_consistency(small_cfg, c2):
    cfg, pc = small_cfg
    p = DaftParams(cfg.N, cfg.c1, c2)
    F, Phi = dft_matrix(cfg.N), daft_matrix(p)
    rng = np.random.default_rng(9)
    for _ in range(5):
        ch = sample_channel(EVA, 6e9, 500 / 3.6, rng, cfg)
        H = td_channel_matrix(ch, cfg, pc).entries
        Hf = fd_channel_matrix(ch, cfg, pc).entries
        Hd = daft_channel_matrix(ch, cfg, pc, p).entries
        nH = np.linalg.norm(H)
        assert np.linalg.norm(Hf - F @ H @ F.conj().T) / nH < 1e-10
        assert np.linalg.norm(Hd - Phi @ H @ Phi.conj().T) / nH < 1e-10
        assert np.linalg.norm(Hf) == pytest.approx(nH, rel=1e-10)
        assert np.linalg.norm(Hd) == pytest.approx(nH, rel=1e-10)


def test_off_grid_doppler_fd(small_cfg):
    cfg, pc = small_cfg
    F = dft_matrix(cfg.N)
    ch = single(cfg, 1, 0, 0.5)
    H = td_channel_matrix(ch, cfg, pc).entries
    np.testing.assert_allclose(fd_channel_matrix(ch, cfg, pc).entries, F @ H @ F.conj().T, atol=1e-13)


def test_daft_degenerates_to_fd(small_cfg):
    cfg, pc = small_cfg
    ch = sample_channel(EVA, 6e9, 500 / 3.6, np.random.default_rng(10), cfg)
    Hd = daft_channel_matrix(ch, cfg, pc, DaftParams(cfg.N)).entries
    np.testing.assert_allclose(Hd, fd_channel_matrix(ch, cfg, pc).entries, atol=1e-13)


def test_daft_main_lobe_diagonal(small_cfg):
    cfg, pc = small_cfg
    M = daft_channel_matrix(single(cfg, 1, 2, 1), cfg, pc).entries
    i, j = np.unravel_index(np.argmax(np.abs(M)), M.shape)
    # column minus row equals 2 c1 N l - k = 3
    assert (j - i) % cfg.N == 3


def test_band_builders_match_dense(small_cfg):
    cfg, pc = small_cfg
    ch = sample_channel(EVA, 6e9, 500 / 3.6, np.random.default_rng(11), cfg)
    for band, dense in (
        (td_channel_band(ch, cfg, pc, 9, 4), td_channel_matrix(ch, cfg, pc)),
        (fd_channel_band(ch, cfg, pc, 3), fd_channel_matrix(ch, cfg, pc)),
        (daft_channel_band(ch, cfg, pc, cfg.daft, 6, 2), daft_channel_matrix(ch, cfg, pc)),
    ):
        ref = dense.entries
        offs = band.offsets
        for d in offs:
            np.testing.assert_allclose(band.diagonal(d), np.array([ref[(j + d) % cfg.N, j] for j in range(cfg.N)]), atol=1e-13)


def test_band_decay_reference_size():
    cfg = FrameConfig()
    pc = PulseConfig(symbol_period=cfg.T_s)
    rng = np.random.default_rng(12)
    for _ in range(3):
        ch = sample_channel(EVA, 6e9, 500 / 3.6, rng, cfg)
        Hf = fd_channel_matrix(ch, cfg, pc).entries
        half = 4 + int(np.ceil(ch.k_max))
        kept = band_approximate(Hf, half).to_dense()
        assert np.linalg.norm(Hf - kept) ** 2 < 0.01 * np.linalg.norm(Hf) ** 2
        H = td_channel_matrix(ch, cfg, pc).entries
        lo = pc.D // 2 + int(np.ceil(ch.l_max))
        band = td_channel_band(ch, cfg, pc, lo, pc.D // 2).to_dense()
        assert np.linalg.norm(H - band) ** 2 < 0.01 * np.linalg.norm(H) ** 2


def test_propagate(small_cfg, rng):
    cfg, pc = small_cfg
    fr = modulate(crandn(rng, cfg.N), cfg.daft, 0)
    eye = ChannelMatrix("time", np.eye(cfg.N))
    np.testing.assert_array_equal(propagate(fr, eye, 0.0, rng), fr.s)
    zero = modulate(np.zeros(cfg.N), cfg.daft, 0)
    energy = np.mean([np.sum(np.abs(propagate(zero, eye, 0.3, rng)) ** 2) for _ in range(100)])
    assert energy == pytest.approx(cfg.N * 0.3, rel=0.05)
    with pytest.raises(ValueError):
        propagate(fr, ChannelMatrix("frequency", np.eye(cfg.N)), 0.0, rng)
    ch = sample_channel(EVA, 6e9, 500 / 3.6, rng, cfg)
    H = td_channel_matrix(ch, cfg, pc)
    np.testing.assert_allclose(apply_td_channel(ch, fr.s, cfg, pc), H.entries @ fr.s, atol=1e-12)
    f2 = modulate(crandn(rng, cfg.N), cfg.daft, 0)
    a, b = 0.7j, -1.3
    lin = modulate(a * fr.x + b * f2.x, cfg.daft, 0)
    np.testing.assert_allclose(
        propagate(lin, H, 0.0, rng), a * propagate(fr, H, 0.0, rng) + b * propagate(f2, H, 0.0, rng), atol=1e-12
    )


def test_oversampled_identity_and_half_delay(rng):
    cfg = FrameConfig(N=64, bandwidth_hz=7.68e6 / 8, c1=1 / 64)
    pc = PulseConfig(symbol_period=cfg.T_s, trunc_threshold=1e-4)
    fr = modulate(crandn(rng, 64), cfg.daft, 0)
    out = oversampled_propagate(fr, single(cfg, 1, 0, 0), pc, 16)
    assert np.linalg.norm(out - fr.s) / np.linalg.norm(fr.s) < 1e-2
    out = oversampled_propagate(fr, single(cfg, 1, 0.5, 0), pc, 16)
    d = np.arange(-pc.D // 2, pc.D // 2 + 2)
    pred = sum(raised_cosine(dd - 0.5, 0.1) * np.roll(fr.s, dd) for dd in d)
    assert np.linalg.norm(out - pred) / np.linalg.norm(pred) < 1e-2
    with pytest.raises(ValueError):
        oversampled_propagate(fr, single(cfg, 1, 0, 0), pc, 4)


def test_oversampled_matches_matrix(rng):
    cfg = FrameConfig(N=64, bandwidth_hz=7.68e6, c1=1 / 64)
    pc = PulseConfig(symbol_period=cfg.T_s, trunc_threshold=1e-4)
    for _ in range(3):
        ch = sample_channel(EVA, 6e9, 500 / 3.6, rng, cfg)
        fr = modulate(crandn(rng, 64), cfg.daft, 0)
        ref = td_channel_matrix(ch, cfg, pc).entries @ fr.s
        out = oversampled_propagate(fr, ch, pc, 16)
        assert np.linalg.norm(out - ref) / np.linalg.norm(ref) < 1e-2


def test_bandwidth_estimates():
    cfg = FrameConfig()
    pc = PulseConfig(symbol_period=cfg.T_s)
    ch = channel_from_speeds(EVA.tap_delays_s, [0.0] * 9, [500.0] * 9, 6e9, cfg)
    est = bandwidth_estimates(ch, cfg, pc, gamma=4)
    assert est.td_bw == pc.D + 20
    assert est.fd_halfbw == 5
    assert est.daft_bw == 2 * est.td_bw + 2 * 5 + 1
    assert est.daft_bw > est.fd_halfbw
    ofdm = bandwidth_estimates(ch, cfg, pc, DaftParams(cfg.N), gamma=4)
    assert ofdm.daft_bw == 2 * (4 + 1) + 1
    static = channel_from_speeds(EVA.tap_delays_s, [0.0] * 9, [0.0] * 9, 6e9, cfg)
    assert bandwidth_estimates(static, cfg, pc, gamma=1).fd_halfbw == 1


def test_default_cpp_length():
    cfg = FrameConfig()
    pc = PulseConfig()
    ch = sample_channel(EVA, 6e9, 0.0, np.random.default_rng(0), cfg)
    assert default_cpp_length(ch, pc) == pc.D // 2 + 20 + 1


def test_occupancy_helpers():
    trip = matrix_occupancy(np.eye(8), -30)
    assert len(trip) == 8 and np.all(trip[:, 0] == trip[:, 1])
    assert occupied_halfwidth(trip, 8) == 0
    M = np.eye(8) + 0.5 * np.roll(np.eye(8), 3, axis=0)
    assert occupied_halfwidth(matrix_occupancy(M, -30), 8) == 3
    with pytest.raises(ValueError):
        matrix_occupancy(np.eye(4), 3.0)
