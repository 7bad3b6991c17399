import numpy as np
import pytest

from fafdm.qam import bits_per_symbol, constellation, nearest_index, qam_demap, qam_indices, qam_map


@pytest.mark.parametrize("order", [4, 16, 64])
def test_round_trip_and_energy(order, rng):
    m = bits_per_symbol(order)
    bits = rng.integers(0, 2, 120 * m)
    np.testing.assert_array_equal(qam_demap(qam_map(bits, order), order), bits)
    assert np.mean(np.abs(constellation(order)) ** 2) == pytest.approx(1.0, abs=1e-14)


def test_scalings():
    np.testing.assert_allclose(np.abs(constellation(4)), 1.0)
    assert np.min(np.abs(constellation(16).real)) == pytest.approx(1 / np.sqrt(10))
    assert np.min(np.abs(constellation(64).real)) == pytest.approx(1 / np.sqrt(42))


@pytest.mark.parametrize("order", [4, 16, 64])
def test_gray_neighbours(order):
    pts = constellation(order)
    d = np.abs(pts[:, None] - pts[None, :])
    dmin = np.min(d[d > 1e-9])
    idx = np.arange(order)
    for a in idx:
        for b in idx[np.isclose(d[a], dmin)]:
            assert bin(a ^ b).count("1") == 1


def test_tie_break_and_errors():
    assert nearest_index(np.array([0.0]), 4)[0] == 0
    with pytest.raises(ValueError):
        bits_per_symbol(8)
    with pytest.raises(ValueError):
        qam_indices(np.ones(3), 4)
