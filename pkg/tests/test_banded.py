import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fafdm.equalizers.banded import CyclicBandedMatrix, band_approximate, full_band_limits

from conftest import crandn


def cyclic_mask(N, lo, hi):
    d = (np.arange(N)[:, None] - np.arange(N)[None, :]) % N
    d = np.where(d > lo, d - N, d)
    return d >= -hi


@settings(max_examples=40, deadline=None)
@given(N=st.integers(2, 24), lo=st.integers(0, 12), hi=st.integers(0, 12), seed=st.integers(0, 2**31))
def test_dense_round_trip(N, lo, hi, seed):
    if lo + hi + 1 > N:
        lo, hi = full_band_limits(N)
    rng = np.random.default_rng(seed)
    M = crandn(rng, N, N) * cyclic_mask(N, lo, hi)
    B = CyclicBandedMatrix.from_dense(M, lo, hi)
    np.testing.assert_array_equal(B.to_dense(), M)
    x = crandn(rng, N)
    np.testing.assert_allclose(B.matvec(x), M @ x, atol=1e-12)
    np.testing.assert_allclose(B.rmatvec(x), M.conj().T @ x, atol=1e-12)
    i, j = rng.integers(0, N, (2, 30))
    np.testing.assert_array_equal(B.take(i, j), M[i, j])


@settings(max_examples=40, deadline=None)
@given(N=st.integers(3, 40), lo=st.integers(0, 6), hi=st.integers(0, 6), extra=st.integers(0, 3), seed=st.integers(0, 2**31))
def test_gram_matches_dense(N, lo, hi, extra, seed):
    if lo + hi + 1 > N:
        lo, hi = full_band_limits(N)
    rng = np.random.default_rng(seed)
    M = crandn(rng, N, N) * cyclic_mask(N, lo, hi)
    B = CyclicBandedMatrix.from_dense(M, lo, hi)
    G = B.gram(0.3, half_bw=lo + hi + extra)
    np.testing.assert_allclose(G.to_dense(), M @ M.conj().T + 0.3 * np.eye(N), atol=1e-12)


def test_validation():
    with pytest.raises(ValueError):
        CyclicBandedMatrix(4, 2, 2, np.zeros((5, 4)))
    with pytest.raises(ValueError):
        CyclicBandedMatrix(8, 1, 1, np.zeros((2, 8)))
    B = CyclicBandedMatrix(8, 1, 1, np.zeros((3, 8), complex))
    with pytest.raises(ValueError):
        B.gram(0.1, half_bw=1)
    with pytest.raises(ValueError):
        band_approximate(np.eye(4), -1)


def test_band_approximate(rng):
    N = 12
    M = crandn(rng, N, N)
    B0 = band_approximate(M, 0)
    np.testing.assert_array_equal(B0.to_dense(), np.diag(np.diag(M)))
    B2 = band_approximate(M, 2)
    np.testing.assert_array_equal(B2.to_dense(), M * cyclic_mask(N, 2, 2))
    assert band_approximate(M, 6).is_full
    np.testing.assert_array_equal(band_approximate(M, 6).to_dense(), M)
    # narrowing an already banded matrix
    np.testing.assert_array_equal(band_approximate(B2, 1).to_dense(), M * cyclic_mask(N, 1, 1))
