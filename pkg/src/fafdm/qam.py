"""Gray-labeled square QAM with unit average symbol energy."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["constellation", "bits_per_symbol", "qam_map", "qam_demap", "qam_indices", "nearest_index"]

_ORDERS = (4, 16, 64)


def bits_per_symbol(order: int) -> int:
    if order not in _ORDERS:
        raise ValueError(f"QAM order must be one of {_ORDERS}, got {order}")
    return int(order).bit_length() - 1


@lru_cache(maxsize=None)
def _table(order: int) -> np.ndarray:
    m = bits_per_symbol(order)
    half = m // 2
    L = 1 << half
    idx = np.arange(order)
    hi, lo = idx >> half, idx & (L - 1)

    def level(g):
        # Gray code to PAM position
        b = g.copy()
        shift = g >> 1
        while np.any(shift):
            b ^= shift
            shift >>= 1
        return 2 * b - (L - 1)

    pts = level(hi) + 1j * level(lo)
    pts = pts / np.sqrt(2 * (order - 1) / 3)
    pts.flags.writeable = False
    return pts


def constellation(order: int = 4) -> np.ndarray:
    """Points indexed by their bit label (MSB first; leading half of the bits selects I)."""
    return _table(order)


def qam_indices(bits: np.ndarray, order: int) -> np.ndarray:
    m = bits_per_symbol(order)
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % m:
        raise ValueError(f"bit count {bits.size} not divisible by {m}")
    weights = 1 << np.arange(m - 1, -1, -1)
    return bits.reshape(-1, m) @ weights


def qam_map(bits: np.ndarray, order: int = 4) -> np.ndarray:
    """Map a bit vector to symbols."""
    return _table(order)[qam_indices(bits, order)]


def nearest_index(y: np.ndarray, order: int = 4) -> np.ndarray:
    """Index of the closest point; ties go to the lowest index."""
    pts = _table(order)
    d = np.abs(np.asarray(y)[..., None] - pts) ** 2
    return np.argmin(d, axis=-1)


def qam_demap(symbols: np.ndarray, order: int = 4) -> np.ndarray:
    """Nearest-neighbour hard demapping to bits."""
    m = bits_per_symbol(order)
    idx = nearest_index(symbols, order)
    shifts = np.arange(m - 1, -1, -1)
    return ((idx[..., None] >> shifts) & 1).reshape(-1).astype(np.uint8)
