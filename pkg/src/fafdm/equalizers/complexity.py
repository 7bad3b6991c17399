"""Complex-multiplication (CM) counts of the two-stage equalizer.

Counts are returned as :class:`fractions.Fraction` because the stage-1
count has a ``2 beta / 3`` term that is generally not an integer. Totals
are therefore exact for any iteration split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = ["ComplexityRecord", "complexity_model", "eta0", "eta_soft", "eta_hard", "exact_log2"]


def exact_log2(N: int) -> Fraction:
    """``log2(N)``, exact when ``N`` is a power of two."""
    if N < 1:
        raise ValueError("N must be positive")
    if N & (N - 1) == 0:
        return Fraction(N.bit_length() - 1)
    return Fraction(math.log2(N))


def eta0(N: int, beta: int) -> Fraction:
    """CMs of the banded stage-1 LMMSE estimate and its error variances."""
    N, b = Fraction(N), Fraction(beta)
    return N * (3 * b**2 + 11 * b + Fraction(5, 2)) - b**3 / 2 - 3 * b**2 - 2 * b / 3


def eta_soft(N: int, beta: int, M: int) -> Fraction:
    """CMs of one soft stage-2 iteration with an ``M``-point alphabet."""
    n, b = Fraction(N), Fraction(beta)
    return 2 * n * exact_log2(N) + n / 12 * (2 * b**3 + 45 * b**2 + 109 * b) + 11 * n + Fraction(17, 4) * n * M


def eta_hard(N: int, beta: int, M: int) -> Fraction:
    """CMs of one hard-decision stage-2 iteration."""
    n = Fraction(N)
    return 2 * n * exact_log2(N) + n * (2 * beta + 7 + Fraction(M, 2))


@dataclass(frozen=True)
class ComplexityRecord:
    eta0: Fraction
    eta_soft: Fraction
    eta_hard: Fraction
    total: Fraction


def complexity_model(N: int, beta: int, M: int, i_soft: int = 0, i_hard: int = 0) -> ComplexityRecord:
    """Stage-1 and per-iteration CM counts plus the total for an iteration split.

    Parameters
    ----------
    N : int
        Frame length.
    beta : int
        Bandwidth ``2 * half_bw + 1`` of the banded matrix.
    M : int
        Constellation size.
    i_soft, i_hard : int
        Number of soft and hard-decision stage-2 iterations.
    """
    for name, v in (("N", N), ("beta", beta), ("M", M)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v}")
    if i_soft < 0 or i_hard < 0:
        raise ValueError("iteration counts must be nonnegative")
    e0, es, eh = eta0(N, beta), eta_soft(N, beta, M), eta_hard(N, beta, M)
    return ComplexityRecord(e0, es, eh, e0 + i_hard * eh + i_soft * es)
