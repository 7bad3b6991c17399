"""Banded two-stage equalizers and their reference solvers."""

from .banded import CyclicBandedMatrix, band_approximate, full_band_limits
from .complexity import ComplexityRecord, complexity_model, eta0, eta_hard, eta_soft
from .stage1 import BlockCholesky, Stage1Output, block_cholesky, full_block_lmmse, stage1_banded_lmmse
from .stage2 import (
    EqualizeResult,
    EqualizerOptions,
    IterationState,
    LocalWindows,
    fd_prior,
    hard_decisions,
    intermediate_daft_estimate,
    local_mmse_sweep,
    local_mmse_window,
    local_windows,
    run_stage2,
    stage1_only_equalize,
    symbol_posteriors,
    td_two_stage_equalize,
    two_stage_equalize,
)

__all__ = [
    "CyclicBandedMatrix",
    "band_approximate",
    "full_band_limits",
    "ComplexityRecord",
    "complexity_model",
    "eta0",
    "eta_soft",
    "eta_hard",
    "BlockCholesky",
    "Stage1Output",
    "block_cholesky",
    "stage1_banded_lmmse",
    "full_block_lmmse",
    "EqualizeResult",
    "EqualizerOptions",
    "IterationState",
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
