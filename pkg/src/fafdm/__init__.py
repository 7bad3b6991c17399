"""Filtered AFDM over doubly selective channels with banded two-stage equalization."""

from .channel import (
    EPA,
    ETU,
    EVA,
    ChannelMatrix,
    ChannelProfile,
    DoublySelectiveChannel,
    PathParams,
    bandwidth_estimates,
    daft_channel_band,
    daft_channel_matrix,
    fd_channel_band,
    fd_channel_matrix,
    matrix_occupancy,
    oversampled_propagate,
    propagate,
    sample_channel,
    td_channel_band,
    td_channel_matrix,
)
from .qam import constellation, qam_demap, qam_map
from .transforms import DaftParams, daft, daft_matrix, dft_matrix, dirichlet, idaft
from .waveform import AfdmFrame, FrameConfig, PulseConfig, modulate

__version__ = "0.1.0"

__all__ = [
    "DaftParams",
    "daft",
    "idaft",
    "daft_matrix",
    "dft_matrix",
    "dirichlet",
    "PulseConfig",
    "FrameConfig",
    "AfdmFrame",
    "modulate",
    "PathParams",
    "ChannelProfile",
    "EVA",
    "EPA",
    "ETU",
    "DoublySelectiveChannel",
    "ChannelMatrix",
    "sample_channel",
    "td_channel_band",
    "fd_channel_band",
    "daft_channel_band",
    "td_channel_matrix",
    "fd_channel_matrix",
    "daft_channel_matrix",
    "propagate",
    "oversampled_propagate",
    "bandwidth_estimates",
    "matrix_occupancy",
    "qam_map",
    "qam_demap",
    "constellation",
]
