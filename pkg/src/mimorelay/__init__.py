"""Gaussian MIMO relay channel bounds: cutset, decode/compress-forward and their gaps."""

from .bounds import INFINITE, ZERO, CutTerms, JointCovariance
from .channel import (AntennaConfig, ChannelFormatError, ChannelMatrices, HalfDuplexChannel,
                      random_channel, random_half_duplex, rfd_embed, sfd_embed)
from .optimizer import BoundResult, FeasibleSet, SolverConfig, compute_bound, compute_bounds

__version__ = "0.1.0"

__all__ = [
    "INFINITE", "ZERO", "CutTerms", "JointCovariance",
    "AntennaConfig", "ChannelFormatError", "ChannelMatrices", "HalfDuplexChannel",
    "random_channel", "random_half_duplex", "rfd_embed", "sfd_embed",
    "BoundResult", "FeasibleSet", "SolverConfig", "compute_bound", "compute_bounds",
]
