"""Polar-chain contour regression with a per-wedge Jaccard loss."""

from .contour import CartesianContour, PolarChain, resample, to_cartesian
from .errors import ChainsegError
from .segment_loss import SegmentPair, classify, jm_exact, jm_loss, jm_paper, mse_loss

__version__ = "0.1.0"

__all__ = [
    "CartesianContour", "ChainsegError", "PolarChain", "SegmentPair", "classify", "jm_exact",
    "jm_loss", "jm_paper", "mse_loss", "resample", "to_cartesian",
]
