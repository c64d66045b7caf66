"""Fundamental matrix estimation from two point correspondences.

Candidate epipolar line pairs are found by scanline stereo matching along
pencils of lines through the given points; the best epipolar line
homography is selected by stereo consistency over the whole pencil.
"""

from .candidates import candidate_pairs
from .errors import EpilineError
from .estimator import (
    EstimateConfig,
    EstimateResult,
    line_ransac_estimate,
    ransac_trials,
    three_point_accelerated,
    two_point_estimate,
)
from .geometry import FundamentalMatrix, ImageBounds, symmetric_epipolar_distance
from .imaging import GrayImage, load_image
from .stereo import BACKEND, StereoParams, line_match

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EpilineError",
    "EstimateConfig",
    "EstimateResult",
    "FundamentalMatrix",
    "GrayImage",
    "ImageBounds",
    "StereoParams",
    "candidate_pairs",
    "line_match",
    "line_ransac_estimate",
    "load_image",
    "ransac_trials",
    "symmetric_epipolar_distance",
    "three_point_accelerated",
    "two_point_estimate",
]
