"""Haze density estimation as a normalized scattering coefficient (NRC).

Two reference captures of a static scene, one lightly and one heavily
hazed, define a 0..1 scale; :class:`NrcEstimator` places further captures
of the same scene on it.
"""
from .align import estimate_nrc_matched, global_align, match_superpixels
from .dcp import DarkChannelParams, dark_channel, estimate_airlight
from .estimators import NrcEstimator, SlicSegmenter
from .exceptions import (DegenerateImage, DimensionMismatch, EmptyDarkSet, EstimateIsZero, HazeError,
                         ImageIOError, ImageTooSmall, NegativeDepth, NoMatchedSps, NoValidPixels,
                         UnsupportedFormat)
from .imgcore import load_depth, load_image, save_depth, save_image
from .nrc import NrcParams, NrcReport, ReferenceSet, estimate_nrc, gamma_pixelwise, normalized_depth
from .superpixel import SlicParams, SuperpixelLabeling, segment
from .synth import HazeParams, SceneSpec, generate_scene, benchmark_grid, synthesize

__all__ = [
    "estimate_nrc_matched", "global_align", "match_superpixels",
    "DarkChannelParams", "dark_channel", "estimate_airlight",
    "NrcEstimator", "SlicSegmenter",
    "DegenerateImage", "DimensionMismatch", "EmptyDarkSet", "EstimateIsZero", "HazeError", "ImageIOError",
    "ImageTooSmall", "NegativeDepth", "NoMatchedSps", "NoValidPixels", "UnsupportedFormat",
    "load_depth", "load_image", "save_depth", "save_image",
    "NrcParams", "NrcReport", "ReferenceSet", "estimate_nrc", "gamma_pixelwise", "normalized_depth",
    "SlicParams", "SuperpixelLabeling", "segment",
    "HazeParams", "SceneSpec", "generate_scene", "benchmark_grid", "synthesize",
]
__version__ = "0.1.0"
