"""SEM geometry extraction: edges, widths, holes, tilted ridges, thickness."""

from .edges import (
    BeamAxis,
    BeamFrame,
    EdgeConfig,
    EdgeMap,
    estimate_beam_axis,
    normal_gradient,
    preprocess,
    resample_beam_frame,
)
from .holes import Hole, HoleConfig, HoleSet, detect_holes, gauss_newton_circle, kasa_circle
from .lines import RobustLine, line_separation, welsch_line_fit, welsch_weights
from .thickness import (
    ProjectionNoise,
    ThicknessEstimate,
    projection_prefactor,
    propagate_thickness,
    thickness_array,
    thickness_from_projection,
    thickness_with_uncertainty,
)
from .tilted import RidgeConfig, TiltedRidges, detect_ridges_tilted
from .widths import EdgeFit, WidthConfig, WidthMeasurement, measure_widths

__all__ = [
    "BeamAxis", "BeamFrame", "EdgeConfig", "EdgeMap", "estimate_beam_axis", "normal_gradient",
    "preprocess", "resample_beam_frame", "Hole", "HoleConfig", "HoleSet", "detect_holes",
    "gauss_newton_circle", "kasa_circle", "RobustLine", "line_separation", "welsch_line_fit",
    "welsch_weights", "ProjectionNoise", "ThicknessEstimate", "projection_prefactor",
    "propagate_thickness", "thickness_array", "thickness_from_projection",
    "thickness_with_uncertainty", "RidgeConfig", "TiltedRidges", "detect_ridges_tilted",
    "EdgeFit", "WidthConfig", "WidthMeasurement", "measure_widths",
]
