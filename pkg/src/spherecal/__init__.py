"""Unified spherical camera model toolkit.

Library surface for parameter conversions, panorama crop synthesis, image
undistortion, horizon tooling, classification-bin label codecs, and the
human-perceptual measure for scoring calibration errors.
"""

from .bins import (
    BinDistribution,
    BinSpec,
    construct_roll_bins,
    decode,
    default_bin_specs,
    encode,
    kl_loss,
)
from .camera import (
    HorizonLine,
    Intrinsics,
    Orientation,
    backproject,
    effective_hfov,
    focal_from_fov,
    horizon_curve,
    horizon_endpoints,
    horizon_midpoint,
    pitch_from_midpoint,
    project,
    rescale_intrinsics,
    rotation_matrix,
    xi_from_fov_focal,
)
from .dataset import (
    CropLabel,
    CropSpec,
    SamplingConfig,
    generate_dataset,
    render_crop,
    sample_crop_spec,
)
from .horizon import RetrievalIndex, build_index, draw_horizon, query
from .perceptual import (
    JudgmentRecord,
    PerceptualSurface,
    evaluate,
    fit_surface,
    marginal_sensitivity,
    score_method,
)
from .undistort import TargetSpec, default_target, undistort
from .warp import BorderMode, Image, bilinear_sample, remap

__version__ = "0.1.0"
