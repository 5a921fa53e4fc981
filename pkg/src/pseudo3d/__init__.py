"""Pseudo point clouds from monocular relative depth.

The pipeline: a relative depth prediction is min-max normalized and
flipped (1 - d), back-projected through a pinhole camera into an
(H, W, 3) point grid that keeps pixel adjacency, optionally encoded by a
small convolutional network, and fused with 2-D image features.  A
behavior-cloning loss scores predicted gripper actions against
demonstrations.
"""

from .camera import (
    CameraIntrinsics,
    backproject,
    estimate_intrinsics_from_fov,
    load_intrinsics,
    parse_intrinsics_config,
    project,
)
from .cloud import (
    ContinuityStats,
    CoordinateMap,
    PseudoPointCloud,
    cloud_from_depth,
    local_continuity,
    synth_plane,
    synth_random,
    synth_wedge,
    to_cloud,
    to_coordinate_map,
)
from .depth import (
    DepthKind,
    DepthMap,
    disparity_from_metric,
    invert,
    normalize,
    pipeline_relative_to_dr,
    reciprocal_depth,
)
from .depth_io import load_depth_map, read_csv, read_pfm, read_pgm, write_csv, write_pfm, write_pgm
from .encoder import (
    EncoderGradients,
    EncoderParams,
    encode,
    encode_backward,
    init_params,
    load_params,
    normalize_coordinate_map,
    output_shape,
    save_params,
)
from .errors import Pseudo3dError
from .fusion import (
    ALL_STRATEGIES,
    BenchResult,
    FusionParams,
    Strategy,
    fuse,
    fuse_add,
    fuse_concat,
    fuse_cross_attention,
    fuse_self_attention,
    fusion_bench,
    init_fusion_params,
    multi_head_attention,
)
from .ply import PlyContents, export_ply, read_ply
from .policy_loss import (
    Action,
    StepLoss,
    Trajectory,
    dataset_loss,
    read_actions_csv,
    step_loss,
    trajectory_from_rows,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ALL_STRATEGIES",
    "BenchResult",
    "CameraIntrinsics",
    "ContinuityStats",
    "CoordinateMap",
    "DepthKind",
    "DepthMap",
    "EncoderGradients",
    "EncoderParams",
    "FusionParams",
    "PlyContents",
    "Pseudo3dError",
    "PseudoPointCloud",
    "StepLoss",
    "Strategy",
    "Trajectory",
    "backproject",
    "cloud_from_depth",
    "dataset_loss",
    "disparity_from_metric",
    "encode",
    "encode_backward",
    "estimate_intrinsics_from_fov",
    "export_ply",
    "fuse",
    "fuse_add",
    "fuse_concat",
    "fuse_cross_attention",
    "fuse_self_attention",
    "fusion_bench",
    "init_fusion_params",
    "init_params",
    "invert",
    "load_depth_map",
    "load_intrinsics",
    "load_params",
    "local_continuity",
    "multi_head_attention",
    "normalize",
    "normalize_coordinate_map",
    "output_shape",
    "parse_intrinsics_config",
    "pipeline_relative_to_dr",
    "project",
    "read_actions_csv",
    "read_csv",
    "read_pfm",
    "read_pgm",
    "read_ply",
    "reciprocal_depth",
    "save_params",
    "step_loss",
    "synth_plane",
    "synth_random",
    "synth_wedge",
    "to_cloud",
    "to_coordinate_map",
    "trajectory_from_rows",
    "write_csv",
    "write_pfm",
    "write_pgm",
]
