"""Temporal stereo matching with pose-driven warm starts.

The engine refines a disparity map at 1/4 resolution with a few windowed
correlation lookups per frame, carrying its state from frame to frame by
reprojecting it with the known camera motion.
"""
from .config import EngineConfig, load_config, parse_config
from .engine import FrameOutput, FrameState, StereoEngine, process_frame, run_sequence
from .geometry import (CameraRig, Pose, apply_transform, q_inverse, q_matrix, relative_pose,
                       temporal_transform)
from .warp import DisparityMap, softmax_splat, warp_state

__version__ = "0.1.0"
