"""Synthetic stereo sequences, corruption transforms and file formats."""
from .formats import (FormatError, read_image, read_pfm, read_poses, write_image, write_pfm,
                      write_poses)
from .manifest import (FrameRecord, SequenceManifest, default_rig, frame_skip, generate_sequence,
                       pose_noise, read_manifest, standard_sequence, write_dataset, write_manifest)
from .render import StereoFrame, render_frame
from .scene import Plane, Scene, SceneSpec, Sphere, Texture, generate_scene, two_plane_spec
from .trajectory import Trajectory, TrajectoryParams, generate_trajectory
