"""Pose sticks, the synthetic figure renderer, dataset files and image I/O."""
from .dataset import Dataset, SampleTriplet, dataset_generate, load_dataset
from .imageio import load_image, load_mask, save_image, save_mask
from .render import FigureSpec, PoseParams, forward_kinematics, make_background, random_figure_spec, synth_render
from .skeleton import (NUM_STICKS, STICKS, Skeleton, load_skeleton, normalize_pose, pose_stats, rasterize_pose,
                       save_skeleton)

__all__ = [
    "Dataset", "SampleTriplet", "dataset_generate", "load_dataset", "load_image", "load_mask", "save_image",
    "save_mask", "FigureSpec", "PoseParams", "forward_kinematics", "make_background", "random_figure_spec",
    "synth_render", "NUM_STICKS", "STICKS", "Skeleton", "load_skeleton", "normalize_pose", "pose_stats",
    "rasterize_pose", "save_skeleton",
]
