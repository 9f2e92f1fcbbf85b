"""Pose-driven inference from a checkpoint: one output frame per target skeleton."""
from pathlib import Path

import numpy as np

from .autograd.checkpoint import load_into, read_checkpoint
from .autograd.tensor import Tensor
from .data.imageio import load_image, save_image
from .data.skeleton import normalize_pose, pose_stats, rasterize_pose
from .decoder import composite_background
from .errors import ArgumentError, CheckpointError, DimensionError
from .model import Generator, ModelConfig

GENERATOR_PREFIX = "generator."


def load_generator(path):
    """Rebuild the generator recorded in a checkpoint and load its weights."""
    _, meta, entries = read_checkpoint(path)
    if "model" not in meta:
        raise CheckpointError(f"{path}: checkpoint carries no model configuration")
    gen = Generator(ModelConfig.from_dict(meta["model"]))
    entries = {k: v for k, v in entries.items() if k.startswith(GENERATOR_PREFIX)}
    load_into(gen.parameters(), entries, path)
    return gen


def generate_frame(gen, source, background, skeleton, source_skeleton=None, normalize=False):
    """Single composited frame (3, H, W) plus the raw generator output."""
    H, W = source.shape[1:]
    if background.shape != source.shape:
        raise DimensionError("infer", source.shape, background.shape, detail="background must match source")
    if normalize:
        if source_skeleton is None:
            raise ArgumentError("normalize=True needs the source skeleton")
        skeleton = normalize_pose(skeleton, pose_stats(source_skeleton), pose_stats(skeleton))
    pose = rasterize_pose(skeleton, (H, W))
    out = gen(Tensor(source[None].astype(np.float32)), Tensor(pose[None]))
    frame = composite_background(out.i_out, out.m_out, Tensor(background[None].astype(np.float32)))
    return frame.data[0], out


def infer(checkpoint, source_image, background, skeletons, out_dir=None, normalize=False, source_skeleton=None):
    """Generate one frame per skeleton; writes ``frame_XXXX.png`` files when ``out_dir`` is given."""
    gen = checkpoint if isinstance(checkpoint, Generator) else load_generator(checkpoint)
    source = load_image(source_image) if isinstance(source_image, (str, Path)) else np.asarray(source_image)
    bg = load_image(background) if isinstance(background, (str, Path)) else np.asarray(background)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    frames = []
    for n, skel in enumerate(skeletons):
        frame, _ = generate_frame(gen, source, bg, skel, source_skeleton, normalize)
        frames.append(frame)
        if out_dir is not None:
            save_image(Path(out_dir) / f"frame_{n:04d}.png", frame)
    return frames
