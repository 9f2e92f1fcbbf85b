"""25-joint skeletons, the 26-stick pose image and pose normalisation."""
import json
from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError, DimensionError, ParseError

JOINT_NAMES = (
    "Nose", "Neck", "RShoulder", "RElbow", "RWrist", "LShoulder", "LElbow", "LWrist",
    "MidHip", "RHip", "RKnee", "RAnkle", "LHip", "LKnee", "LAnkle", "REye", "LEye",
    "REar", "LEar", "LBigToe", "LSmallToe", "LHeel", "RBigToe", "RSmallToe", "RHeel",
)
NUM_JOINTS = 25
JOINT = {name: i for i, name in enumerate(JOINT_NAMES)}

# The 24 BODY-25 limb pairs followed by two torso-side sticks.
STICKS = (
    (1, 8), (1, 2), (1, 5), (2, 3), (3, 4), (5, 6), (6, 7), (8, 9), (9, 10), (10, 11),
    (8, 12), (12, 13), (13, 14), (1, 0), (0, 15), (15, 17), (0, 16), (16, 18), (14, 19),
    (19, 20), (14, 21), (11, 22), (22, 23), (11, 24),
    (2, 9), (5, 12),
)
NUM_STICKS = len(STICKS)
assert NUM_STICKS == 26


@dataclass
class Skeleton:
    """Joints as a (25, 3) array of (x, y, confidence); pixel units, origin top-left."""
    joints: np.ndarray
    frame_size: tuple

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        if self.joints.shape != (NUM_JOINTS, 3):
            raise DimensionError("Skeleton", self.joints.shape, (NUM_JOINTS, 3))
        if not np.all(np.isfinite(self.joints)):
            raise ArgumentError("skeleton coordinates must be finite")
        c = self.joints[:, 2]
        if np.any((c < 0) | (c > 1)):
            raise ArgumentError("joint confidences must lie in [0, 1]")
        self.frame_size = tuple(int(v) for v in self.frame_size)

    @property
    def xy(self):
        return self.joints[:, :2]

    @property
    def confidence(self):
        return self.joints[:, 2]

    def copy(self):
        return Skeleton(self.joints.copy(), self.frame_size)

    def to_json(self):
        return [[float(v) for v in row] for row in self.joints]


def load_skeleton(path, frame_size):
    """Read a keypoint file: either a bare list of 25 [x, y, conf] or {"joints": [...]}."""
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid keypoint JSON ({exc.msg})", exc.pos) from None
    if isinstance(obj, dict):
        frame_size = obj.get("frame_size", frame_size)
        obj = obj.get("joints")
    if not isinstance(obj, list) or len(obj) != NUM_JOINTS:
        raise ParseError(f"{path}: expected {NUM_JOINTS} joints", 0)
    return Skeleton(np.array(obj, dtype=np.float64), frame_size)


def save_skeleton(path, skel):
    with open(path, "w") as fh:
        json.dump(skel.to_json(), fh)


def rasterize_pose(skel, out_size=None, stick_width=None, conf_threshold=0.1):
    """Draw each of the 26 sticks as an anti-aliased flat-capped segment into its own channel.

    Pixel centres sit at integer coordinates. Intensity falls off linearly over
    one pixel past ``stick_width / 2`` from the segment axis; pixels whose
    projection falls outside the segment stay dark.
    """
    H, W = out_size or skel.frame_size
    if H <= 0 or W <= 0:
        raise ArgumentError(f"out_size must be positive, got {(H, W)}")
    if stick_width is None:
        stick_width = max(1.0, 3.0 * H / 256.0)
    sx, sy = W / skel.frame_size[1], H / skel.frame_size[0]
    pts = skel.xy * np.array([sx, sy])
    pts = np.clip(pts, 0, [W - 1, H - 1])
    conf = skel.confidence
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    out = np.zeros((NUM_STICKS, H, W), dtype=np.float32)
    half = stick_width / 2.0
    for ch, (a, b) in enumerate(STICKS):
        if conf[a] < conf_threshold or conf[b] < conf_threshold:
            continue
        p, q = pts[a], pts[b]
        d = q - p
        length = np.hypot(*d)
        if length < 1e-9:
            dist = np.hypot(xx - p[0], yy - p[1])
            inside = np.ones_like(dist, dtype=bool)
        else:
            u = d / length
            rx, ry = xx - p[0], yy - p[1]
            t = rx * u[0] + ry * u[1]
            dist = np.abs(rx * u[1] - ry * u[0])
            inside = (t >= -1e-9) & (t <= length + 1e-9)
        out[ch] = np.where(inside, np.clip(half + 0.5 - dist, 0.0, 1.0), 0.0)
    return out


def pose_stats(skel, conf_threshold=0.1):
    """(ankle_y, height_px): lowest ankle row and its distance to the highest confident joint."""
    ok = skel.confidence >= conf_threshold
    if not ok.any():
        raise ArgumentError("no confident joints to measure")
    ankles = [j for j in (JOINT["RAnkle"], JOINT["LAnkle"]) if ok[j]]
    ys = skel.xy[ok, 1]
    ankle_y = max(skel.xy[j, 1] for j in ankles) if ankles else ys.max()
    return float(ankle_y), float(ankle_y - ys.min())


def normalize_pose(target, source_stats, target_stats):
    """Rescale and shift ``target`` so its height and ankle line match the source's.

    y' = a*y + b with a = source_height / target_height and b mapping the
    target ankle onto the source ankle; x is scaled by ``a`` about the
    centroid of the confident joints.
    """
    src_ankle, src_h = source_stats
    tgt_ankle, tgt_h = target_stats
    if src_h <= 0 or tgt_h <= 0:
        raise ArgumentError(f"pose heights must be positive, got {src_h} and {tgt_h}")
    a = src_h / tgt_h
    b = src_ankle - a * tgt_ankle
    j = target.joints.copy()
    ok = j[:, 2] > 0
    cx = j[ok, 0].mean() if ok.any() else j[:, 0].mean()
    j[:, 0] = a * j[:, 0] + (1.0 - a) * cx
    j[:, 1] = a * j[:, 1] + b
    return Skeleton(j, target.frame_size)
