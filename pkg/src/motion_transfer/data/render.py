"""Procedural articulated stick-figure renderer.

Angle conventions (radians, image coordinates with y down):
  * ``dir(phi) = (sin phi, cos phi)``; phi = 0 points straight down.
  * The torso runs from MidHip towards Neck along ``(sin t, -cos t)``.
  * The figure faces the viewer, so its right side lies along
    ``r = (-cos t, -sin t)`` (image left when upright).
  * Right limbs use negated angles, so a positive shoulder/hip angle swings
    either limb outward. Elbow/knee angles are relative to the parent segment.
  * Feet point towards image right, perpendicular to the shin.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ArgumentError
from .skeleton import JOINT, NUM_JOINTS, Skeleton

ANGLE_NAMES = ("torso", "neck", "r_shoulder", "r_elbow", "l_shoulder", "l_elbow",
               "r_hip", "r_knee", "l_hip", "l_knee")

DEFAULT_LIMITS = {
    "torso": (-0.3, 0.3), "neck": (-0.4, 0.4),
    "r_shoulder": (-0.4, 2.6), "r_elbow": (-2.2, 2.2),
    "l_shoulder": (-0.4, 2.6), "l_elbow": (-2.2, 2.2),
    "r_hip": (-0.3, 1.0), "r_knee": (-1.5, 1.5),
    "l_hip": (-0.3, 1.0), "l_knee": (-1.5, 1.5),
}


@dataclass
class FigureSpec:
    """Body proportions as fractions of canvas height; colours in [-1, 1] RGB."""
    torso_length: float = 0.26
    shoulder_width: float = 0.16
    hip_width: float = 0.10
    neck_length: float = 0.10
    head_radius: float = 0.065
    upper_arm: float = 0.14
    forearm: float = 0.13
    thigh: float = 0.17
    shin: float = 0.16
    foot_length: float = 0.05
    arm_width: float = 0.05
    leg_width: float = 0.06
    torso_color: tuple = (0.8, 0.1, 0.1)
    arm_color: tuple = (0.9, 0.6, 0.2)
    leg_color: tuple = (0.1, 0.2, 0.9)
    head_color: tuple = (0.9, 0.7, 0.5)
    seed: int = 0
    limits: dict = field(default_factory=lambda: dict(DEFAULT_LIMITS))

    def __post_init__(self):
        for name in ("torso_length", "shoulder_width", "hip_width", "neck_length", "head_radius",
                     "upper_arm", "forearm", "thigh", "shin", "foot_length", "arm_width", "leg_width"):
            if getattr(self, name) <= 0:
                raise ArgumentError(f"FigureSpec.{name} must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("torso_color", "arm_color", "leg_color", "head_color"):
            d[k] = tuple(d[k])
        d["limits"] = {k: tuple(v) for k, v in d["limits"].items()}
        return cls(**d)


def random_figure_spec(seed):
    """A randomly proportioned and coloured identity. Colours keep one channel >= 0.3."""
    rng = np.random.default_rng(seed)
    base = FigureSpec()
    jitter = {k: getattr(base, k) * rng.uniform(0.85, 1.15)
              for k in ("torso_length", "shoulder_width", "hip_width", "neck_length", "head_radius",
                        "upper_arm", "forearm", "thigh", "shin", "foot_length", "arm_width", "leg_width")}

    def colour():
        c = rng.uniform(-0.9, 0.9, size=3)
        c[rng.integers(3)] = rng.uniform(0.3, 1.0)
        return tuple(float(v) for v in np.round(c, 3))

    return FigureSpec(**jitter, torso_color=colour(), arm_color=colour(), leg_color=colour(),
                      head_color=colour(), seed=int(seed))


@dataclass
class PoseParams:
    """Root (MidHip) position as fractions of (W, H) plus joint angles in radians."""
    root: tuple = (0.5, 0.55)
    torso: float = 0.0
    neck: float = 0.0
    r_shoulder: float = 0.3
    r_elbow: float = 0.2
    l_shoulder: float = 0.3
    l_elbow: float = 0.2
    r_hip: float = 0.1
    r_knee: float = 0.0
    l_hip: float = 0.1
    l_knee: float = 0.0

    def angles(self):
        return {k: getattr(self, k) for k in ANGLE_NAMES}


def random_pose(rng, limits=DEFAULT_LIMITS):
    kw = {k: float(rng.uniform(*limits[k])) for k in ANGLE_NAMES}
    root = (float(rng.uniform(0.42, 0.58)), float(rng.uniform(0.5, 0.56)))
    return PoseParams(root=root, **kw)


def _dir(phi):
    return np.array([np.sin(phi), np.cos(phi)])


def forward_kinematics(spec, pose, canvas):
    """Pixel positions of all 25 joints, shape (25, 2)."""
    for k, v in pose.angles().items():
        lo, hi = spec.limits[k]
        if not lo - 1e-12 <= v <= hi + 1e-12:
            raise ArgumentError(f"angle {k}={v:.3f} outside joint limits [{lo}, {hi}]")
    H, W = canvas
    s = H
    t = pose.torso
    up = np.array([np.sin(t), -np.cos(t)])
    right = np.array([-np.cos(t), -np.sin(t)])
    J = np.zeros((NUM_JOINTS, 2))
    mid_hip = np.array([pose.root[0] * W, pose.root[1] * H])
    neck = mid_hip + spec.torso_length * s * up
    J[JOINT["MidHip"]] = mid_hip
    J[JOINT["Neck"]] = neck

    # head: nose at the head centre, eyes/ears on the face plane
    head_axis = np.array([np.sin(t + pose.neck), -np.cos(t + pose.neck)])
    head_right = np.array([-np.cos(t + pose.neck), -np.sin(t + pose.neck)])
    nose = neck + (spec.neck_length + spec.head_radius) * s * head_axis
    r = spec.head_radius * s
    J[JOINT["Nose"]] = nose
    J[JOINT["REye"]] = nose + 0.35 * r * head_right + 0.3 * r * head_axis
    J[JOINT["LEye"]] = nose - 0.35 * r * head_right + 0.3 * r * head_axis
    J[JOINT["REar"]] = nose + 0.8 * r * head_right + 0.1 * r * head_axis
    J[JOINT["LEar"]] = nose - 0.8 * r * head_right + 0.1 * r * head_axis

    for side, sign in (("R", -1.0), ("L", 1.0)):
        lo = side.lower()
        shoulder = neck + (0.5 * spec.shoulder_width * s) * (right if side == "R" else -right)
        a1 = t + sign * getattr(pose, f"{lo}_shoulder")
        elbow = shoulder + spec.upper_arm * s * _dir(a1)
        a2 = a1 + sign * getattr(pose, f"{lo}_elbow")
        wrist = elbow + spec.forearm * s * _dir(a2)
        J[JOINT[f"{side}Shoulder"]], J[JOINT[f"{side}Elbow"]], J[JOINT[f"{side}Wrist"]] = shoulder, elbow, wrist

        hip = mid_hip + (0.5 * spec.hip_width * s) * (right if side == "R" else -right)
        b1 = t + sign * getattr(pose, f"{lo}_hip")
        knee = hip + spec.thigh * s * _dir(b1)
        b2 = b1 + sign * getattr(pose, f"{lo}_knee")
        ankle = knee + spec.shin * s * _dir(b2)
        shin_dir = _dir(b2)
        foot = np.array([shin_dir[1], -shin_dir[0]])  # shin rotated to point image-right
        J[JOINT[f"{side}Hip"]], J[JOINT[f"{side}Knee"]], J[JOINT[f"{side}Ankle"]] = hip, knee, ankle
        fl = spec.foot_length * s
        J[JOINT[f"{side}BigToe"]] = ankle + fl * foot
        J[JOINT[f"{side}SmallToe"]] = ankle + 0.75 * fl * foot + 0.15 * fl * shin_dir
        J[JOINT[f"{side}Heel"]] = ankle - 0.25 * fl * foot + 0.1 * fl * shin_dir
    return J


def _capsule(xx, yy, p, q, radius):
    d = q - p
    L2 = float(d @ d)
    if L2 < 1e-12:
        return (xx - p[0]) ** 2 + (yy - p[1]) ** 2 <= radius ** 2
    t = np.clip(((xx - p[0]) * d[0] + (yy - p[1]) * d[1]) / L2, 0.0, 1.0)
    cx, cy = p[0] + t * d[0], p[1] + t * d[1]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2


def _convex_polygon(xx, yy, pts):
    inside = np.ones_like(xx, dtype=bool)
    n = len(pts)
    area = sum(pts[i][0] * pts[(i + 1) % n][1] - pts[(i + 1) % n][0] * pts[i][1] for i in range(n))
    sign = 1.0 if area >= 0 else -1.0
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        cross = (b[0] - a[0]) * (yy - a[1]) - (b[1] - a[1]) * (xx - a[0])
        inside &= sign * cross >= 0
    return inside


def synth_render(spec, pose, canvas, background):
    """Paint the figure over ``background`` (3, H, W) in [-1, 1].

    Returns (image (3,H,W) float32, mask (1,H,W) float32 in {0,1}, Skeleton).
    """
    H, W = canvas
    background = np.asarray(background, dtype=np.float32)
    if background.shape != (3, H, W):
        raise ArgumentError(f"background must be (3, {H}, {W}), got {background.shape}")
    J = forward_kinematics(spec, pose, canvas)
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    img = background.copy()
    mask = np.zeros((H, W), dtype=bool)
    s = H

    def paint(region, colour):
        img[:, region] = np.asarray(colour, dtype=np.float32)[:, None]
        mask[region] = True

    leg_r = 0.5 * spec.leg_width * s
    arm_r = 0.5 * spec.arm_width * s
    for side in ("R", "L"):
        region = (_capsule(xx, yy, J[JOINT[f"{side}Hip"]], J[JOINT[f"{side}Knee"]], leg_r)
                  | _capsule(xx, yy, J[JOINT[f"{side}Knee"]], J[JOINT[f"{side}Ankle"]], leg_r)
                  | _capsule(xx, yy, J[JOINT[f"{side}Heel"]], J[JOINT[f"{side}BigToe"]], 0.6 * leg_r))
        paint(region, spec.leg_color)
    torso = [J[JOINT["RShoulder"]], J[JOINT["LShoulder"]], J[JOINT["LHip"]], J[JOINT["RHip"]]]
    paint(_convex_polygon(xx, yy, torso) | _capsule(xx, yy, J[JOINT["Neck"]], J[JOINT["MidHip"]], arm_r),
          spec.torso_color)
    for side in ("R", "L"):
        region = (_capsule(xx, yy, J[JOINT[f"{side}Shoulder"]], J[JOINT[f"{side}Elbow"]], arm_r)
                  | _capsule(xx, yy, J[JOINT[f"{side}Elbow"]], J[JOINT[f"{side}Wrist"]], arm_r))
        paint(region, spec.arm_color)
    head = (xx - J[JOINT["Nose"]][0]) ** 2 + (yy - J[JOINT["Nose"]][1]) ** 2 <= (spec.head_radius * s) ** 2
    paint(head | _capsule(xx, yy, J[JOINT["Neck"]], J[JOINT["Nose"]], 0.5 * arm_r), spec.head_color)

    joints = np.concatenate([J, np.ones((NUM_JOINTS, 1))], axis=1)
    return img, mask[None].astype(np.float32), Skeleton(joints, (H, W))


def make_background(seed, canvas):
    """Smooth dark gradient plate; every channel stays within [-1, -0.3]."""
    rng = np.random.default_rng(seed)
    H, W = canvas
    yy, xx = np.mgrid[0:H, 0:W] / max(H, W)
    chans = []
    for _ in range(3):
        a, b, c = rng.uniform(-0.2, 0.2, size=3)
        base = rng.uniform(-0.9, -0.5)
        chans.append(np.clip(base + a * xx + b * yy + c * xx * yy, -1.0, -0.3))
    return np.stack(chans).astype(np.float32)
