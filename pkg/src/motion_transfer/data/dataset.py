"""On-disk synthetic dataset: generation, manifest loading and batch sampling."""
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, ParseError
from .imageio import load_image, load_mask, save_image, save_mask
from .render import FigureSpec, make_background, random_figure_spec, random_pose, synth_render
from .skeleton import load_skeleton, rasterize_pose, save_skeleton

FORMAT_VERSION = 1


def dataset_generate(out, n_identities, frames_per_identity, canvas=(64, 64), seed=0):
    """Render ``n_identities * frames_per_identity`` frames plus one background per identity.

    Frame k of identity i is numbered ``i * frames_per_identity + k``. Returns the manifest path.
    """
    if n_identities < 1 or frames_per_identity < 1:
        raise ConfigError("need at least one identity and one frame per identity")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    H, W = canvas
    ss = np.random.SeedSequence(seed)
    identities, frames = [], []
    for i, child in enumerate(ss.spawn(n_identities)):
        spec_seed, bg_seed, pose_seed = (int(s.generate_state(1)[0]) for s in child.spawn(3))
        spec = random_figure_spec(spec_seed)
        bg = make_background(bg_seed, canvas)
        bg_name = f"background_{i:02d}.png"
        save_image(out / bg_name, bg)
        identities.append({"id": i, "spec": spec.to_dict(), "background": bg_name})
        rng = np.random.default_rng(pose_seed)
        for k in range(frames_per_identity):
            n = i * frames_per_identity + k
            img, mask, skel = synth_render(spec, random_pose(rng, spec.limits), canvas, bg)
            rec = {"identity": i, "image": f"frame_{n:04d}.png", "mask": f"mask_{n:04d}.png",
                   "skeleton": f"skel_{n:04d}.json"}
            save_image(out / rec["image"], img)
            save_mask(out / rec["mask"], mask)
            save_skeleton(out / rec["skeleton"], skel)
            frames.append(rec)
    manifest = {"format_version": FORMAT_VERSION, "canvas": [H, W], "seed": int(seed),
                "identities": identities, "frames": frames}
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1))
    return path


@dataclass
class Frame:
    identity: int
    image: np.ndarray      # (3, H, W) in [-1, 1]
    mask: np.ndarray       # (1, H, W) in {0, 1}
    pose: np.ndarray       # (26, H, W) stick image
    skeleton: object
    paths: dict


@dataclass
class SampleTriplet:
    """A batch: source images, target poses, ground truth and masks plus backgrounds."""
    source: np.ndarray
    pose: np.ndarray
    target: np.ndarray
    mask: np.ndarray
    background: np.ndarray
    indices: list

    @property
    def target_foreground(self):
        """Ground truth with the background zeroed, the generator's training target."""
        return self.target * self.mask


class Dataset:
    def __init__(self, root, manifest, frames, backgrounds):
        self.root = Path(root)
        self.manifest = manifest
        self.frames = frames
        self.backgrounds = backgrounds
        self.by_identity = {}
        for n, f in enumerate(frames):
            self.by_identity.setdefault(f.identity, []).append(n)

    def __len__(self):
        return len(self.frames)

    @property
    def canvas(self):
        return tuple(self.manifest["canvas"])

    def identity_spec(self, i):
        return FigureSpec.from_dict(self.manifest["identities"][i]["spec"])

    def sample(self, rng, batch_size):
        """Draw ``batch_size`` (source, target) pairs, each pair from one identity."""
        ids = sorted(self.by_identity)
        src, tgt = [], []
        for _ in range(batch_size):
            pool = self.by_identity[ids[rng.integers(len(ids))]]
            src.append(pool[rng.integers(len(pool))])
            tgt.append(pool[rng.integers(len(pool))])
        return self.gather(src, tgt)

    def gather(self, src, tgt):
        f = self.frames
        return SampleTriplet(
            source=np.stack([f[i].image for i in src]),
            pose=np.stack([f[j].pose for j in tgt]),
            target=np.stack([f[j].image for j in tgt]),
            mask=np.stack([f[j].mask for j in tgt]),
            background=np.stack([self.backgrounds[f[j].identity] for j in tgt]),
            indices=list(zip(src, tgt)),
        )


def load_dataset(manifest_path):
    manifest_path = Path(manifest_path)
    raw = manifest_path.read_bytes()
    try:
        manifest = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{manifest_path}: invalid manifest JSON ({exc.msg})", exc.pos) from None
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"{manifest_path}: unsupported manifest format {manifest.get('format_version')!r}")
    root = manifest_path.parent
    canvas = tuple(manifest["canvas"])
    if not manifest["frames"]:
        raise ConfigError(f"{manifest_path}: dataset has no frames")
    backgrounds = {ident["id"]: load_image(root / ident["background"]) for ident in manifest["identities"]}
    frames = []
    for rec in manifest["frames"]:
        skel = load_skeleton(root / rec["skeleton"], canvas)
        frames.append(Frame(rec["identity"], load_image(root / rec["image"]), load_mask(root / rec["mask"]),
                            rasterize_pose(skel, canvas), skel, dict(rec)))
    return Dataset(root, manifest, frames, backgrounds)


def checksum(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
