"""A short tour of the building blocks, runnable in a few seconds.

    python demos/tour.py
"""
import time

import numpy as np

from motion_transfer.attention import AttentionConfig, CSWinAttention, cswin_self_attention
from motion_transfer.autograd import functional as F
from motion_transfer.autograd.gradcheck import check_gradients
from motion_transfer.autograd.tensor import Tensor, reduce_sum
from motion_transfer.data import make_background, random_figure_spec, rasterize_pose, synth_render
from motion_transfer.data.render import random_pose
from motion_transfer.losses import mutual_learning_loss
from motion_transfer.model import Generator, toy_config

rng = np.random.default_rng(0)

# 1. The autodiff engine: every op has a hand-written backward, checked against finite differences.
x = Tensor(rng.standard_normal((2, 3, 6, 6)))
w = Tensor(rng.standard_normal((4, 3, 3, 3)))
err = check_gradients(lambda a, b: reduce_sum(F.conv2d(a, b, pad=1)), [x, w])
print(f"conv2d gradient check: relative error {err:.1e}")

# 2. Synthetic data: a stick figure posed by forward kinematics and its 26-channel pose map.
spec = random_figure_spec(3)
image, mask, skel = synth_render(spec, random_pose(rng, spec.limits), (64, 64), make_background(3, (64, 64)))
pose = rasterize_pose(skel)
print(f"rendered image {image.shape}, person covers {mask.mean():.1%} of the frame, pose map {pose.shape}")

# 3. Cross-shaped window attention: half the heads see horizontal stripes, half vertical ones.
attn = CSWinAttention(AttentionConfig(16, 4, 2), rng, dtype=np.float64)
tokens = Tensor(rng.standard_normal((1, 64, 16)))
print(f"stripe attention on an 8x8 map: {cswin_self_attention(tokens, 8, 8, attn).shape}")

# 4. The generator: warp and generation branches fused at three scales.
gen = Generator(toy_config())
t0 = time.perf_counter()
out = gen(Tensor(image[None]), Tensor(pose[None]))
print(f"generator forward in {time.perf_counter() - t0:.2f}s, output {out.i_out.shape}")
for o_w, o_g in out.branch_pairs:
    print(f"  branch pair at {o_w.shape[-1]}x{o_w.shape[-1]}: "
          f"mutual loss {float(mutual_learning_loss([(o_w, o_g)]).data):.2f}")

# 5. At initialisation the flow heads output zero, so the warp branch returns the source features unchanged.
print(f"initial flow magnitude {np.abs(out.f_f.data).max()}")
