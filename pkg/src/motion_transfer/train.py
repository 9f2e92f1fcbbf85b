"""Adversarial training loop: one discriminator update then one generator update per step."""
import json
import math
from pathlib import Path

import numpy as np

from .autograd import functional as F
from .autograd.checkpoint import load_into, read_checkpoint, save_checkpoint
from .autograd.optim import adam_step, linear_decay_lr
from .autograd.tensor import Tensor
from .data.dataset import load_dataset
from .errors import CheckpointError, ConfigError, TrainingError
from .losses import (Discriminator, FeatureExtractor, feature_matching_from_taps, hinge_adversarial, mask_loss,
                     mutual_learning_loss, reconstruction_loss, style_loss, total_loss, tv_loss)
from .model import POSE_CHANNELS, Generator

LOG_NAME = "train_log.jsonl"


def _finite(*tensors):
    return all(math.isfinite(float(t.data)) for t in tensors)


class Trainer:
    """Owns the generator, discriminator, frozen feature extractor and the dataset."""

    def __init__(self, cfg, dataset=None):
        self.cfg = cfg
        self.model_cfg = cfg.model()
        self.dataset = dataset if dataset is not None else load_dataset(cfg.data)
        if len(self.dataset) == 0:
            raise ConfigError("dataset is empty")
        if tuple(self.dataset.canvas) != (cfg.image_size, cfg.image_size):
            raise ConfigError(f"dataset canvas {self.dataset.canvas} does not match image_size {cfg.image_size}")
        self.G = Generator(self.model_cfg)
        self.D = Discriminator(3 + POSE_CHANNELS, self.model_cfg.disc_channels, seed=cfg.seed + 1)
        self.fx = FeatureExtractor(tuple(cfg.fx_channels))
        self.weights = cfg.weights()
        self.steps_per_epoch = cfg.steps_per_epoch or max(1, len(self.dataset) // cfg.batch_size)
        self.total_steps = self.steps_per_epoch * cfg.epochs
        self.step = 0
        self.out_dir = Path(cfg.out_dir)
        self.last_updated = {}

    # -- schedule ---------------------------------------------------------
    def epoch_of(self, step):
        """1-based epoch that the 0-based ``step`` belongs to."""
        return step // self.steps_per_epoch + 1

    def learning_rates(self, epoch):
        c = self.cfg
        return (linear_decay_lr(c.lr_g, epoch, c.epochs, c.decay_start_epoch),
                linear_decay_lr(c.lr_d, epoch, c.epochs, c.decay_start_epoch))

    # -- one step ---------------------------------------------------------
    def batch_for(self, step):
        rng = np.random.default_rng([self.cfg.seed, step])
        return self.dataset.sample(rng, self.cfg.batch_size)

    def _abort(self, step, batch, scalars):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        dump = self.out_dir / f"nonfinite_step_{step:06d}.json"
        dump.write_text(json.dumps({"step": step, "indices": [list(map(int, p)) for p in batch.indices],
                                    "losses": scalars}, indent=1))
        raise TrainingError(f"non-finite loss at step {step}; batch (source, target) indices "
                            f"{batch.indices}; details in {dump}")

    def train_step(self):
        step = self.step
        epoch = self.epoch_of(step)
        lr_g, lr_d = self.learning_rates(epoch)
        batch = self.batch_for(step)
        dtype = np.float32
        source = Tensor(batch.source.astype(dtype))
        pose = Tensor(batch.pose.astype(dtype))
        real = Tensor(batch.target_foreground.astype(dtype))
        mask_gt = Tensor(batch.mask.astype(dtype))

        out = self.G(source, pose)

        # discriminator update on a detached fake
        self.D.set_requires_grad(True)
        self.D.zero_grad()
        real_logits, _ = self.D(real, pose)
        fake_logits, _ = self.D(F.detach(out.i_out), pose)
        loss_d, _ = hinge_adversarial(real_logits, fake_logits)
        if not _finite(loss_d):
            self._abort(step, batch, {"adv_d": float(loss_d.data)})
        loss_d.backward()
        d_params = self.D.parameters()
        adam_step(d_params, lr_d)
        self.D.zero_grad()

        # generator update against the refreshed, frozen discriminator
        self.D.set_requires_grad(False)
        self.G.zero_grad()
        real_logits, real_taps = self.D(real, pose)
        fake_logits, fake_taps = self.D(out.i_out, pose)
        _, adv_g = hinge_adversarial(real_logits, fake_logits)
        bundle = total_loss(
            rec=reconstruction_loss(out.i_out, real, self.fx),
            fm=feature_matching_from_taps(fake_taps, real_taps),
            adv_g=adv_g,
            mutual=mutual_learning_loss(out.branch_pairs, self.cfg.mutual_temperature),
            tv=tv_loss(out.f_f),
            mask=mask_loss(out.m_out, mask_gt),
            style=style_loss(out.i_out, real, self.fx),
            weights=self.weights, adv_d=loss_d.detach(),
        )
        scalars = bundle.scalars()
        if not all(math.isfinite(v) for v in scalars.values()):
            self._abort(step, batch, scalars)
        bundle.total.backward()
        g_params = self.G.parameters()
        adam_step(g_params, lr_g)
        self.G.zero_grad()
        self.D.set_requires_grad(True)

        self.last_updated = {"discriminator": {p.name for p in d_params},
                             "generator": {p.name for p in g_params}}
        self.step += 1
        return {"step": self.step, "epoch": epoch, "lr_g": lr_g, "lr_d": lr_d, **scalars}

    # -- persistence ------------------------------------------------------
    def parameters(self):
        return self.G.parameters() + self.D.parameters()

    def save(self, path):
        meta = {"model": self.model_cfg.to_dict(), "epoch": self.epoch_of(max(self.step - 1, 0)),
                "steps_per_epoch": self.steps_per_epoch}
        save_checkpoint(path, self.parameters(), self.step, meta)

    def resume(self, path):
        step, meta, entries = read_checkpoint(path)
        if meta.get("model") != self.model_cfg.to_dict():
            raise CheckpointError(f"{path}: model configuration differs from the training config")
        load_into(self.parameters(), entries, path)
        self.step = step

    # -- loop -------------------------------------------------------------
    def run(self, max_steps=None, on_step=None):
        """Train until the configured number of epochs (or ``max_steps`` further steps)."""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / "config.txt").write_text(self.cfg.dumps())
        stop = self.total_steps if max_steps is None else min(self.total_steps, self.step + max_steps)
        rows = []
        with open(self.out_dir / LOG_NAME, "a") as log:
            while self.step < stop:
                row = self.train_step()
                rows.append(row)
                if self.step % self.cfg.log_every == 0 or self.step == stop:
                    log.write(json.dumps(row) + "\n")
                    log.flush()
                if on_step is not None:
                    on_step(row)
                if self.step % self.steps_per_epoch == 0:
                    epoch = self.step // self.steps_per_epoch
                    if epoch % self.cfg.checkpoint_every == 0 or epoch == self.cfg.epochs:
                        self.save(self.out_dir / f"ckpt_epoch_{epoch:04d}.mtck")
        if rows:
            self.save(self.out_dir / "latest.mtck")
        return rows


def train(cfg, resume=None, max_steps=None, on_step=None):
    trainer = Trainer(cfg)
    if resume:
        trainer.resume(resume)
    trainer.run(max_steps=max_steps, on_step=on_step)
    return trainer
