"""Desk-scale training loop over synthetic scenes.

The per-epoch sample schedule (scene, frame pair, previous-box jitter)
is drawn once from the seed and replayed identically every epoch, so a
zero learning rate yields a constant per-epoch loss and a fixed seed
yields a reproducible loss trajectory.

A checkpoint is written at the end of every epoch; if a non-finite value
aborts training mid-epoch, the file on disk is the last fully completed
(known-good) state and the failure is re-raised.
"""

import os
from dataclasses import dataclass

import numpy as np

from .boxes import BoxXYWH
from .checkpoint import save_checkpoint
from .data import normalized_box, search_crop, template_crop
from .errors import DataError, NumericError
from .head import total_loss
from .nn import AdamW
from .tensor import Tensor

CHECKPOINT_NAME = "checkpoint.mst1"
LOSS_CSV_NAME = "losses.csv"


@dataclass(frozen=True)
class Sample:
    scene: int
    frame_t: int        # template frame
    frame_s: int        # search frame
    jitter: tuple       # (dx, dy, dw, dh) fractional previous-box error


def build_schedule(frame_counts, samples_per_epoch, rng):
    """Fixed epoch schedule of training samples."""
    schedule = []
    for _ in range(samples_per_epoch):
        s = int(rng.integers(len(frame_counts)))
        n = frame_counts[s]
        schedule.append(Sample(
            scene=s,
            frame_t=int(rng.integers(n)),
            frame_s=int(rng.integers(n)),
            jitter=tuple(rng.uniform(-0.12, 0.12, size=4)),
        ))
    return schedule


def jittered_box(box, jitter):
    """Simulated previous-frame prediction around the true box."""
    dx, dy, dw, dh = jitter
    return BoxXYWH(box.x + dx * box.w - box.w * dw / 2.0,
                   box.y + dy * box.h - box.h * dh / 2.0,
                   box.w * (1.0 + dw), box.h * (1.0 + dh))


def sample_loss(model, cfg, scenes, sample, train=True):
    frames_t, boxes_t = scenes[sample.scene]
    template_frame = frames_t[sample.frame_t]
    search_frame = frames_t[sample.frame_s]
    template_box = boxes_t[sample.frame_t]
    gt_box = boxes_t[sample.frame_s]
    prev_box = jittered_box(gt_box, sample.jitter)

    template = template_crop(template_frame, template_box, cfg)
    search, mapping = search_crop(search_frame, prev_box, cfg)
    gt_norm = normalized_box(mapping.to_crop(gt_box), cfg.search_size)
    maps = model.forward(Tensor(template), Tensor(search), train=train)
    return total_loss(maps, gt_norm, cfg.patch_size)


def train(model, cfg, scenes, epochs, lr, seed,
          samples_per_epoch=32, out_dir=None, log=None):
    """Train in place; returns per-epoch mean losses.

    scenes: list of (frames, gt boxes) pairs, one per sequence.
    """
    if not scenes:
        raise DataError("no training scenes")
    rng = np.random.default_rng(seed)
    schedule = build_schedule([len(f) for f, _ in scenes],
                              samples_per_epoch, rng)
    opt = AdamW(model.named_params(), lr=lr)

    ckpt_path = os.path.join(out_dir, CHECKPOINT_NAME) if out_dir else None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        save_checkpoint(ckpt_path, model)

    losses = []
    try:
        for epoch in range(epochs):
            total = 0.0
            for sample in schedule:
                opt.zero_grad()
                loss = sample_loss(model, cfg, scenes, sample)
                value = float(loss.data)
                if not np.isfinite(value):
                    raise NumericError(f"non-finite loss {value} "
                                       f"at epoch {epoch}")
                loss.backward()
                opt.step()
                total += value
            losses.append(total / len(schedule))
            if ckpt_path:
                save_checkpoint(ckpt_path, model)
            if log:
                log(f"epoch {epoch + 1}/{epochs}  loss {losses[-1]:.4f}")
    finally:
        if out_dir:
            write_loss_csv(os.path.join(out_dir, LOSS_CSV_NAME), losses)
    return losses


def write_loss_csv(path, losses):
    with open(path, "w", encoding="utf-8") as f:
        f.write("epoch,mean_loss\n")
        for i, v in enumerate(losses, 1):
            f.write(f"{i},{v:.6f}\n")
