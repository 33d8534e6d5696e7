"""Tracking runner: fixed frame-0 template, per-frame search crops.

Streaming contract: the prediction for frame t depends only on frames
0..t (in fact only on frame 0 and frame t plus the previous prediction).

The search crop side is derived from the previous prediction, so any
systematic size over/under-estimate would feed back and compound
exponentially.  The size update is therefore damped (exponential
smoothing toward the decoded size) and clamped to a scale band around
the init box; the decoded center is used as-is.
"""

import numpy as np

from .boxes import BoxXYWH
from .data import search_crop, template_crop
from .errors import DataError
from .head import decode_box, hanning_rescore
from .tensor import Tensor

SIZE_UPDATE = 0.3               # weight of the decoded size per frame
SCALE_RANGE = (0.85, 1.18)      # allowed size band relative to the init box


def track_sequence(model, cfg, frames, init_box,
                   size_update=SIZE_UPDATE, scale_range=SCALE_RANGE):
    """Run the tracker over `frames`; returns one box per frame.

    Frame 0's prediction is the given init box (initialization contract).
    """
    if not frames:
        raise DataError("empty frame list")
    if init_box.w <= 0 or init_box.h <= 0:
        raise DataError("degenerate init box")
    height, width = frames[0].shape[:2]
    template = Tensor(template_crop(frames[0], init_box, cfg))
    lo, hi = scale_range

    preds = [init_box]
    for frame in frames[1:]:
        prev = preds[-1]
        crop, mapping = search_crop(frame, prev, cfg)
        maps = model.forward(template, Tensor(crop), train=False)
        rescored = hanning_rescore(maps.score, cfg.hanning_weight)
        box = mapping.to_frame(decode_box(maps, cfg.search_size, score=rescored))
        w = np.clip((1.0 - size_update) * prev.w + size_update * box.w,
                    lo * init_box.w, hi * init_box.w)
        h = np.clip((1.0 - size_update) * prev.h + size_update * box.h,
                    lo * init_box.h, hi * init_box.h)
        cx, cy = box.center
        preds.append(BoxXYWH(cx - w / 2.0, cy - h / 2.0, float(w), float(h))
                     .clamp(width, height))
    return preds
