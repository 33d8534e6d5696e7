"""Template/search crop extraction and the crop<->frame box mapping.

The template crop takes a 2x context window around the target box; the
search crop takes a 4x context window around the previous-frame box.
Windows may extend past the frame border; out-of-frame samples are
filled with the frame's mean pixel value.  The window-to-crop transform
is a pure similarity (scale + offset), so box coordinates map between
frame and crop exactly.
"""

from dataclasses import dataclass

import numpy as np

from .boxes import BoxXYWH
from .errors import DataError

TEMPLATE_CONTEXT = 2.0
SEARCH_CONTEXT = 4.0


@dataclass(frozen=True)
class CropMapping:
    """Affine frame->crop transform: crop = (frame - origin) * scale."""
    x0: float
    y0: float
    scale: float

    def to_crop(self, box):
        return BoxXYWH((box.x - self.x0) * self.scale,
                       (box.y - self.y0) * self.scale,
                       box.w * self.scale, box.h * self.scale)

    def to_frame(self, box):
        return BoxXYWH(box.x / self.scale + self.x0,
                       box.y / self.scale + self.y0,
                       box.w / self.scale, box.h / self.scale)


def _as_float_image(frame):
    img = np.asarray(frame, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DataError(f"expected HxWx3 frame, got shape {img.shape}")
    if img.max() > 1.5:          # uint8-range input
        img = img / 255.0
    return img


def crop_window(frame, center, side, out_size):
    """Resample a square window to out_size x out_size (bilinear).

    Returns (crop in [0, 1], CropMapping).
    """
    if side <= 0:
        raise DataError(f"non-positive crop side {side}")
    img = _as_float_image(frame)
    h, w = img.shape[:2]
    fill = img.mean(axis=(0, 1))
    x0 = center[0] - side / 2.0
    y0 = center[1] - side / 2.0
    scale = out_size / side

    # Source sample positions for each output pixel center.
    coords = x0 + (np.arange(out_size) + 0.5) / scale - 0.5
    xs = coords[None, :].repeat(out_size, axis=0)
    coords_y = y0 + (np.arange(out_size) + 0.5) / scale - 0.5
    ys = coords_y[:, None].repeat(out_size, axis=1)

    xf = np.floor(xs).astype(int)
    yf = np.floor(ys).astype(int)
    ax = (xs - xf)[..., None]
    ay = (ys - yf)[..., None]

    def sample(yi, xi):
        valid = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
        out = np.where(valid[..., None],
                       img[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)],
                       fill)
        return out

    crop = ((1 - ax) * (1 - ay) * sample(yf, xf)
            + ax * (1 - ay) * sample(yf, xf + 1)
            + (1 - ax) * ay * sample(yf + 1, xf)
            + ax * ay * sample(yf + 1, xf + 1))
    return crop, CropMapping(x0, y0, scale)


def _context_side(box, factor):
    if box.w <= 0 or box.h <= 0:
        raise DataError("crop reference box has non-positive extents")
    return factor * float(np.sqrt(box.w * box.h))


def template_crop(frame, box, cfg):
    crop, _ = crop_window(frame, box.center,
                          _context_side(box, TEMPLATE_CONTEXT),
                          cfg.template_size)
    return crop


def search_crop(frame, prev_box, cfg):
    return crop_window(frame, prev_box.center,
                       _context_side(prev_box, SEARCH_CONTEXT),
                       cfg.search_size)


def normalized_box(box, out_size):
    """Box in crop pixels -> (cx, cy, w, h) normalized to [0, 1]."""
    cx, cy = box.center
    return (cx / out_size, cy / out_size, box.w / out_size, box.h / out_size)


def crop_pair(frame, prev_box, gt_box, cfg):
    """Training/inference crops from one frame.

    Returns (template crop, search crop, gt normalized in the search crop,
    search CropMapping).
    """
    template = template_crop(frame, gt_box, cfg)
    search, mapping = search_crop(frame, prev_box, cfg)
    gt_norm = normalized_box(mapping.to_crop(gt_box), cfg.search_size)
    return template, search, gt_norm, mapping
