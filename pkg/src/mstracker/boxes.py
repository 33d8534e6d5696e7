"""Axis-aligned boxes (x, y, w, h) and overlap arithmetic."""

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class BoxXYWH:
    x: float
    y: float
    w: float
    h: float

    @property
    def center(self):
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self):
        return max(self.w, 0.0) * max(self.h, 0.0)

    def clamp(self, width, height, min_size=1.0):
        """Clip to image bounds keeping at least min_size extents."""
        w = min(max(self.w, min_size), width)
        h = min(max(self.h, min_size), height)
        x = min(max(self.x, 0.0), width - w)
        y = min(max(self.y, 0.0), height - h)
        return BoxXYWH(x, y, w, h)

    def translate(self, dx, dy):
        return BoxXYWH(self.x + dx, self.y + dy, self.w, self.h)


def iou(a, b):
    """Intersection over union; empty union gives 0."""
    if a.w < 0 or a.h < 0 or b.w < 0 or b.h < 0:
        raise DataError("negative box extents")
    if a == b and a.area > 0:
        # exact, sidestepping (x + w) - x rounding for identical boxes
        return 1.0
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def giou(a, b):
    """Generalized IoU: IoU minus the hull slack fraction."""
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.area + b.area - inter
    hw = max(a.x + a.w, b.x + b.w) - min(a.x, b.x)
    hh = max(a.y + a.h, b.y + b.h) - min(a.y, b.y)
    hull = hw * hh
    i = inter / union if union > 0 else 0.0
    if hull <= 0:
        return i
    return i - (hull - union) / hull


def center_distance(a, b):
    (ax, ay), (bx, by) = a.center, b.center
    return float(np.hypot(ax - bx, ay - by))
