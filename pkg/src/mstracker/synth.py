"""Deterministic synthetic tracking sequences and PPM (P6) image I/O.

A scene renders a textured rectangular target moving over a textured
background, optionally with look-alike distractors and partial
occluders.  Everything is drawn from a single seeded RNG stream so the
same seed reproduces byte-identical frames.  Sequences are written in
the GOT-10K directory layout: numbered `.ppm` frames next to a
`groundtruth.txt` with one comma-separated "x,y,w,h" line per frame.
"""

import os
from dataclasses import dataclass

import numpy as np

from .boxes import BoxXYWH
from .errors import DataError

GT_FILENAME = "groundtruth.txt"


# -- PPM I/O ---------------------------------------------------------------


def write_ppm(path, image):
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DataError(f"expected HxWx3 image, got shape {img.shape}")
    img = img.astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def read_ppm(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] != b"P6":
        raise DataError(f"{path}: not a P6 PPM file")
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments running to end of line.
    tokens, pos = [], 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataError(f"{path}: truncated PPM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise DataError(f"{path}: malformed PPM header") from None
    if maxval != 255:
        raise DataError(f"{path}: unsupported maxval {maxval}")
    n = width * height * 3
    body = raw[pos : pos + n]
    if len(body) != n:
        raise DataError(f"{path}: PPM pixel data truncated")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)


# -- scene description -----------------------------------------------------


@dataclass
class SyntheticScene:
    seed: int
    frame_size: int = 160
    num_frames: int = 60
    num_distractors: int = 2
    occlusions: tuple = ()          # frame ranges (start, end), end exclusive
    noise_level: float = 0.008
    velocity: tuple = None          # fixed (vx, vy) px/frame; None -> random
    target_size: tuple = None       # (w, h) px; None -> random
    scale_wobble: float = 0.06      # fractional size oscillation amplitude

    def validate(self):
        if self.frame_size < 32:
            raise DataError("frame_size must be >= 32")
        if self.num_frames < 1:
            raise DataError("num_frames must be >= 1")
        if self.noise_level < 0:
            raise DataError("noise_level must be >= 0")


@dataclass
class _Sprite:
    colors: np.ndarray              # [2, 3] checker colors
    pos: np.ndarray                 # center (x, y)
    vel: np.ndarray
    size: np.ndarray                # (w, h)


def _bounce(pos, vel, size, frame_size):
    """Advance one step, reflecting at the frame borders."""
    pos = pos + vel
    for ax in range(2):
        lo = size[ax] / 2.0 + 1.0
        hi = frame_size - size[ax] / 2.0 - 1.0
        if pos[ax] < lo:
            pos[ax] = 2.0 * lo - pos[ax]
            vel[ax] = -vel[ax]
        elif pos[ax] > hi:
            pos[ax] = 2.0 * hi - pos[ax]
            vel[ax] = -vel[ax]
    return pos, vel


def _draw_checker(canvas, sprite, scale=1.0, cell=4):
    """Paint the sprite's checkered rectangle; returns its box."""
    fh, fw = canvas.shape[:2]
    w = max(6.0, sprite.size[0] * scale)
    h = max(6.0, sprite.size[1] * scale)
    x0 = sprite.pos[0] - w / 2.0
    y0 = sprite.pos[1] - h / 2.0
    xi0, yi0 = max(0, int(round(x0))), max(0, int(round(y0)))
    xi1, yi1 = min(fw, int(round(x0 + w))), min(fh, int(round(y0 + h)))
    if xi1 > xi0 and yi1 > yi0:
        ys, xs = np.mgrid[yi0:yi1, xi0:xi1]
        pattern = ((xs // cell + ys // cell) % 2)
        canvas[yi0:yi1, xi0:xi1] = sprite.colors[pattern]
    return BoxXYWH(x0, y0, w, h)


def _background(rng, size):
    """Smooth low-frequency texture, mid-gray range."""
    coarse = rng.uniform(50.0, 150.0, size=(size // 16 + 2, size // 16 + 2, 3))
    xs = np.linspace(0.0, coarse.shape[1] - 1.001, size)
    ys = np.linspace(0.0, coarse.shape[0] - 1.001, size)
    x0 = xs.astype(int)
    y0 = ys.astype(int)
    fx = (xs - x0)[None, :, None]
    fy = (ys - y0)[:, None, None]
    c00 = coarse[y0][:, x0]
    c01 = coarse[y0][:, x0 + 1]
    c10 = coarse[y0 + 1][:, x0]
    c11 = coarse[y0 + 1][:, x0 + 1]
    return (c00 * (1 - fx) * (1 - fy) + c01 * fx * (1 - fy)
            + c10 * (1 - fx) * fy + c11 * fx * fy)


def generate_sequence(scene):
    """Render all frames; returns (frames uint8 [H,W,3], boxes)."""
    scene.validate()
    rng = np.random.default_rng(scene.seed)
    size = scene.frame_size
    background = _background(rng, size)

    # Target: bright saturated checker so it stands off the gray background.
    base = rng.uniform(180.0, 255.0, size=3)
    target_colors = np.stack([base, 255.0 - 0.8 * base])
    if scene.target_size is None:
        tw = rng.uniform(size / 7.0, size / 4.5)
        th = rng.uniform(size / 7.0, size / 4.5)
    else:
        tw, th = scene.target_size
    margin = max(tw, th) / 2.0 + 4.0
    pos = rng.uniform(margin, size - margin, size=2)
    if scene.velocity is None:
        vel = rng.uniform(-2.5, 2.5, size=2)
    else:
        vel = np.array(scene.velocity, dtype=np.float64)
    target = _Sprite(target_colors, pos, vel.copy(), np.array([tw, th]))

    distractors = []
    for _ in range(scene.num_distractors):
        col = rng.uniform(60.0, 200.0, size=3)
        distractors.append(_Sprite(
            np.stack([col, col * 0.6]),
            rng.uniform(margin, size - margin, size=2),
            rng.uniform(-3.0, 3.0, size=2),
            np.array([rng.uniform(size / 9.0, size / 6.0),
                      rng.uniform(size / 9.0, size / 6.0)]),
        ))

    frames, boxes = [], []
    for t in range(scene.num_frames):
        canvas = background.copy()
        for d in distractors:
            _draw_checker(canvas, d, cell=3)
            d.pos, d.vel = _bounce(d.pos, d.vel, d.size, size)
        scale = 1.0 + scene.scale_wobble * np.sin(2.0 * np.pi * t / 37.0)
        box = _draw_checker(canvas, target, scale=scale)
        occluded = any(a <= t < b for a, b in scene.occlusions)
        if occluded:
            # Gray slab over the lower half of the target (<= 50% cover).
            x0, y0 = int(round(box.x)), int(round(box.y + box.h / 2.0))
            x1, y1 = int(round(box.x + box.w)), int(round(box.y + box.h))
            canvas[max(0, y0):max(0, y1), max(0, x0):max(0, x1)] = 128.0
        if scene.noise_level > 0:
            canvas = canvas + rng.normal(0.0, scene.noise_level * 255.0,
                                         size=canvas.shape)
        frames.append(np.clip(canvas, 0.0, 255.0).astype(np.uint8))
        boxes.append(box)
        target.pos, target.vel = _bounce(target.pos, target.vel,
                                         target.size, size)
    return frames, boxes


# -- sequence directory I/O ------------------------------------------------


def write_sequence(out_dir, frames, boxes):
    os.makedirs(out_dir, exist_ok=True)
    for i, frame in enumerate(frames, 1):
        write_ppm(os.path.join(out_dir, f"{i:08d}.ppm"), frame)
    write_boxes(os.path.join(out_dir, GT_FILENAME), boxes)


def write_boxes(path, boxes):
    with open(path, "w", encoding="utf-8") as f:
        for b in boxes:
            f.write(f"{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f}\n")


def read_boxes(path):
    boxes = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected x,y,w,h")
            try:
                x, y, w, h = (float(p) for p in parts)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric box") from None
            boxes.append(BoxXYWH(x, y, w, h))
    return boxes


def read_sequence(seq_dir):
    """Load frames (uint8) and ground-truth boxes from a sequence dir."""
    names = sorted(n for n in os.listdir(seq_dir) if n.endswith(".ppm"))
    if not names:
        raise DataError(f"{seq_dir}: no .ppm frames")
    frames = [read_ppm(os.path.join(seq_dir, n)) for n in names]
    gt_path = os.path.join(seq_dir, GT_FILENAME)
    if not os.path.exists(gt_path):
        raise DataError(f"{seq_dir}: missing {GT_FILENAME}")
    return frames, read_boxes(gt_path)
