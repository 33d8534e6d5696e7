"""Center head: score/size/offset branches, box decoding, and losses."""

from dataclasses import dataclass

import numpy as np

from .boxes import BoxXYWH
from .errors import DataError
from .nn import Module, Param
from .tensor import (Tensor, absolute, clamp_min, conv2d, log, relu, reshape,
                     sigmoid, sqrt, transpose)


def _tmin(t, c):
    return -clamp_min(-t, -c)


def _tmax(t, c):
    return clamp_min(t, c)


@dataclass
class HeadMaps:
    """Sigmoid outputs on the search grid: score [H,W], size and offset
    [2,H,W] with channel 0 horizontal, channel 1 vertical."""
    score: Tensor
    size: Tensor
    offset: Tensor


class BatchNorm2d(Module):
    """Per-channel normalization over the spatial axes.

    Training mode uses the current map's statistics and updates the
    running buffers; eval mode applies the frozen running statistics.
    """

    def __init__(self, channels, momentum=0.1, eps=1e-5):
        super().__init__()
        self.gamma = Param(np.ones(channels))
        self.beta = Param(np.zeros(channels))
        self.momentum = momentum
        self.eps = eps
        self._buffers["running_mean"] = np.zeros(channels)
        self._buffers["running_var"] = np.ones(channels)

    def __call__(self, x, train):
        c = x.shape[0]
        if train:
            mu = x.mean(axis=(1, 2), keepdims=True)
            var = ((x - mu) ** 2).mean(axis=(1, 2), keepdims=True)
            rm, rv = self._buffers["running_mean"], self._buffers["running_var"]
            rm += self.momentum * (mu.data.reshape(-1) - rm)
            rv += self.momentum * (var.data.reshape(-1) - rv)
            xn = (x - mu) / sqrt(var + self.eps)
        else:
            mu = Tensor(self._buffers["running_mean"].reshape(c, 1, 1))
            var = Tensor(self._buffers["running_var"].reshape(c, 1, 1))
            xn = (x - mu) / sqrt(var + self.eps)
        return xn * reshape(self.gamma, (c, 1, 1)) + reshape(self.beta, (c, 1, 1))


class ConvBNReLU(Module):
    def __init__(self, c_in, c_out, rng):
        super().__init__()
        s = 1.0 / np.sqrt(c_in * 9)
        self.weight = Param(rng.uniform(-s, s, size=(c_out, c_in, 3, 3)))
        self.bias = Param(np.zeros(c_out))
        self.bn = BatchNorm2d(c_out)

    def __call__(self, x, train):
        return relu(self.bn(conv2d(x, self.weight, self.bias, padding=1), train))


class HeadBranch(Module):
    """Stacked 3x3 Conv-BN-ReLU with a tapering width, 1x1 sigmoid out."""

    def __init__(self, d_in, width, c_out, rng):
        super().__init__()
        chain = [d_in, width, width // 2, width // 2, width // 2, width // 4]
        self.stages = [ConvBNReLU(a, b, rng) for a, b in zip(chain[:-1], chain[1:])]
        s = 1.0 / np.sqrt(chain[-1])
        self.final_w = Param(rng.uniform(-s, s, size=(c_out, chain[-1], 1, 1)))
        self.final_b = Param(np.zeros(c_out))

    def __call__(self, x, train):
        for stage in self.stages:
            x = stage(x, train)
        return sigmoid(conv2d(x, self.final_w, self.final_b))


class CenterHead(Module):
    """Three parallel branches over the search-region feature map."""

    def __init__(self, cfg, rng):
        super().__init__()
        d, w = cfg.embed_dim, cfg.head_channels
        self.grid = cfg.search_grid
        self.cls_branch = HeadBranch(d, w, 1, rng)
        self.size_branch = HeadBranch(d, w, 2, rng)
        self.offset_branch = HeadBranch(d, w, 2, rng)

    def __call__(self, fused, train=False):
        """fused: TokenSequence; only search tokens feed the head."""
        m = fused.template_len
        gh, gw = fused.search_grid
        tokens = fused.tokens[m:, :]                     # [N_s, D]
        fmap = transpose(reshape(tokens, (gh, gw, tokens.shape[1])), (2, 0, 1))
        score = self.cls_branch(fmap, train)
        size = self.size_branch(fmap, train)
        offset = self.offset_branch(fmap, train)
        return HeadMaps(reshape(score, (gh, gw)), size, offset)


# -- decoding and inference rescoring ------------------------------------


def decode_box(maps, search_size, score=None):
    """Peak cell + offsets + size -> pixel box (top-left convention).

    Ties in the score map break to the first cell in row-major order.
    `score` optionally overrides the raw score map (e.g. after window
    rescoring); offsets and sizes are still read from `maps`.
    """
    p = maps.score.data if score is None else np.asarray(score)
    gh, gw = p.shape
    flat = int(np.argmax(p))
    yd, xd = divmod(flat, gw)
    ox = float(maps.offset.data[0, yd, xd])
    oy = float(maps.offset.data[1, yd, xd])
    w = float(maps.size.data[0, yd, xd]) * search_size
    h = float(maps.size.data[1, yd, xd]) * search_size
    cx = (xd + ox) / gw * search_size
    cy = (yd + oy) / gh * search_size
    return BoxXYWH(cx - w / 2.0, cy - h / 2.0, w, h)


def hann2d(gh, gw):
    def hann(n):
        if n == 1:
            return np.ones(1)
        i = np.arange(n)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * i / (n - 1))
    return np.outer(hann(gh), hann(gw))


def hanning_rescore(score, weight):
    """Blend the score map with its cosine-windowed version.

    weight 0 is the identity; weight 1 is the paper-style pure product.
    """
    if not 0.0 <= weight <= 1.0:
        raise DataError(f"hanning weight {weight} outside [0, 1]")
    p = score.data if isinstance(score, Tensor) else np.asarray(score, dtype=np.float64)
    return (1.0 - weight) * p + weight * (p * hann2d(*p.shape))


# -- training targets and losses -----------------------------------------


def gaussian_heatmap(gt_box_norm, grid, patch_size):
    """Gaussian splat around the ground-truth center cell; the center
    cell itself is exactly 1 (required by the focal loss)."""
    gh, gw = grid
    cx, cy, w, h = gt_box_norm
    xc = min(max(int(cx * gw), 0), gw - 1)
    yc = min(max(int(cy * gh), 0), gh - 1)
    sigma = max(1.0, 0.1 * min(w * gw * patch_size, h * gh * patch_size) / patch_size)
    ys, xs = np.mgrid[0:gh, 0:gw]
    hm = np.exp(-((xs - xc) ** 2 + (ys - yc) ** 2) / (2.0 * sigma**2))
    hm[yc, xc] = 1.0
    return hm, (xc, yc)


def focal_loss(score, gt_heatmap, alpha=2.0, beta=4.0):
    """Penalty-reduced focal loss, averaged over positive cells."""
    gt = np.asarray(gt_heatmap, dtype=np.float64)
    pos = (gt == 1.0).astype(np.float64)
    n_pos = pos.sum()
    if n_pos == 0:
        raise DataError("ground-truth heatmap has no positive cell")
    p = score
    log_p = log(clamp_min(p, 1e-12))
    log_np = log(clamp_min(1.0 - p, 1e-12))
    pos_term = ((1.0 - p) ** alpha) * log_p * pos
    neg_term = Tensor((1.0 - gt) ** beta) * (p**alpha) * log_np * (1.0 - pos)
    return -(pos_term.sum() + neg_term.sum()) * (1.0 / n_pos)


def giou_loss(pred, gt):
    """1 - GIoU for differentiable (cx, cy, w, h) predictions.

    pred: tuple of scalar Tensors; gt: tuple of floats, positive extents.
    """
    gcx, gcy, gw_, gh_ = gt
    if gw_ <= 0 or gh_ <= 0:
        raise DataError("degenerate ground-truth box")
    pcx, pcy, pw, ph = pred
    ax1, ax2 = pcx - pw * 0.5, pcx + pw * 0.5
    ay1, ay2 = pcy - ph * 0.5, pcy + ph * 0.5
    bx1, bx2 = gcx - gw_ * 0.5, gcx + gw_ * 0.5
    by1, by2 = gcy - gh_ * 0.5, gcy + gh_ * 0.5
    iw = clamp_min(_tmin(ax2, bx2) - _tmax(ax1, bx1), 0.0)
    ih = clamp_min(_tmin(ay2, by2) - _tmax(ay1, by1), 0.0)
    inter = iw * ih
    union = pw * ph + gw_ * gh_ - inter
    hull = (_tmax(ax2, bx2) - _tmin(ax1, bx1)) * (_tmax(ay2, by2) - _tmin(ay1, by1))
    giou = inter / union - (hull - union) / hull
    return 1.0 - giou


def total_loss(maps, gt_box_norm, patch_size, lambda_iou=2.0, lambda_l1=5.0):
    """Classification + weighted GIoU + weighted L1 (decoded-box space).

    gt_box_norm: (cx, cy, w, h) normalized to the search crop.  The
    regression terms read the size/offset maps at the ground-truth cell.
    """
    gh, gw = maps.score.shape
    hm, (xc, yc) = gaussian_heatmap(gt_box_norm, (gh, gw), patch_size)
    cls = focal_loss(maps.score, hm)

    ox = maps.offset[0, yc, xc]
    oy = maps.offset[1, yc, xc]
    pw = maps.size[0, yc, xc]
    ph = maps.size[1, yc, xc]
    pcx = (ox + float(xc)) * (1.0 / gw)
    pcy = (oy + float(yc)) * (1.0 / gh)

    l_iou = giou_loss((pcx, pcy, pw, ph), gt_box_norm)
    gcx, gcy, gw_, gh_ = gt_box_norm
    l_l1 = (absolute(pcx - gcx) + absolute(pcy - gcy)
            + absolute(pw - gw_) + absolute(ph - gh_)) * 0.25
    return cls + lambda_iou * l_iou + lambda_l1 * l_l1
