import numpy as np
import pytest

from mstracker.boxes import BoxXYWH, giou
from mstracker.errors import DataError
from mstracker.head import (BatchNorm2d, HeadMaps, decode_box, focal_loss,
                            gaussian_heatmap, giou_loss, hann2d,
                            hanning_rescore, total_loss)
from mstracker.tensor import Tensor


def _maps(score, size, offset):
    return HeadMaps(Tensor(score), Tensor(size), Tensor(offset))


def test_decode_box_hand_case():
    score = np.zeros((4, 4))
    score[2, 1] = 1.0
    size = np.full((2, 4, 4), 0.25)
    offset = np.zeros((2, 4, 4))
    offset[0, 2, 1] = 0.5
    offset[1, 2, 1] = 0.5
    box = decode_box(_maps(score, size, offset), search_size=64)
    # center = ((1 + 0.5)/4, (2 + 0.5)/4) * 64 = (24, 40); w = h = 16
    assert (box.x, box.y, box.w, box.h) == (16.0, 32.0, 16.0, 16.0)


def test_decode_tie_breaks_row_major():
    score = np.full((3, 3), 0.5)
    size = np.full((2, 3, 3), 1.0 / 3.0)
    offset = np.zeros((2, 3, 3))
    box = decode_box(_maps(score, size, offset), search_size=48)
    cx, cy = box.center
    # first cell in row-major order wins; zero offset is the cell corner
    assert (round(cx, 6), round(cy, 6)) == (0.0, 0.0)


def test_hanning_rescore_blend():
    score = np.ones((5, 5))
    out = hanning_rescore(score, 0.5)
    assert out[2, 2] == pytest.approx(1.0)              # window peak is 1
    assert out[0, 0] == pytest.approx(0.5)              # window edge is 0
    assert np.array_equal(hanning_rescore(score, 0.0), score)
    with pytest.raises(DataError):
        hanning_rescore(score, 1.5)


def test_hann2d_peak_center():
    w = hann2d(7, 7)
    assert w.max() == w[3, 3] == pytest.approx(1.0)


def test_gaussian_heatmap_peak_is_one():
    hm, (xc, yc) = gaussian_heatmap((0.52, 0.48, 0.3, 0.25), (8, 8), 16)
    assert hm[yc, xc] == 1.0
    assert hm.max() == 1.0
    assert (xc, yc) == (4, 3)


def test_focal_loss_ideal_prediction_is_small():
    """Confident peak, near-zero elsewhere: both terms vanish."""
    hm, (xc, yc) = gaussian_heatmap((0.5, 0.5, 0.3, 0.3), (8, 8), 16)
    score = np.full_like(hm, 1e-9)
    score[yc, xc] = 1.0 - 1e-12
    loss = focal_loss(Tensor(score), hm)
    assert float(loss.data) < 1e-6


def test_focal_loss_decreases_toward_target():
    hm, (xc, yc) = gaussian_heatmap((0.5, 0.5, 0.3, 0.3), (8, 8), 16)
    good = np.full_like(hm, 0.01)
    good[yc, xc] = 0.99
    bad = np.full_like(hm, 0.5)
    assert float(focal_loss(Tensor(good), hm).data) < \
        float(focal_loss(Tensor(bad), hm).data)


def test_focal_loss_requires_positive_cell():
    with pytest.raises(DataError):
        focal_loss(Tensor(np.full((4, 4), 0.5)), np.zeros((4, 4)))


def test_giou_loss_matches_box_giou():
    pred = (0.5, 0.45, 0.3, 0.2)
    gt = (0.55, 0.5, 0.25, 0.3)
    loss = giou_loss(tuple(Tensor(np.array(v)) for v in pred), gt)
    a = BoxXYWH(pred[0] - pred[2] / 2, pred[1] - pred[3] / 2, pred[2], pred[3])
    b = BoxXYWH(gt[0] - gt[2] / 2, gt[1] - gt[3] / 2, gt[2], gt[3])
    assert float(loss.data) == pytest.approx(1.0 - giou(a, b), abs=1e-12)


def test_giou_loss_rejects_degenerate_gt():
    with pytest.raises(DataError):
        giou_loss(tuple(Tensor(np.array(0.5)) for _ in range(4)),
                  (0.5, 0.5, 0.0, 0.1))


def test_total_loss_zero_at_exact_prediction():
    """Regression terms vanish when the maps encode the gt box exactly."""
    gh = gw = 8
    gt = (0.5625, 0.4375, 0.25, 0.25)           # centers align with cell grid
    hm, (xc, yc) = gaussian_heatmap(gt, (gh, gw), 16)
    score = np.full_like(hm, 1e-9)
    score[yc, xc] = 1.0 - 1e-12
    size = np.full((2, gh, gw), 0.25)
    offset = np.zeros((2, gh, gw))
    offset[0, yc, xc] = gt[0] * gw - xc
    offset[1, yc, xc] = gt[1] * gh - yc
    loss = total_loss(_maps(score, size, offset), gt, 16)
    assert float(loss.data) < 1e-6


def test_batchnorm_train_vs_eval():
    rng = np.random.default_rng(0)
    bn = BatchNorm2d(3)
    x = Tensor(rng.normal(2.0, 3.0, size=(3, 6, 6)))
    y = bn(x, train=True)
    assert np.allclose(y.data.mean(axis=(1, 2)), 0.0, atol=1e-10)
    # after updates, eval mode uses running statistics (not identity)
    for _ in range(50):
        bn(x, train=True)
    y_eval = bn(x, train=False).data
    assert np.allclose(y_eval.mean(axis=(1, 2)), 0.0, atol=0.2)
