import os

import numpy as np
import pytest

from mstracker.boxes import BoxXYWH
from mstracker.checkpoint import load_checkpoint, load_model, save_checkpoint
from mstracker.cli import main
from mstracker.config import TrackerConfig, desk_config
from mstracker.data import crop_pair, search_crop, template_crop
from mstracker.errors import ConfigError, DataError
from mstracker.model import MultiStateTracker
from mstracker.synth import (SyntheticScene, generate_sequence, read_ppm,
                             read_sequence, write_ppm, write_sequence)
from mstracker.train import train


# -- synthetic scenes ------------------------------------------------------


def test_same_seed_identical_frames():
    scene = SyntheticScene(seed=9, frame_size=96, num_frames=4)
    f1, b1 = generate_sequence(scene)
    f2, b2 = generate_sequence(SyntheticScene(seed=9, frame_size=96, num_frames=4))
    assert all(np.array_equal(a, b) for a, b in zip(f1, f2))
    assert b1 == b2


def test_static_scene_constant_box():
    scene = SyntheticScene(seed=3, frame_size=96, num_frames=5,
                           velocity=(0.0, 0.0), scale_wobble=0.0,
                           num_distractors=0)
    _, boxes = generate_sequence(scene)
    assert all(b == boxes[0] for b in boxes)


def test_linear_trajectory_arithmetic_sequence():
    scene = SyntheticScene(seed=4, frame_size=200, num_frames=10,
                           velocity=(2.0, 0.0), scale_wobble=0.0,
                           num_distractors=0, target_size=(20, 20))
    _, boxes = generate_sequence(scene)
    xs = np.array([b.x for b in boxes])
    assert np.allclose(np.diff(xs), 2.0)


def test_target_visibly_different_from_background():
    frames, boxes = generate_sequence(
        SyntheticScene(seed=5, frame_size=96, num_frames=1, num_distractors=0))
    b = boxes[0]
    inner = frames[0][int(b.y) + 2 : int(b.y + b.h) - 2,
                      int(b.x) + 2 : int(b.x + b.w) - 2]
    assert inner.std() > 10          # textured target, not a flat patch


# -- PPM I/O ---------------------------------------------------------------


def test_ppm_roundtrip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, size=(7, 9, 3), dtype=np.uint8)
    path = tmp_path / "x.ppm"
    write_ppm(path, img)
    assert np.array_equal(read_ppm(path), img)


def test_ppm_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ppm"
    path.write_bytes(b"P5\n1 1\n255\n\x00")
    with pytest.raises(DataError):
        read_ppm(path)


def test_sequence_roundtrip(tmp_path):
    frames, boxes = generate_sequence(SyntheticScene(seed=1, frame_size=64,
                                                     num_frames=3))
    write_sequence(tmp_path / "seq", frames, boxes)
    f2, b2 = read_sequence(tmp_path / "seq")
    assert all(np.array_equal(a, b) for a, b in zip(frames, f2))
    for a, b in zip(boxes, b2):
        assert abs(a.x - b.x) < 0.01 and abs(a.w - b.w) < 0.01


# -- crops -----------------------------------------------------------------


def test_centered_target_occupies_central_quarter():
    cfg = desk_config()
    frame = np.zeros((160, 160, 3), dtype=np.uint8)
    box = BoxXYWH(70.0, 70.0, 20.0, 20.0)
    _, _, gt_norm, _ = crop_pair(frame, box, box, cfg)
    cx, cy, w, h = gt_norm
    assert (cx, cy) == (0.5, 0.5)
    assert w == pytest.approx(0.25) and h == pytest.approx(0.25)


def test_crop_roundtrip_within_half_pixel():
    cfg = desk_config()
    rng = np.random.default_rng(0)
    frame = rng.integers(0, 256, size=(160, 160, 3), dtype=np.uint8)
    for _ in range(20):
        prev = BoxXYWH(rng.uniform(0, 120), rng.uniform(0, 120),
                       rng.uniform(8, 40), rng.uniform(8, 40))
        gt = BoxXYWH(rng.uniform(0, 120), rng.uniform(0, 120),
                     rng.uniform(8, 40), rng.uniform(8, 40))
        _, mapping = search_crop(frame, prev, cfg)
        back = mapping.to_frame(mapping.to_crop(gt))
        for a, b in ((back.x, gt.x), (back.y, gt.y), (back.w, gt.w), (back.h, gt.h)):
            assert abs(a - b) <= 0.5


def test_border_crop_padded_with_mean():
    cfg = desk_config()
    frame = np.full((160, 160, 3), 100, dtype=np.uint8)
    box = BoxXYWH(0.0, 0.0, 20.0, 20.0)       # window extends past the border
    crop = template_crop(frame, box, cfg)
    assert np.allclose(crop, 100.0 / 255.0, atol=1e-9)


# -- config files ----------------------------------------------------------


def test_config_text_roundtrip():
    cfg = desk_config()
    assert TrackerConfig.from_text(cfg.to_text()) == cfg


def test_config_rejects_unknown_key():
    with pytest.raises(ConfigError):
        TrackerConfig.from_text("bogus=1\n")


def test_config_comments_and_blank_lines():
    cfg = TrackerConfig.from_text("# comment\n\nembed_dim=96  # inline\n")
    assert cfg.embed_dim == 96


# -- checkpoints -----------------------------------------------------------


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    cfg = desk_config()
    model = MultiStateTracker(cfg, seed=1)
    p1 = tmp_path / "a.mst1"
    p2 = tmp_path / "b.mst1"
    save_checkpoint(p1, model)
    _, model2 = load_model(p1)
    save_checkpoint(p2, model2)
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_checksum_detects_corruption(tmp_path):
    cfg = desk_config()
    path = tmp_path / "c.mst1"
    save_checkpoint(path, MultiStateTracker(cfg, seed=1))
    raw = bytearray(path.read_bytes())
    raw[len(raw) // 2] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(DataError):
        load_checkpoint(path)


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "d.mst1"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(DataError):
        load_checkpoint(path)


# -- training --------------------------------------------------------------


def _tiny_scene():
    return generate_sequence(SyntheticScene(seed=8, frame_size=96,
                                            num_frames=6))


def test_zero_lr_constant_loss():
    cfg = desk_config()
    model = MultiStateTracker(cfg, seed=0)
    losses = train(model, cfg, [_tiny_scene()], epochs=3, lr=0.0, seed=5,
                   samples_per_epoch=2)
    assert losses[0] == pytest.approx(losses[1]) == pytest.approx(losses[2])


def test_same_seed_identical_loss_curves():
    cfg = desk_config()
    scene = _tiny_scene()
    l1 = train(MultiStateTracker(cfg, seed=0), cfg, [scene], epochs=2,
               lr=1e-3, seed=5, samples_per_epoch=2)
    l2 = train(MultiStateTracker(cfg, seed=0), cfg, [scene], epochs=2,
               lr=1e-3, seed=5, samples_per_epoch=2)
    assert l1 == l2


def test_repeated_sample_overfits():
    """Loss on a single repeated sample falls well below its start."""
    cfg = desk_config()
    model = MultiStateTracker(cfg, seed=0)
    losses = train(model, cfg, [_tiny_scene()], epochs=150, lr=2e-3, seed=5,
                   samples_per_epoch=1)
    assert min(losses) < 0.1 * losses[0]
    # monotone decrease after warmup (allowing small optimizer noise)
    tail = losses[len(losses) // 2 :]
    assert tail[-1] <= tail[0]


# -- CLI -------------------------------------------------------------------


def test_cli_usage_error_exit_code(capsys):
    assert main(["track", "--checkpoint"]) == 1


def test_cli_missing_init_box_is_usage_error(tmp_path, capsys):
    cfg = desk_config()
    ckpt = tmp_path / "m.mst1"
    save_checkpoint(ckpt, MultiStateTracker(cfg, seed=0))
    seq = tmp_path / "seq"
    frames, boxes = _tiny_scene()
    write_sequence(seq, frames, boxes)
    os.remove(seq / "groundtruth.txt")
    write_ppm(seq / "00000001.ppm", frames[0])
    assert main(["track", "--checkpoint", str(ckpt),
                 "--sequence", str(seq), "--out", str(tmp_path / "p.txt")]) == 1


def test_cli_data_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.mst1"
    bad.write_bytes(b"JUNKJUNKJUNK")
    assert main(["track", "--checkpoint", str(bad),
                 "--sequence", str(tmp_path), "--out", str(tmp_path / "p")]) == 2


def test_cli_eval_mismatched_lengths(tmp_path, capsys):
    (tmp_path / "p.txt").write_text("1,1,2,2\n")
    (tmp_path / "g.txt").write_text("1,1,2,2\n3,3,2,2\n")
    assert main(["eval", "--pred", str(tmp_path / "p.txt"),
                 "--gt", str(tmp_path / "g.txt"),
                 "--out", str(tmp_path / "m.csv")]) == 2


def test_cli_generate_and_eval_perfect_copy(tmp_path, capsys):
    seq = tmp_path / "s"
    assert main(["generate", "--seed", "2", "--frames", "4",
                 "--out", str(seq), "--size", "64"]) == 0
    gt = seq / "groundtruth.txt"
    out = tmp_path / "m.csv"
    assert main(["eval", "--pred", str(gt), "--gt", str(gt),
                 "--out", str(out)]) == 0
    row = out.read_text().splitlines()[1].split(",")
    assert float(row[1]) == 1.0 and float(row[6]) == 1.0
