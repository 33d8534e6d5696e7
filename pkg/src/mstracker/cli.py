"""Command-line interface.

Subcommands: generate, train, track, eval, audit, gradcheck, oracle.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

import argparse
import os
import sys

import numpy as np

from .audit import audit_report
from .checkpoint import load_model
from .config import TrackerConfig, desk_config
from .errors import ConfigError, DataError, GeometryError, NumericError, ShapeError
from .metrics import SequenceResult, report
from .model import MultiStateTracker
from .synth import (GT_FILENAME, SyntheticScene, generate_sequence,
                    read_boxes, read_sequence, write_boxes, write_sequence)
from .tracker import track_sequence
from .train import train
from .verify import (ORACLE_REL_TOL, gradient_suite, primitive_checks,
                     run_oracle)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="mstracker", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render a synthetic sequence")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--frames", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--size", type=int, default=160)
    g.add_argument("--distractors", type=int, default=2)
    g.add_argument("--static", action="store_true",
                   help="zero target velocity")

    t = sub.add_parser("train", help="train on sequence directories")
    t.add_argument("--config", help="key=value config file (default: desk-scale)")
    t.add_argument("--data", required=True,
                   help="sequence dir or dir of sequence dirs")
    t.add_argument("--epochs", type=int, required=True)
    t.add_argument("--lr", type=float, required=True)
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--samples-per-epoch", type=int, default=32)

    k = sub.add_parser("track", help="run the tracker over a sequence")
    k.add_argument("--checkpoint", required=True)
    k.add_argument("--sequence", required=True)
    k.add_argument("--out", required=True)

    e = sub.add_parser("eval", help="score predictions against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--out", required=True, help="CSV output path")

    a = sub.add_parser("audit", help="complexity audit vs the reference table")
    a.add_argument("--config", help="key=value config file (default: full size)")
    a.add_argument("--csv", help="also write the CSV table here")

    gc = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    gc.add_argument("--module", choices=["primitives", "composites", "all"],
                    default="all")
    gc.add_argument("--seeds", type=int, default=3)

    o = sub.add_parser("oracle", help="dual-route hidden-state operator check")
    o.add_argument("--trials", type=int, required=True)
    o.add_argument("--seed", type=int, default=0)
    return p


def _load_config(path, default):
    if not path:
        return default
    with open(path, "r", encoding="utf-8") as f:
        return TrackerConfig.from_text(f.read())


def _sequence_dirs(data_dir):
    if os.path.exists(os.path.join(data_dir, GT_FILENAME)):
        return [data_dir]
    subs = sorted(os.path.join(data_dir, n) for n in os.listdir(data_dir)
                  if os.path.isdir(os.path.join(data_dir, n)))
    dirs = [d for d in subs if os.path.exists(os.path.join(d, GT_FILENAME))]
    if not dirs:
        raise DataError(f"{data_dir}: no sequence directories found")
    return dirs


def cmd_generate(args):
    scene = SyntheticScene(seed=args.seed, frame_size=args.size,
                           num_frames=args.frames,
                           num_distractors=args.distractors,
                           velocity=(0.0, 0.0) if args.static else None)
    frames, boxes = generate_sequence(scene)
    write_sequence(args.out, frames, boxes)
    print(f"wrote {len(frames)} frames to {args.out}")
    return EXIT_OK


def cmd_train(args):
    cfg = _load_config(args.config, desk_config())
    scenes = []
    for d in _sequence_dirs(args.data):
        frames, boxes = read_sequence(d)
        if len(frames) != len(boxes):
            raise DataError(f"{d}: {len(frames)} frames vs {len(boxes)} boxes")
        scenes.append((frames, boxes))
    model = MultiStateTracker(cfg, seed=args.seed)
    losses = train(model, cfg, scenes, args.epochs, args.lr, args.seed,
                   samples_per_epoch=args.samples_per_epoch,
                   out_dir=args.out, log=print)
    print(f"final mean loss {losses[-1]:.4f}" if losses else "no epochs run")
    return EXIT_OK


def cmd_track(args):
    cfg, model = load_model(args.checkpoint)
    gt_path = os.path.join(args.sequence, GT_FILENAME)
    if not os.path.exists(gt_path):
        raise UsageError(f"{args.sequence}: missing {GT_FILENAME} (init box)")
    boxes = read_boxes(gt_path)
    if not boxes:
        raise UsageError(f"{gt_path}: no init box")
    frames, _ = read_sequence(args.sequence)
    preds = track_sequence(model, cfg, frames, boxes[0])
    write_boxes(args.out, preds)
    print(f"wrote {len(preds)} predictions to {args.out}")
    return EXIT_OK


def cmd_eval(args):
    preds = read_boxes(args.pred)
    gts = read_boxes(args.gt)
    if len(preds) != len(gts):
        raise DataError(f"{len(preds)} predictions vs {len(gts)} ground-truth lines")
    result = SequenceResult()
    for p, g in zip(preds, gts):
        result.add(p, g)
    name = os.path.splitext(os.path.basename(args.pred))[0]
    text, csv = report([(name, result)])
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(csv)
    print(text, end="")
    return EXIT_OK


def cmd_audit(args):
    cfg = _load_config(args.config, TrackerConfig())
    text, csv = audit_report(cfg)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as f:
            f.write(csv)
    print(text, end="")
    return EXIT_OK


def cmd_gradcheck(args):
    include_composites = args.module in ("composites", "all")
    results = gradient_suite(num_seeds=args.seeds,
                             include_composites=include_composites)
    if args.module == "composites":
        names = {n for n, _, _ in primitive_checks(np.random.default_rng(0))}
        results = {k: v for k, v in results.items() if k not in names}
    worst = 0.0
    for name in sorted(results):
        err = results[name]
        worst = max(worst, err)
        status = "ok" if err < 1e-4 else "FAIL"
        print(f"{name:<20} max rel err {err:.3e}  {status}")
    if worst >= 1e-4:
        raise NumericError(f"gradient check failed (worst {worst:.3e})")
    print(f"all gradients within 1e-4 (worst {worst:.3e})")
    return EXIT_OK


def cmd_oracle(args):
    worst = run_oracle(args.trials, seed=args.seed)
    print(f"{args.trials} trials, worst relative deviation {worst:.3e}")
    if worst >= ORACLE_REL_TOL:
        raise NumericError(f"oracle deviation {worst:.3e} >= {ORACLE_REL_TOL}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "track": cmd_track,
    "eval": cmd_eval,
    "audit": cmd_audit,
    "gradcheck": cmd_gradcheck,
    "oracle": cmd_oracle,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ConfigError, GeometryError, ShapeError, FileNotFoundError,
            IsADirectoryError, NotADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def entry():
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
