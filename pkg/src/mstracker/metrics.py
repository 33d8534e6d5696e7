"""Per-sequence tracking metrics: AO, SR_tau, P_delta, PNorm, AUC.

All metrics skip frames flagged as ground-truth-absent.  Curve metrics
are sampled-threshold averages: 101 overlap thresholds on [0, 1] for the
success curve, 51 normalized-error thresholds on [0, 0.5] (rescaled to
[0, 1]) for normalized precision.
"""

from dataclasses import dataclass, field

import numpy as np

from .boxes import center_distance, iou
from .errors import DataError

AUC_SAMPLES = 101
PNORM_SAMPLES = 51


@dataclass
class SequenceResult:
    """Ordered (pred, gt, gt_absent) triples for one sequence."""
    frames: list = field(default_factory=list)

    def add(self, pred, gt, gt_absent=False):
        self.frames.append((pred, gt, gt_absent))

    def counted(self):
        out = [(p, g) for p, g, absent in self.frames if not absent]
        if not out:
            raise DataError("sequence has no counted frames")
        return out

    def ious(self):
        return np.array([iou(p, g) for p, g in self.counted()])

    def center_errors(self):
        return np.array([center_distance(p, g) for p, g in self.counted()])

    def norm_center_errors(self):
        out = []
        for p, g in self.counted():
            if g.area <= 0:
                raise DataError("ground-truth box with non-positive area")
            out.append(center_distance(p, g) / np.sqrt(g.w * g.h))
        return np.array(out)


def ao(result):
    """Mean per-frame IoU."""
    return float(result.ious().mean())


def success_rate(result, tau):
    """Fraction of frames with IoU >= tau."""
    if not 0.0 <= tau <= 1.0:
        raise DataError(f"tau {tau} outside [0, 1]")
    return float((result.ious() >= tau).mean())


def precision(result, delta=20.0):
    """Fraction of frames with center error <= delta pixels."""
    if delta < 0:
        raise DataError(f"delta {delta} negative")
    return float((result.center_errors() <= delta).mean())


def norm_precision(result):
    """Area under the normalized-precision curve on [0, 0.5], rescaled."""
    errs = result.norm_center_errors()
    ts = np.linspace(0.0, 0.5, PNORM_SAMPLES)
    return float(np.mean([(errs <= t).mean() for t in ts]))


def auc(result):
    """Mean success rate over 101 evenly spaced overlap thresholds."""
    overlaps = result.ious()
    ts = np.linspace(0.0, 1.0, AUC_SAMPLES)
    return float(np.mean([(overlaps >= t).mean() for t in ts]))


METRIC_COLUMNS = ("ao", "sr_0.50", "sr_0.75", "p_20", "pnorm", "auc")


def metrics_row(result):
    return (ao(result), success_rate(result, 0.5), success_rate(result, 0.75),
            precision(result, 20.0), norm_precision(result), auc(result))


def report(named_results):
    """Text + CSV report over named sequences, with an aggregate row.

    The aggregate averages per-sequence scores (equal sequence weight).
    """
    rows = [(name, metrics_row(res)) for name, res in named_results]
    agg = tuple(np.mean([r[1][i] for r in rows]) for i in range(len(METRIC_COLUMNS)))
    rows.append(("aggregate", agg))

    csv_lines = ["sequence," + ",".join(METRIC_COLUMNS)]
    for name, vals in rows:
        csv_lines.append(name + "," + ",".join(f"{v:.6f}" for v in vals))
    csv_text = "\n".join(csv_lines) + "\n"

    width = max(len(name) for name, _ in rows)
    txt_lines = [f"{'sequence':<{width}}  " + "  ".join(f"{c:>8}" for c in METRIC_COLUMNS)]
    for name, vals in rows:
        txt_lines.append(f"{name:<{width}}  " + "  ".join(f"{v:8.4f}" for v in vals))
    return "\n".join(txt_lines) + "\n", csv_text
