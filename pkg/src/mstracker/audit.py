"""Instrumented FLOPs and parameter accounting per component.

Raw counts come from the op-level MAC instrumentation; `count_flops`
reports FLOPs = 2 x MACs over everything the counter saw.  The
`audit_report` comparison against the published reference table instead
uses the profiler convention that table was evidently produced with:
one multiply-accumulate counted as one FLOP, attention score/value
products and norms/activations excluded.  (Under that convention the
reference backbone entry is reproduced to within a fraction of a percent
from its stated architecture; under 2 x MACs it is off by more than 2x.)

Counting runs single-threaded on a dedicated pass; the counter is not
thread-safe.
"""

import numpy as np

from .counting import OpCounter
from .model import MultiStateTracker
from .tensor import Tensor

# Reference rows: component -> (GFLOPs, M params), plus the two published
# totals, which disagree with each other (breakdown sum vs headline).
PAPER_REFERENCE = {
    "backbone": (1.75, 5.49),
    "sse": (0.05, 0.49),
    "csi": (0.05, 0.17),
    "head": (0.53, 2.31),
}
PAPER_BREAKDOWN_TOTAL = (2.38, 8.46)
PAPER_HEADLINE_TOTAL = (2.28, 7.80)
PAPER_FUSION_COMBINED = (0.10, 0.66)   # enhancement + interaction together

REPORT_EXCLUDED_TAGS = ("attn",)


def count_params(model):
    """Per-component parameter counts (elements, not bytes)."""
    out = {c: 0 for c in model.COMPONENTS}
    for name, p in model.named_params().items():
        out[model.component_of(name)] += p.size
    return out


def counted_forward(cfg, seed=0, model=None):
    """One template+search forward under a fresh counter."""
    model = model or MultiStateTracker(cfg, seed=seed)
    counter = OpCounter()
    template = Tensor(np.zeros((cfg.template_size, cfg.template_size, 3)))
    search = Tensor(np.zeros((cfg.search_size, cfg.search_size, 3)))
    with counter.active():
        model.forward(template, search, train=False, counter=counter)
    return model, counter


def count_flops(cfg, seed=0):
    """Per-component FLOPs (2 x MACs, all counted ops) for one forward."""
    model, counter = counted_forward(cfg, seed)
    return {c: 2 * counter.macs(component=c) for c in model.COMPONENTS}


def audit_macs(cfg, seed=0):
    """Per-component MACs under the reporting convention (no attention
    score/value products)."""
    model, counter = counted_forward(cfg, seed)
    return (model,
            {c: counter.macs(component=c, exclude_tags=REPORT_EXCLUDED_TAGS)
             for c in model.COMPONENTS})


def audit_rows(cfg, seed=0):
    """Rows of (component, gflops, mparams, ref_gflops, ref_mparams,
    flops_dev_pct, params_dev_pct)."""
    model, macs = audit_macs(cfg, seed)
    params = count_params(model)
    rows = []
    for comp in model.COMPONENTS:
        g = macs[comp] / 1e9
        m = params[comp] / 1e6
        rg, rm = PAPER_REFERENCE[comp]
        rows.append((comp, g, m, rg, rm,
                     100.0 * (g - rg) / rg, 100.0 * (m - rm) / rm))
    return rows


def audit_report(cfg, seed=0):
    """Aligned text table + CSV with reference values and deviations."""
    rows = audit_rows(cfg, seed)
    tot_g = sum(r[1] for r in rows)
    tot_m = sum(r[2] for r in rows)

    csv_lines = ["component,flops_g,params_m,ref_flops_g,ref_params_m,dev_pct"]
    for comp, g, m, rg, rm, dg, _dm in rows:
        csv_lines.append(f"{comp},{g:.6f},{m:.6f},{rg:.2f},{rm:.2f},{dg:.2f}")
    csv_lines.append(f"total,{tot_g:.6f},{tot_m:.6f},"
                     f"{PAPER_BREAKDOWN_TOTAL[0]:.2f},{PAPER_BREAKDOWN_TOTAL[1]:.2f},"
                     f"{100.0 * (tot_g - PAPER_BREAKDOWN_TOTAL[0]) / PAPER_BREAKDOWN_TOTAL[0]:.2f}")
    csv_text = "\n".join(csv_lines) + "\n"

    lines = [f"{'component':<10} {'GFLOPs':>9} {'ref':>6} {'dev%':>7} "
             f"{'Mparams':>9} {'ref':>6} {'dev%':>7}"]
    for comp, g, m, rg, rm, dg, dm in rows:
        lines.append(f"{comp:<10} {g:9.4f} {rg:6.2f} {dg:7.1f} "
                     f"{m:9.4f} {rm:6.2f} {dm:7.1f}")
    lines.append(f"{'total':<10} {tot_g:9.4f} {'':>6} {'':>7} {tot_m:9.4f}")
    lines.append("")
    lines.append(
        f"note: the reference breakdown sums to {PAPER_BREAKDOWN_TOTAL[0]:.2f} G / "
        f"{PAPER_BREAKDOWN_TOTAL[1]:.2f} M, which disagrees with the published "
        f"headline total of {PAPER_HEADLINE_TOTAL[0]:.2f} G / {PAPER_HEADLINE_TOTAL[1]:.2f} M; "
        "this audit reports against both and does not resolve the inconsistency.")
    lines.append(
        "convention: 1 FLOP per multiply-accumulate; attention score/value "
        "products, norms, and activations excluded from the table.")
    return "\n".join(lines) + "\n", csv_text
