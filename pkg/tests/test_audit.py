from mstracker.audit import (PAPER_REFERENCE, audit_report, audit_rows,
                             count_flops, count_params, counted_forward)
from mstracker.config import desk_config
from mstracker.model import MultiStateTracker


def test_count_params_covers_every_parameter():
    cfg = desk_config()
    model = MultiStateTracker(cfg, seed=0)
    per_component = count_params(model)
    total = sum(p.size for p in model.named_params().values())
    assert sum(per_component.values()) == total
    assert set(per_component) == set(model.COMPONENTS)


def test_count_flops_is_twice_macs():
    cfg = desk_config()
    flops = count_flops(cfg)
    _, counter = counted_forward(cfg)
    for comp, f in flops.items():
        assert f == 2 * counter.macs(component=comp)


def test_counts_are_deterministic():
    cfg = desk_config()
    assert count_flops(cfg) == count_flops(cfg)


def test_audit_rows_have_references():
    rows = audit_rows(desk_config())
    comps = [r[0] for r in rows]
    assert comps == ["backbone", "sse", "csi", "head"]
    for comp, g, m, rg, rm, dg, dm in rows:
        assert (rg, rm) == PAPER_REFERENCE[comp]
        assert g > 0 and m > 0


def test_report_flags_totals_inconsistency():
    text, csv = audit_report(desk_config())
    assert "2.38" in text and "2.28" in text
    assert "disagrees" in text
    lines = csv.strip().splitlines()
    assert lines[0] == "component,flops_g,params_m,ref_flops_g,ref_params_m,dev_pct"
    assert lines[-1].startswith("total,")
