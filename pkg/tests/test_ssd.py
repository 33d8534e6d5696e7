import numpy as np
import pytest

from mstracker.counting import OpCounter
from mstracker.errors import GeometryError
from mstracker.nn import Linear, zero_all
from mstracker.ssd import (AConv1x1, ADWConv3x3, HSABlock, discretize,
                           ssd_core, ssd_oracle)
from mstracker.tensor import Tensor
from mstracker.verify import run_oracle


def test_discretize_columns_are_convex_weights():
    rng = np.random.default_rng(0)
    out = discretize(Tensor(rng.normal(size=(40, 6)))).data
    assert np.all(out >= 0)
    assert np.allclose(out.sum(axis=0), 1.0, atol=1e-6)


def test_oracle_equivalence_sample():
    assert run_oracle(10, seed=3) < 1e-9


def test_core_matches_oracle_fixed_case():
    rng = np.random.default_rng(7)
    d, n_s, L = 8, 3, 20
    gate, mix = Linear(d, d, rng), AConv1x1(d, d, 2, rng)
    args = (Tensor(rng.normal(size=(L, d))), Tensor(rng.normal(size=(L, n_s))),
            Tensor(rng.normal(size=(L, n_s))), Tensor(rng.normal(size=(L, n_s))))
    fast = ssd_core(*args, gate, mix).data
    slow = ssd_oracle(*args, gate, mix)
    assert np.max(np.abs(fast - slow)) < 1e-12 * max(1.0, np.abs(slow).max())


def test_zero_weight_block_is_identity():
    rng = np.random.default_rng(1)
    block = HSABlock(8, 2, 2, rng)
    zero_all(block)
    x = Tensor(rng.normal(size=(8, 8)))
    y = block(x, [(4, (2, 2)), (4, (2, 2))])
    assert np.array_equal(y.data, x.data)


def test_adw_rejects_bad_segments():
    rng = np.random.default_rng(2)
    adw = ADWConv3x3(2, 2, rng)
    b = Tensor(rng.normal(size=(8, 2)))
    c = Tensor(rng.normal(size=(8, 2)))
    with pytest.raises(GeometryError):
        adw(b, c, [(4, (2, 2))])                 # covers only half the tokens
    with pytest.raises(GeometryError):
        adw(b, c, [(4, (2, 2)), (4, (1, 3))])    # grid does not match count


def test_segment_locality():
    """With the kernel mixture frozen, perturbing one grid segment leaves
    the depthwise refinement of the other segment unchanged."""
    rng = np.random.default_rng(3)
    adw = ADWConv3x3(2, 2, rng)
    zero_all(adw.attn)                           # uniform, input-independent pi
    segs = [(4, (2, 2)), (4, (2, 2))]
    base = rng.normal(size=(8, 2))
    b1, c1 = adw(Tensor(base), Tensor(base), segs)
    bumped = base.copy()
    bumped[0, 0] += 1.0                          # perturb first segment only
    b2, c2 = adw(Tensor(bumped), Tensor(bumped), segs)
    assert np.array_equal(b1.data[4:], b2.data[4:])
    assert np.array_equal(c1.data[4:], c2.data[4:])
    assert not np.array_equal(b1.data[:4], b2.data[:4])


def test_closed_form_macs_match_counter():
    rng = np.random.default_rng(4)
    d, n_s, k, L = 16, 4, 3, 32
    block = HSABlock(d, n_s, k, rng)
    counter = OpCounter()
    x = Tensor(rng.normal(size=(L, d)) * 0.3)
    with counter.active():
        block(x, [(16, (4, 4)), (16, (4, 4))])
    main, aux = block.macs_closed_form(L)
    got_main = counter.macs(tags=("main", "value", "ssd"))
    got_aux = counter.macs(tags=("dyn_aux",))
    assert got_main == main
    assert got_aux == aux


def test_core_cost_linear_in_length():
    rng = np.random.default_rng(5)
    d, n_s = 8, 4
    gate, mix = Linear(d, d, rng), AConv1x1(d, d, 2, rng)
    totals = []
    for L in (64, 128, 256, 512):
        counter = OpCounter()
        args = (Tensor(rng.normal(size=(L, d))),
                Tensor(rng.normal(size=(L, n_s))),
                Tensor(rng.normal(size=(L, n_s))),
                Tensor(rng.normal(size=(L, n_s))))
        with counter.active():
            ssd_core(*args, gate, mix)
        totals.append(counter.macs())
    diffs = np.diff(totals)
    assert diffs[1] == 2 * diffs[0] and diffs[2] == 2 * diffs[1]
