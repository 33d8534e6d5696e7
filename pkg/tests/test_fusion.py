import numpy as np

from mstracker.backbone import StateBundle, TokenSequence
from mstracker.config import desk_config
from mstracker.fusion import StateFusion
from mstracker.model import MultiStateTracker
from mstracker.nn import zero_all
from mstracker.tensor import Tensor


def _bundle(rng, cfg):
    states = []
    for _ in range(cfg.num_taps):
        states.append(TokenSequence(
            Tensor(rng.normal(size=(cfg.joint_len, cfg.embed_dim))),
            cfg.template_len, cfg.search_len,
            cfg.template_grid, cfg.search_grid))
    return StateBundle(states)


def test_fusion_output_geometry():
    cfg = desk_config()
    rng = np.random.default_rng(0)
    fused = StateFusion(cfg, rng)(_bundle(rng, cfg))
    assert fused.tokens.shape == (cfg.joint_len, cfg.embed_dim)
    assert fused.search_grid == cfg.search_grid


def test_zero_weights_degenerate_to_state_sum():
    cfg = desk_config()
    rng = np.random.default_rng(1)
    fusion = StateFusion(cfg, rng)
    zero_all(fusion)
    bundle = _bundle(rng, cfg)
    fused = fusion(bundle)
    expected = sum(s.tokens.data for s in bundle.states)
    assert np.max(np.abs(fused.tokens.data - expected)) < 1e-12


def test_enhancement_blocks_are_independent():
    """Each tapped state is refined by its own block: zeroing one block
    leaves the other states' enhanced outputs unchanged."""
    cfg = desk_config()
    rng = np.random.default_rng(2)
    fusion = StateFusion(cfg, rng)
    bundle = _bundle(rng, cfg)
    before = [s.tokens.data.copy() for s in fusion.sse(bundle).states]
    zero_all(fusion.sse.blocks[0])
    after = [s.tokens.data.copy() for s in fusion.sse(bundle).states]
    assert not np.array_equal(before[0], after[0])
    assert np.array_equal(before[1], after[1])
    assert np.array_equal(before[2], after[2])


def test_full_model_shapes_and_gradients():
    cfg = desk_config()
    model = MultiStateTracker(cfg, seed=0)
    t = Tensor(np.zeros((cfg.template_size, cfg.template_size, 3)))
    s = Tensor(np.full((cfg.search_size, cfg.search_size, 3), 0.5))
    maps = model.forward(t, s, train=True)
    gh, gw = cfg.search_grid
    assert maps.score.shape == (gh, gw)
    assert maps.size.shape == (2, gh, gw)
    assert maps.offset.shape == (2, gh, gw)
    maps.score.sum().backward()
    touched = sum(1 for p in model.named_params().values()
                  if p.grad is not None and np.any(p.grad != 0))
    assert touched > 0
