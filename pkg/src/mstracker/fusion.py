"""Per-state enhancement and cross-state interaction.

Each tapped state is refined by its own enhancement block; the refined
states are then concatenated along the token axis, passed through one
shared interaction block (whose depthwise stage sees each state's
template/search grids as separate segments), split back, and summed.
With every fusion weight zeroed the whole stage degenerates to the plain
sum of the tapped states.
"""

from .nn import Module
from .ssd import HSABlock, spec_segments
from .tensor import concat, split


class StateEnhancement(Module):
    """Independent enhancement block per tapped state."""

    def __init__(self, dim, num_states, state_count, num_kernels, rng):
        super().__init__()
        self.blocks = [HSABlock(dim, state_count, num_kernels, rng)
                       for _ in range(num_states)]

    def __call__(self, bundle):
        out = []
        for block, seq in zip(self.blocks, bundle.states):
            out.append(seq.like(block(seq.tokens, spec_segments(seq))))
        return type(bundle)(out)


class CrossStateInteraction(Module):
    """Joint block over the token-axis concatenation of all states."""

    def __init__(self, dim, state_count, num_kernels, rng):
        super().__init__()
        self.block = HSABlock(dim, state_count, num_kernels, rng)

    def __call__(self, bundle):
        states = bundle.states
        joint = concat([s.tokens for s in states], axis=0)
        segments = []
        for s in states:
            segments.extend(spec_segments(s))
        y = self.block(joint, segments)
        per_len = states[0].tokens.shape[0]
        parts = split(y, [per_len] * len(states), axis=0)
        fused = parts[0]
        for p in parts[1:]:
            fused = fused + p
        return states[0].like(fused)


class StateFusion(Module):
    """Enhancement then interaction; returns the fused token sequence."""

    def __init__(self, cfg, rng):
        super().__init__()
        self.sse = StateEnhancement(cfg.embed_dim, cfg.num_taps,
                                    cfg.ssd_state_count, cfg.aconv_kernel_count, rng)
        self.csi = CrossStateInteraction(cfg.embed_dim, cfg.ssd_state_count,
                                         cfg.aconv_kernel_count, rng)

    def __call__(self, bundle, counter=None):
        if counter is not None:
            with counter.component("sse"):
                enhanced = self.sse(bundle)
            with counter.component("csi"):
                return self.csi(enhanced)
        enhanced = self.sse(bundle)
        return self.csi(enhanced)
