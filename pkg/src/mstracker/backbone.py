"""Joint template/search attention backbone with multi-layer state taps.

The template and search crops are patch-embedded, concatenated along the
token axis, and run through a stack of pre-norm attention blocks.  The
outputs of the last `num_taps` blocks are returned as the state bundle
consumed by the fusion stage.
"""

from dataclasses import dataclass

import numpy as np

from .counting import tagged
from .errors import ConfigError
from .nn import LayerNorm, Linear, Module, Param
from .tensor import Tensor, concat, gelu, matmul, reshape, softmax, transpose

TEMPLATE = "template"
SEARCH = "search"


@dataclass
class TokenSequence:
    """Tokens [L, D] plus the grid geometry they came from."""
    tokens: Tensor
    template_len: int
    search_len: int
    template_grid: tuple
    search_grid: tuple

    def __post_init__(self):
        h, w = self.template_grid
        hs, ws = self.search_grid
        if self.template_len != h * w or self.search_len != hs * ws:
            raise ConfigError("token counts inconsistent with grids")
        if self.tokens.shape[0] != self.template_len + self.search_len:
            raise ConfigError("token tensor length != template_len + search_len")

    def like(self, tokens):
        return TokenSequence(tokens, self.template_len, self.search_len,
                             self.template_grid, self.search_grid)


@dataclass
class StateBundle:
    """Tapped per-layer token sequences sharing one geometry."""
    states: list

    def __post_init__(self):
        first = self.states[0]
        for s in self.states[1:]:
            if s.tokens.shape != first.tokens.shape:
                raise ConfigError("tapped states must share shape")


class PatchEmbed(Module):
    """Non-overlapping patch projection with a learned position table."""

    def __init__(self, cfg, role, rng):
        super().__init__()
        self.role = role
        self.patch = cfg.patch_size
        self.image_size = cfg.template_size if role == TEMPLATE else cfg.search_size
        n = self.image_size // self.patch
        self.grid = (n, n)
        d_patch = self.patch * self.patch * 3
        self.proj = Linear(d_patch, cfg.embed_dim, rng)
        self.pos = Param(rng.normal(0.0, 0.02, size=(n * n, cfg.embed_dim)))

    def __call__(self, image):
        h, w, c = image.shape
        if h != self.image_size or w != self.image_size or c != 3:
            raise ConfigError(
                f"{self.role} image is {image.shape}, expected "
                f"({self.image_size}, {self.image_size}, 3)")
        p = self.patch
        gh, gw = self.grid
        x = reshape(image, (gh, p, gw, p, 3))
        x = transpose(x, (0, 2, 1, 3, 4))
        x = reshape(x, (gh * gw, p * p * 3))
        return self.proj(x) + self.pos


class AttentionBlock(Module):
    """Pre-norm block: x + MHSA(LN(x)), then + MLP(LN(.))."""

    def __init__(self, dim, num_heads, mlp_ratio, rng):
        super().__init__()
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.norm1 = LayerNorm(dim)
        self.qkv = Linear(dim, 3 * dim, rng)
        self.out = Linear(dim, dim, rng)
        self.norm2 = LayerNorm(dim)
        hidden = int(dim * mlp_ratio)
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def attention(self, x):
        L, d = x.shape
        h, dk = self.num_heads, self.head_dim
        qkv = self.qkv(x)                                   # [L, 3d]
        qkv = reshape(qkv, (L, 3, h, dk))
        qkv = transpose(qkv, (1, 2, 0, 3))                  # [3, h, L, dk]
        q, k, v = qkv[0], qkv[1], qkv[2]
        with tagged("attn"):
            scores = matmul(q, transpose(k, (0, 2, 1))) * (1.0 / np.sqrt(dk))
            attn = softmax(scores, axis=-1)
            ctx = matmul(attn, v)                           # [h, L, dk]
        ctx = reshape(transpose(ctx, (1, 0, 2)), (L, d))
        return self.out(ctx)

    def __call__(self, x):
        x = x + self.attention(self.norm1(x))
        return x + self.fc2(gelu(self.fc1(self.norm2(x))))


class Backbone(Module):
    """Embeds both crops and taps the last `num_taps` block outputs."""

    def __init__(self, cfg, rng):
        super().__init__()
        self.cfg = cfg
        self.embed_t = PatchEmbed(cfg, TEMPLATE, rng)
        self.embed_s = PatchEmbed(cfg, SEARCH, rng)
        self.blocks = [
            AttentionBlock(cfg.embed_dim, cfg.num_heads, cfg.mlp_ratio, rng)
            for _ in range(cfg.num_layers)
        ]

    def embed(self, template, search):
        zt = self.embed_t(template)
        zs = self.embed_s(search)
        tokens = concat([zt, zs], axis=0)
        return TokenSequence(tokens, self.cfg.template_len, self.cfg.search_len,
                             self.embed_t.grid, self.embed_s.grid)

    def __call__(self, template, search):
        seq = self.embed(template, search)
        x = seq.tokens
        taps = []
        first_tap = self.cfg.num_layers - self.cfg.num_taps
        for i, block in enumerate(self.blocks):
            x = block(x)
            if i >= first_tap:
                taps.append(seq.like(x))
        return StateBundle(taps)
