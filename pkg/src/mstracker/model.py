"""Full tracker network: backbone -> state fusion -> center head."""

import numpy as np

from .backbone import Backbone
from .fusion import StateFusion
from .head import CenterHead
from .nn import Module


class MultiStateTracker(Module):
    COMPONENTS = ("backbone", "sse", "csi", "head")

    def __init__(self, cfg, seed=0):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.backbone = Backbone(cfg, rng)
        self.fusion = StateFusion(cfg, rng)
        self.head = CenterHead(cfg, rng)

    def forward(self, template, search, train=False, counter=None):
        """template/search: Tensor[H, W, 3] crops scaled to [0, 1]."""
        if counter is None:
            bundle = self.backbone(template, search)
            fused = self.fusion(bundle)
            return self.head(fused, train=train)
        with counter.component("backbone"):
            bundle = self.backbone(template, search)
        fused = self.fusion(bundle, counter=counter)
        with counter.component("head"):
            return self.head(fused, train=train)

    __call__ = forward

    def component_of(self, param_name):
        """Audit row for a parameter name."""
        if param_name.startswith("backbone."):
            return "backbone"
        if param_name.startswith("fusion.sse."):
            return "sse"
        if param_name.startswith("fusion.csi."):
            return "csi"
        if param_name.startswith("head."):
            return "head"
        raise KeyError(param_name)
