"""Multiply-accumulate counting for the complexity audit.

Primitive ops record their MAC cost into the active :class:`OpCounter`
(if any), under the current component label and tag.  Components are the
audit rows (backbone / sse / csi / head); tags separate op roles so that
tests and the audit can include or exclude specific groups:

    main       default data-path matmuls and convs
    attn       attention score/value products (data x data, quadratic in L)
    ssd        hidden-state contraction and expansion (linear in L)
    value      per-token value projection inside an enhancement block
    dyn_aux    dynamic-kernel overhead: mixture assembly and attention MLPs

Counting is single-threaded by design: one counter is installed globally
for the duration of an audit pass.
"""

from collections import defaultdict
from contextlib import contextmanager

_ACTIVE = None


class OpCounter:
    """Running MAC tally keyed by (component, tag)."""

    def __init__(self):
        self._macs = defaultdict(int)
        self._component = ""
        self._tag = "main"

    @contextmanager
    def active(self):
        """Install this counter as the recording target."""
        global _ACTIVE
        prev = _ACTIVE
        _ACTIVE = self
        try:
            yield self
        finally:
            _ACTIVE = prev

    @contextmanager
    def component(self, name):
        prev = self._component
        self._component = name
        try:
            yield
        finally:
            self._component = prev

    @contextmanager
    def tag(self, name):
        prev = self._tag
        self._tag = name
        try:
            yield
        finally:
            self._tag = prev

    def add(self, macs):
        if macs < 0:
            raise ValueError("negative MAC count")
        self._macs[(self._component, self._tag)] += int(macs)

    def macs(self, component=None, tags=None, exclude_tags=()):
        """Total MACs, optionally filtered by component and tag set."""
        total = 0
        for (comp, tag), n in self._macs.items():
            if component is not None and comp != component:
                continue
            if tags is not None and tag not in tags:
                continue
            if tag in exclude_tags:
                continue
            total += n
        return total

    def components(self):
        return sorted({comp for comp, _ in self._macs})


def record(macs):
    """Record a MAC count against the active counter, if one is installed."""
    if _ACTIVE is not None:
        _ACTIVE.add(macs)


@contextmanager
def tagged(name):
    """Tag all MACs recorded inside the block; no-op without a counter."""
    if _ACTIVE is None:
        yield
    else:
        with _ACTIVE.tag(name):
            yield
