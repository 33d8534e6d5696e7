"""Parameter containers, common layers, and the AdamW optimizer."""

import numpy as np

from .tensor import Tensor, layer_norm, matmul

__all__ = ["Module", "Param", "Linear", "LayerNorm", "AdamW", "zero_all"]


def Param(data):
    return Tensor(data, requires_grad=True)


class Module:
    """Tiny container: collects parameters/buffers from attributes.

    Attributes that are Tensors with requires_grad are parameters; entries
    of the `_buffers` dict (plain numpy arrays) are non-trained state such
    as batch-norm running statistics.
    """

    def __init__(self):
        self._buffers = {}

    def named_params(self, prefix=""):
        out = {}
        for name, v in vars(self).items():
            if name == "_buffers":
                continue
            key = f"{prefix}{name}"
            if isinstance(v, Tensor) and v.requires_grad:
                out[key] = v
            elif isinstance(v, Module):
                out.update(v.named_params(f"{key}."))
            elif isinstance(v, (list, tuple)):
                for i, item in enumerate(v):
                    if isinstance(item, Module):
                        out.update(item.named_params(f"{key}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        out[f"{key}.{i}"] = item
        return out

    def named_buffers(self, prefix=""):
        out = {f"{prefix}{k}": v for k, v in self._buffers.items()}
        for name, v in vars(self).items():
            if isinstance(v, Module):
                out.update(v.named_buffers(f"{prefix}{name}."))
            elif isinstance(v, (list, tuple)):
                for i, item in enumerate(v):
                    if isinstance(item, Module):
                        out.update(item.named_buffers(f"{prefix}{name}.{i}."))
        return out

    def zero_grad(self):
        for p in self.named_params().values():
            p.zero_grad()


def zero_all(module):
    """Set every parameter of a module to zero (ablation wiring)."""
    for p in module.named_params().values():
        p.data[...] = 0.0


class Linear(Module):
    """y = x W^T + b."""

    def __init__(self, d_in, d_out, rng, scale=None):
        super().__init__()
        s = scale if scale is not None else 1.0 / np.sqrt(d_in)
        self.weight = Param(rng.uniform(-s, s, size=(d_out, d_in)))
        self.bias = Param(np.zeros(d_out))

    def __call__(self, x):
        return matmul(x, self.weight.transpose()) + self.bias


class LayerNorm(Module):
    """Pre-norm LN with learned affine."""

    def __init__(self, d):
        super().__init__()
        self.gamma = Param(np.ones(d))
        self.beta = Param(np.zeros(d))

    def __call__(self, x):
        return layer_norm(x) * self.gamma + self.beta


class AdamW(Module):
    """Decoupled weight decay Adam (beta 0.9/0.999)."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=1e-4):
        super().__init__()
        self.params = dict(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.b1**self.t
        bc2 = 1.0 - self.b2**self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[k]
            v = self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data -= self.lr * (update + self.weight_decay * p.data)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()
