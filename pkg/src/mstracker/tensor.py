"""Dense float64 tensor with reverse-mode automatic differentiation.

Storage is a flat row-major numpy array; reshape/transpose copy, there are
no strided views.  The graph is define-by-run: every op returns a fresh
Tensor holding a closure that scatters the incoming gradient to its
parents.  Forward ops validate finiteness -- NaN/Inf is an error, never a
value.  Broadcasting is limited to what numpy does naturally; gradients
are un-broadcast by summation.
"""

import numpy as np
from scipy.special import erf

from .counting import record
from .errors import NumericError, ShapeError


def _check_finite(arr, op):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite value produced by {op}")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, _parents=(), _backward_fn=None, _op="tensor"):
        self.data = np.asarray(data, dtype=np.float64)
        _check_finite(self.data, _op)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward_fn = _backward_fn if self.requires_grad else None

    # -- basics ---------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, grad={self.requires_grad})"

    def _accum(self, grad):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Reverse-mode sweep from a scalar output."""
        if self.size != 1:
            raise ShapeError(f"backward() needs a scalar, got shape {self.shape}")
        topo, seen, stack = [], set(), [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accum(np.ones_like(self.data))
        for node in reversed(topo):
            if node.requires_grad and node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -_as_tensor(other))

    def __rsub__(self, other):
        return add(_as_tensor(other), -self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes or None)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad, shape):
    """Sum grad down to the given shape (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


# -- elementwise ---------------------------------------------------------


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data, _parents=(a, b), _op="add")

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.shape))

    out._backward_fn = bw
    return out


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data * b.data, _parents=(a, b), _op="mul")

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.shape))

    out._backward_fn = bw
    return out


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data / b.data, _parents=(a, b), _op="div")

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    out._backward_fn = bw
    return out


def power(a, p):
    a = _as_tensor(a)
    out = Tensor(a.data**p, _parents=(a,), _op="power")

    def bw(g):
        a._accum(g * p * a.data ** (p - 1))

    out._backward_fn = bw
    return out


def absolute(a):
    a = _as_tensor(a)
    out = Tensor(np.abs(a.data), _parents=(a,), _op="abs")

    def bw(g):
        a._accum(g * np.sign(a.data))

    out._backward_fn = bw
    return out


def exp(a):
    a = _as_tensor(a)
    out = Tensor(np.exp(a.data), _parents=(a,), _op="exp")

    def bw(g):
        a._accum(g * out.data)

    out._backward_fn = bw
    return out


def log(a):
    a = _as_tensor(a)
    out = Tensor(np.log(a.data), _parents=(a,), _op="log")

    def bw(g):
        a._accum(g / a.data)

    out._backward_fn = bw
    return out


def sqrt(a):
    a = _as_tensor(a)
    out = Tensor(np.sqrt(a.data), _parents=(a,), _op="sqrt")

    def bw(g):
        a._accum(g * 0.5 / out.data)

    out._backward_fn = bw
    return out


def clamp_min(a, lo):
    """max(a, lo); gradient passes where a > lo."""
    a = _as_tensor(a)
    out = Tensor(np.maximum(a.data, lo), _parents=(a,), _op="clamp_min")

    def bw(g):
        a._accum(g * (a.data > lo))

    out._backward_fn = bw
    return out


def relu(a):
    a = _as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0), _parents=(a,), _op="relu")

    def bw(g):
        a._accum(g * (a.data > 0.0))

    out._backward_fn = bw
    return out


def sigmoid(a):
    a = _as_tensor(a)
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(s, _parents=(a,), _op="sigmoid")

    def bw(g):
        a._accum(g * s * (1.0 - s))

    out._backward_fn = bw
    return out


def silu(a):
    a = _as_tensor(a)
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(a.data * s, _parents=(a,), _op="silu")

    def bw(g):
        a._accum(g * (s + a.data * s * (1.0 - s)))

    out._backward_fn = bw
    return out


def gelu(a):
    """Exact (erf-based) GELU."""
    a = _as_tensor(a)
    x = a.data
    cdf = 0.5 * (1.0 + erf(x / np.sqrt(2.0)))
    out = Tensor(x * cdf, _parents=(a,), _op="gelu")

    def bw(g):
        pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
        a._accum(g * (cdf + x * pdf))

    out._backward_fn = bw
    return out


def softplus(a):
    a = _as_tensor(a)
    out = Tensor(np.logaddexp(0.0, a.data), _parents=(a,), _op="softplus")

    def bw(g):
        a._accum(g / (1.0 + np.exp(-a.data)))

    out._backward_fn = bw
    return out


def softmax(a, axis=-1):
    """Shift-invariant softmax along one axis."""
    a = _as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s, _parents=(a,), _op="softmax")

    def bw(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        a._accum(s * (g - dot))

    out._backward_fn = bw
    return out


# -- reductions ----------------------------------------------------------


def reduce_sum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims), _parents=(a,), _op="sum")

    def bw(g):
        if axis is None:
            a._accum(np.broadcast_to(g, a.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            a._accum(np.broadcast_to(gg, a.shape).copy())

    out._backward_fn = bw
    return out


def reduce_mean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    if axis is None:
        n = a.size
    elif isinstance(axis, tuple):
        n = int(np.prod([a.shape[ax] for ax in axis]))
    else:
        n = a.shape[axis]
    return reduce_sum(a, axis, keepdims) * (1.0 / n)


# -- shape ops (copying) -------------------------------------------------


def reshape(a, shape):
    a = _as_tensor(a)
    out = Tensor(a.data.reshape(shape).copy(), _parents=(a,), _op="reshape")

    def bw(g):
        a._accum(g.reshape(a.shape))

    out._backward_fn = bw
    return out


def transpose(a, axes=None):
    a = _as_tensor(a)
    out = Tensor(a.data.transpose(axes).copy(), _parents=(a,), _op="transpose")

    def bw(g):
        if axes is None:
            a._accum(g.transpose())
        else:
            a._accum(g.transpose(np.argsort(axes)))

    out._backward_fn = bw
    return out


def take(a, idx):
    """Basic slicing/indexing; backward scatter-adds into the source."""
    a = _as_tensor(a)
    out = Tensor(a.data[idx].copy(), _parents=(a,), _op="take")

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        a._accum(full)

    out._backward_fn = bw
    return out


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                 _parents=tuple(tensors), _op="concat")
    sizes = [t.shape[axis] for t in tensors]

    def bw(g):
        start = 0
        for t, n in zip(tensors, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(start, start + n)
            if t.requires_grad:
                t._accum(g[tuple(sl)])
            start += n

    out._backward_fn = bw
    return out


def split(a, sizes, axis=0):
    """Split into consecutive chunks of the given extents along axis."""
    a = _as_tensor(a)
    if sum(sizes) != a.shape[axis]:
        raise ShapeError(f"split sizes {sizes} do not cover extent {a.shape[axis]}")
    parts, start = [], 0
    for n in sizes:
        sl = [slice(None)] * a.data.ndim
        sl[axis] = slice(start, start + n)
        parts.append(take(a, tuple(sl)))
        start += n
    return parts


# -- linear algebra ------------------------------------------------------


def matmul(a, b):
    """Matrix product; supports identical leading batch axes."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} vs {b.shape}")
    out_data = np.matmul(a.data, b.data)
    batch = int(np.prod(out_data.shape[:-2])) if out_data.ndim > 2 else 1
    record(batch * a.shape[-2] * a.shape[-1] * b.shape[-1])
    out = Tensor(out_data, _parents=(a, b), _op="matmul")

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(np.matmul(g, b.data.swapaxes(-1, -2)), a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(np.matmul(a.data.swapaxes(-1, -2), g), b.shape))

    out._backward_fn = bw
    return out


# -- normalization -------------------------------------------------------


def layer_norm(a, eps=1e-6):
    """Normalize the last axis to zero mean / unit variance (no affine)."""
    a = _as_tensor(a)
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = xc * inv
    out = Tensor(y, _parents=(a,), _op="layer_norm")
    n = a.shape[-1]

    def bw(g):
        gm = g.mean(axis=-1, keepdims=True)
        gy = (g * y).mean(axis=-1, keepdims=True)
        a._accum(inv * (g - gm - y * gy))

    out._backward_fn = bw
    return out


# -- convolutions --------------------------------------------------------


def conv2d(x, w, b=None, padding=0):
    """2-D convolution, x [Cin,H,W], w [Cout,Cin,kh,kw] -> [Cout,H',W']."""
    x, w = _as_tensor(x), _as_tensor(w)
    cin, h, wd = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w:
        raise ShapeError(f"conv2d channel mismatch: input {cin} vs kernel {cin_w}")
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding)))
    ho, wo = h + 2 * padding - kh + 1, wd + 2 * padding - kw + 1
    # im2col: [cin*kh*kw, ho*wo]
    cols = np.empty((cin, kh, kw, ho, wo))
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = xp[:, i:i + ho, j:j + wo]
    cols2 = cols.reshape(cin * kh * kw, ho * wo)
    wf = w.data.reshape(cout, cin * kh * kw)
    y = (wf @ cols2).reshape(cout, ho, wo)
    record(cout * ho * wo * cin * kh * kw)
    if b is not None:
        b = _as_tensor(b)
        y = y + b.data[:, None, None]
    parents = (x, w) if b is None else (x, w, b)
    out = Tensor(y, _parents=parents, _op="conv2d")

    def bw(g):
        gf = g.reshape(cout, ho * wo)
        if w.requires_grad:
            w._accum((gf @ cols2.T).reshape(w.shape))
        if b is not None and b.requires_grad:
            b._accum(g.sum(axis=(1, 2)))
        if x.requires_grad:
            gcols = (wf.T @ gf).reshape(cin, kh, kw, ho, wo)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, i:i + ho, j:j + wo] += gcols[:, i, j]
            if padding:
                gxp = gxp[:, padding:-padding, padding:-padding]
            x._accum(gxp)

    out._backward_fn = bw
    return out


def depthwise_conv3x3(x, k, b=None):
    """Depthwise 3x3 convolution with zero padding, x [C,H,W], k [C,3,3]."""
    x, k = _as_tensor(x), _as_tensor(k)
    c, h, w = x.shape
    if k.shape != (c, 3, 3):
        raise ShapeError(f"depthwise kernel {k.shape} does not match {c} channels")
    xp = np.pad(x.data, ((0, 0), (1, 1), (1, 1)))
    y = np.zeros_like(x.data)
    for i in range(3):
        for j in range(3):
            y += k.data[:, i, j][:, None, None] * xp[:, i:i + h, j:j + w]
    record(c * h * w * 9)
    if b is not None:
        b = _as_tensor(b)
        y = y + b.data[:, None, None]
    parents = (x, k) if b is None else (x, k, b)
    out = Tensor(y, _parents=parents, _op="depthwise_conv3x3")

    def bw(g):
        if k.requires_grad:
            gk = np.zeros_like(k.data)
            for i in range(3):
                for j in range(3):
                    gk[:, i, j] = (g * xp[:, i:i + h, j:j + w]).sum(axis=(1, 2))
            k._accum(gk)
        if b is not None and b.requires_grad:
            b._accum(g.sum(axis=(1, 2)))
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i in range(3):
                for j in range(3):
                    gxp[:, i:i + h, j:j + w] += k.data[:, i, j][:, None, None] * g
            x._accum(gxp[:, 1:-1, 1:-1])

    out._backward_fn = bw
    return out
