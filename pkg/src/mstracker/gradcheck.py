"""Finite-difference verification of tape gradients."""

import numpy as np

from .errors import NumericError
from .tensor import Tensor


def grad_check(f, x, eps=1e-5):
    """Max relative error between tape and central-difference gradients.

    f maps a Tensor to a scalar Tensor and must be deterministic.  The
    relative error denominator is max(|analytic|, |numeric|, 1e-8).
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError(f"eps {eps} outside [1e-7, 1e-3]")
    x0 = np.array(x.data, copy=True)
    probe = Tensor(x0, requires_grad=True)
    out = f(probe)
    if out.size != 1:
        raise NumericError("grad_check target is not scalar")
    out.backward()
    analytic = probe.grad.copy() if probe.grad is not None else np.zeros_like(x0)

    numeric = np.zeros_like(x0)
    flat = x0.reshape(-1)
    nflat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f(Tensor(x0)).item()
        flat[i] = orig - eps
        fm = f(Tensor(x0)).item()
        flat[i] = orig
        nflat[i] = (fp - fm) / (2.0 * eps)
    if not (np.all(np.isfinite(analytic)) and np.all(np.isfinite(numeric))):
        raise NumericError("non-finite gradient during grad_check")

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def grad_check_param(loss_fn, param, eps=1e-5):
    """grad_check with respect to a module parameter.

    loss_fn takes no arguments and reads the parameter in place; the
    parameter's data is perturbed and restored.
    """
    param.zero_grad()
    out = loss_fn()
    out.backward()
    analytic = param.grad.copy() if param.grad is not None else np.zeros_like(param.data)

    x0 = np.array(param.data, copy=True)
    numeric = np.zeros_like(x0)
    flat = x0.reshape(-1)
    nflat = numeric.reshape(-1)
    saved = param.data
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        param.data = x0
        fp = loss_fn().item()
        flat[i] = orig - eps
        fm = loss_fn().item()
        flat[i] = orig
        nflat[i] = (fp - fm) / (2.0 * eps)
    param.data = saved
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
