"""Self-verification suites: dual-route oracle trials and gradient checks.

These back both the `oracle` / `gradcheck` CLI subcommands and the
acceptance tests.  Gradient checks use small random inputs kept away
from non-differentiable kinks (|x| bounded below for abs/relu-style
ops) so central differences are valid at the 1e-4 tolerance.
"""

import numpy as np

from . import tensor as T
from .fusion import CrossStateInteraction, StateEnhancement
from .backbone import AttentionBlock, TokenSequence, StateBundle
from .gradcheck import grad_check
from .head import HeadMaps, total_loss
from .nn import Linear
from .ssd import AConv1x1, HSABlock, ssd_core, ssd_oracle
from .tensor import Tensor

ORACLE_REL_TOL = 1e-9


# -- dual-route hidden-state operator check --------------------------------


def oracle_trial(rng):
    """One random configuration; returns (max abs deviation, max |output|)."""
    L = int(rng.integers(4, 129))
    d = int(rng.integers(2, 65))
    n_s = int(rng.integers(1, 17))
    k = int(rng.integers(1, 5))
    gate = Linear(d, d, rng)
    mix = AConv1x1(d, d, k, rng)
    values = Tensor(rng.normal(size=(L, d)))
    b_mat = Tensor(rng.normal(size=(L, n_s)))
    c_mat = Tensor(rng.normal(size=(L, n_s)))
    delta = Tensor(rng.normal(size=(L, n_s)))
    fast = ssd_core(values, b_mat, c_mat, delta, gate, mix).data
    slow = ssd_oracle(values, b_mat, c_mat, delta, gate, mix)
    return float(np.max(np.abs(fast - slow))), float(np.max(np.abs(slow)))


def run_oracle(trials, seed=0):
    """Worst relative deviation over `trials` random configurations."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        dev, scale = oracle_trial(rng)
        worst = max(worst, dev / max(scale, 1e-30))
    return worst


# -- gradient-check suites -------------------------------------------------


def _away_from(x, gap=0.05):
    """Push values away from 0 so kink-free central differences hold."""
    return x + np.sign(x + 1e-12) * gap


def primitive_checks(rng):
    """(name, function, input) triples covering every primitive op."""
    a = rng.normal(size=(3, 4))
    pos = np.abs(rng.normal(size=(3, 4))) + 0.5
    other = Tensor(rng.normal(size=(3, 4)))
    mat = Tensor(rng.normal(size=(4, 5)))
    img = rng.normal(size=(2, 5, 6))
    kern = Tensor(rng.normal(size=(3, 2, 3, 3)) * 0.3)
    kb = Tensor(rng.normal(size=3) * 0.1)
    dw_k = Tensor(rng.normal(size=(2, 3, 3)) * 0.3)
    dw_b = Tensor(rng.normal(size=2) * 0.1)
    return [
        ("add", lambda x: (x + other).sum(), a),
        ("mul", lambda x: (x * other).sum(), a),
        ("div", lambda x: (x / (other * other + 1.0)).sum(), a),
        ("power", lambda x: (x**3).sum(), a),
        ("absolute", lambda x: T.absolute(x).sum(), _away_from(a)),
        ("exp", lambda x: T.exp(x).sum(), a),
        ("log", lambda x: T.log(x).sum(), pos),
        ("sqrt", lambda x: T.sqrt(x).sum(), pos),
        ("clamp_min", lambda x: T.clamp_min(x, 0.0).sum(), _away_from(a)),
        ("relu", lambda x: T.relu(x).sum(), _away_from(a)),
        ("sigmoid", lambda x: T.sigmoid(x).sum(), a),
        ("silu", lambda x: T.silu(x).sum(), a),
        ("gelu", lambda x: T.gelu(x).sum(), a),
        ("softplus", lambda x: T.softplus(x).sum(), a),
        ("softmax", lambda x: (T.softmax(x, axis=-1) * other).sum(), a),
        ("reduce_sum", lambda x: (x.sum(axis=0, keepdims=True) * other).sum(), a),
        ("reduce_mean", lambda x: (x.mean(axis=(0, 1)) * 3.0).sum(), a),
        ("reshape", lambda x: (T.reshape(x, (4, 3)) ** 2).sum(), a),
        ("transpose", lambda x: (T.transpose(x) * T.transpose(other)).sum(), a),
        ("take", lambda x: (x[1:, ::2] * 2.0).sum(), a),
        ("concat", lambda x: (T.concat([x, x * 2.0], axis=0)).sum(), a),
        ("split", lambda x: sum((p * p).sum() for p in T.split(x, [2, 2], axis=1)),
         a),
        ("matmul", lambda x: (T.matmul(x, mat) ** 2).sum(), a),
        ("layer_norm", lambda x: (T.layer_norm(x) * other).sum(), a),
        ("conv2d", lambda x: (T.conv2d(x, kern, kb, padding=1) ** 2).sum(), img),
        ("depthwise_conv3x3",
         lambda x: (T.depthwise_conv3x3(x, dw_k, dw_b) ** 2).sum(), img),
    ]


def _tiny_bundle(x):
    """Three derived states over a 4+4 token geometry."""
    seqs = []
    for scale in (1.0, 0.9, 1.1):
        seqs.append(TokenSequence(x * scale, 4, 4, (2, 2), (2, 2)))
    return StateBundle(seqs)


def composite_checks(rng):
    """(name, function, input) triples for the composed blocks."""
    dim, n_s, k = 6, 2, 2
    attn = AttentionBlock(dim, 2, 2.0, rng)
    hsa = HSABlock(dim, n_s, k, rng)
    sse = StateEnhancement(dim, 3, n_s, k, rng)
    csi = CrossStateInteraction(dim, n_s, k, rng)
    segments = [(4, (2, 2)), (4, (2, 2))]
    x_tokens = rng.normal(size=(8, dim)) * 0.5

    def fusion_stack(x):
        return csi(sse(_tiny_bundle(x))).tokens.sum()

    gh = gw = 3
    gt_norm = (0.52, 0.48, 0.3, 0.25)

    def loss_from_raw(x):
        score = T.sigmoid(T.reshape(x[: gh * gw], (gh, gw)))
        size = T.sigmoid(T.reshape(x[gh * gw : 3 * gh * gw], (2, gh, gw)))
        offset = T.sigmoid(T.reshape(x[3 * gh * gw :], (2, gh, gw)))
        return total_loss(HeadMaps(score, size, offset), gt_norm, 16)

    return [
        ("attention_block", lambda x: (attn(x) ** 2).sum(), x_tokens),
        ("hsa_ssd_block", lambda x: (hsa(x, segments) ** 2).sum(), x_tokens),
        ("sse_csi_stack", fusion_stack, x_tokens),
        ("total_loss", loss_from_raw, rng.normal(size=(5 * gh * gw,))),
    ]


def gradient_suite(num_seeds=20, include_composites=True):
    """Max relative error per check name over `num_seeds` seeds."""
    worst = {}
    for seed in range(num_seeds):
        rng = np.random.default_rng(1000 + seed)
        checks = primitive_checks(rng)
        if include_composites:
            checks += composite_checks(rng)
        for name, fn, x in checks:
            err = grad_check(fn, Tensor(np.asarray(x, dtype=np.float64)))
            worst[name] = max(worst.get(name, 0.0), err)
    return worst
