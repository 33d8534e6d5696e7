"""Linear-time hidden-state sequence operator with adaptive projections.

Tokens [L, D] are projected to per-token state couplings (B, C, Delta) by
a dynamic 1x1 convolution whose kernel is a softmax-weighted mixture of K
learned kernels.  B and C get a depthwise 3x3 refinement on their 2-D
grids, Delta is normalized into convex token weights, and the sequence is
reduced into N_s << L global hidden states where gating and channel
mixing happen before expansion back to tokens.  Cost of the core is
O(L*N_s*D + N_s*D^2); the quadratic reference path (`ssd_oracle`)
computes the identical function token-by-token for verification.
"""

import numpy as np

from .counting import tagged
from .errors import GeometryError
from .nn import LayerNorm, Linear, Module, Param
from .tensor import (Tensor, concat, matmul, depthwise_conv3x3, relu, reshape,
                     silu, softmax, softplus, split, transpose)

DISCRETIZE_EPS = 1e-8


def _mlp_hidden(d_in):
    return max(4, d_in // 4)


class KernelAttention(Module):
    """Pool tokens, run a small MLP, softmax over the K kernel logits."""

    def __init__(self, d_in, num_kernels, rng):
        super().__init__()
        self.fc1 = Linear(d_in, _mlp_hidden(d_in), rng)
        self.fc2 = Linear(_mlp_hidden(d_in), num_kernels, rng)

    def __call__(self, x):
        pooled = x.mean(axis=0, keepdims=True)          # one pi per sequence
        logits = self.fc2(relu(self.fc1(pooled)))
        return softmax(logits, axis=-1)                 # [1, K]


class AConv1x1(Module):
    """Pointwise conv with an attention-mixed kernel bank."""

    def __init__(self, d_in, d_out, num_kernels, rng):
        super().__init__()
        self.d_in, self.d_out, self.K = d_in, d_out, num_kernels
        s = 1.0 / np.sqrt(d_in)
        self.kernels = Param(rng.uniform(-s, s, size=(num_kernels, d_out, d_in)))
        self.biases = Param(np.zeros((num_kernels, d_out)))
        self.attn = KernelAttention(d_in, num_kernels, rng)

    def mixture(self, x):
        """Effective (kernel, bias) for this sequence."""
        with tagged("dyn_aux"):
            pi = self.attn(x)
            flat = reshape(self.kernels, (self.K, self.d_out * self.d_in))
            w_eff = reshape(matmul(pi, flat), (self.d_out, self.d_in))
            b_eff = reshape(matmul(pi, self.biases), (self.d_out,))
        return w_eff, b_eff

    def __call__(self, x):
        w_eff, b_eff = self.mixture(x)
        return matmul(x, transpose(w_eff)) + b_eff


class ADWConv3x3(Module):
    """Depthwise 3x3 over the token grids with a mixed kernel bank.

    B and C ([L, N_s] each) are stacked channel-wise and convolved on each
    grid segment independently, with a residual add; template and search
    tokens (and, in the interaction block, different states) never mix.
    """

    def __init__(self, state_count, num_kernels, rng):
        super().__init__()
        self.C = 2 * state_count
        self.K = num_kernels
        s = 1.0 / 3.0
        self.kernels = Param(rng.uniform(-s, s, size=(num_kernels, self.C, 3, 3)))
        self.biases = Param(np.zeros((num_kernels, self.C)))
        self.attn = KernelAttention(self.C, num_kernels, rng)

    def __call__(self, b_mat, c_mat, segments):
        x = concat([b_mat, c_mat], axis=1)              # [L, 2N_s]
        L = x.shape[0]
        if sum(n for n, _ in segments) != L:
            raise GeometryError(f"segments cover {sum(n for n, _ in segments)} tokens, have {L}")
        with tagged("dyn_aux"):
            pi = self.attn(x)
            flat = reshape(self.kernels, (self.K, self.C * 9))
            k_eff = reshape(matmul(pi, flat), (self.C, 3, 3))
            b_eff = reshape(matmul(pi, self.biases), (self.C,))
        outs, start = [], 0
        for n, (gh, gw) in segments:
            if gh * gw != n:
                raise GeometryError(f"segment of {n} tokens does not match grid {(gh, gw)}")
            seg = x[start:start + n, :]
            grid = transpose(reshape(seg, (gh, gw, self.C)), (2, 0, 1))
            conv = depthwise_conv3x3(grid, k_eff, b_eff)
            flat_seg = reshape(transpose(conv, (1, 2, 0)), (n, self.C))
            outs.append(seg + flat_seg)                 # residual
            start += n
        y = concat(outs, axis=0)
        n_s = self.C // 2
        return y[:, :n_s], y[:, n_s:]


def discretize(delta):
    """Column-normalized softplus: each hidden state sees a convex
    combination of token contributions."""
    sp = softplus(delta)
    return sp / (DISCRETIZE_EPS + sp.sum(axis=0, keepdims=True))


def ssd_core(values, b_mat, c_mat, delta, gate, mix):
    """Reduce L tokens to hidden states, gate and mix there, expand back.

    values [L, D]; b_mat/c_mat/delta [L, N_s].  No O(L*D^2) term appears
    here -- per-token projections happen before this call.
    """
    a_bar = discretize(delta)
    with tagged("ssd"):
        h_in = matmul(transpose(a_bar * b_mat), values)     # [N_s, D]
    g = silu(gate(h_in))
    h_out = mix(g * h_in)
    with tagged("ssd"):
        return matmul(c_mat, h_out)                         # [L, D]


def ssd_oracle(values, b_mat, c_mat, delta, gate, mix):
    """Quadratic-form reference for `ssd_core`.

    Recomputes the same function in plain numpy without the [N_s, D]
    vectorized shortcut: the token reduction and expansion are explicit
    loops over tokens (the pre-reduction token-token composition), with
    the identical gate/mix applied to the hidden states in between.
    Reads raw weight arrays only; shares no code with the fast path.
    """
    S = np.asarray(values.data if isinstance(values, Tensor) else values, dtype=np.float64)
    B = np.asarray(b_mat.data if isinstance(b_mat, Tensor) else b_mat, dtype=np.float64)
    C = np.asarray(c_mat.data if isinstance(c_mat, Tensor) else c_mat, dtype=np.float64)
    D = np.asarray(delta.data if isinstance(delta, Tensor) else delta, dtype=np.float64)
    L, n_s = B.shape
    d = S.shape[1]

    sp = np.logaddexp(0.0, D)
    a_bar = sp / (DISCRETIZE_EPS + sp.sum(axis=0))
    w = a_bar * B                                           # [L, N_s]

    h_in = np.zeros((n_s, d))
    for t in range(L):                                      # explicit reduction
        h_in += np.outer(w[t], S[t])

    gz = h_in @ gate.weight.data.T + gate.bias.data
    g = gz / (1.0 + np.exp(-gz))                            # SiLU
    u = g * h_in

    pooled = u.mean(axis=0)
    a1 = np.maximum(mix.attn.fc1.weight.data @ pooled + mix.attn.fc1.bias.data, 0.0)
    logits = mix.attn.fc2.weight.data @ a1 + mix.attn.fc2.bias.data
    e = np.exp(logits - logits.max())
    pi = e / e.sum()
    k_eff = np.tensordot(pi, mix.kernels.data, axes=1)
    b_eff = pi @ mix.biases.data
    h_out = u @ k_eff.T + b_eff

    y = np.zeros((L, d))
    for t in range(L):                                      # explicit expansion
        y[t] = C[t] @ h_out
    return y


class HSABlock(Module):
    """One enhancement block: LN, value projection, adaptive state
    couplings, grid-local refinement, hidden-state core, residual."""

    def __init__(self, dim, state_count, num_kernels, rng):
        super().__init__()
        self.state_count = state_count
        self.norm = LayerNorm(dim)
        self.value = Linear(dim, dim, rng)
        self.proj = AConv1x1(dim, 3 * state_count, num_kernels, rng)
        self.adw = ADWConv3x3(state_count, num_kernels, rng)
        self.gate = Linear(dim, dim, rng)
        self.mix = AConv1x1(dim, dim, num_kernels, rng)

    def __call__(self, tokens, segments):
        u = self.norm(tokens)
        with tagged("value"):
            v = self.value(u)
        packed = self.proj(u)                               # [L, 3 N_s]
        n_s = self.state_count
        b_mat, c_mat, delta = split(packed, [n_s, n_s, n_s], axis=1)
        b_mat, c_mat = self.adw(b_mat, c_mat, segments)
        y = ssd_core(v, b_mat, c_mat, delta, self.gate, self.mix)
        return tokens + y

    def macs_closed_form(self, seq_len):
        """Expected audited MACs of one forward at the given token count."""
        d = self.value.weight.shape[1]
        n_s = self.state_count
        L = seq_len
        k = self.proj.K
        h_d = _mlp_hidden(d)
        h_c = _mlp_hidden(2 * n_s)
        main = (L * d * d                 # value projection
                + L * d * 3 * n_s        # packed coupling projection
                + 9 * 2 * L * n_s        # depthwise refinement of B and C
                + L * n_s * d            # token reduction
                + n_s * d * d            # gate
                + n_s * d * d            # hidden-state mix
                + L * n_s * d)           # token expansion
        aux = (k * (3 * n_s) * d + k * 3 * n_s          # proj mixture + bias
               + d * h_d + h_d * k                      # proj attention MLP
               + k * 2 * n_s * 9 + k * 2 * n_s          # adw mixture + bias
               + 2 * n_s * h_c + h_c * k                # adw attention MLP
               + k * d * d + k * d                      # mix mixture + bias
               + d * h_d + h_d * k)                     # mix attention MLP
        return main, aux


def spec_segments(seq):
    """Template + search grid segments for a single token sequence."""
    return [(seq.template_len, seq.template_grid),
            (seq.search_len, seq.search_grid)]
