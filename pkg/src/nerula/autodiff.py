"""Minimal dense-array reverse-mode autodiff on float64 numpy arrays.

A Node wraps a value array plus a backward closure; ops build the tape as a
DAG and `backward` walks it once in reverse topological order, accumulating
into `.grad`. The op set is exactly what the encoder/decoder stack needs:
elementwise arithmetic, matmul, reductions, shape moves, softmax, gelu,
layer_norm, strided 1-D conv and transposed conv, and banded local attention.

Everything is float64 end to end; there is no fast path that changes math.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

__all__ = [
    "Node", "backward", "fd_check", "FdCheckResult", "standard_gradient_battery",
    "add", "sub", "mul", "div", "neg", "pow_const", "abs_", "where",
    "matmul", "sum_", "mean", "reshape", "swapaxes", "take_range",
    "softmax", "gelu", "layer_norm", "conv1d", "conv_transpose1d",
    "local_attention", "interpolate_linear", "AdamState", "adam_step",
]


class Node:
    """One tape entry: a float64 value, a lazily allocated grad, parents."""

    __slots__ = ("value", "grad", "_parents", "_backward", "_grad_owned")

    def __init__(self, value, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward
        self._grad_owned = False

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)


def _split(x):
    """Return (value, node-or-None); plain arrays/scalars are constants."""
    if isinstance(x, Node):
        return x.value, x
    return np.asarray(x, dtype=np.float64), None


def _parents(*nodes):
    return tuple(n for n in nodes if n is not None)


def _accum(node, g):
    # First contribution is kept by reference (backward closures pass either
    # fresh arrays or views the producer never mutates); the first in-place
    # add would corrupt shared storage, so it goes out of place and only the
    # copy it makes is mutated after that.
    if node.grad is None:
        node.grad = g
        node._grad_owned = False
    elif node._grad_owned:
        node.grad += g
    else:
        node.grad = node.grad + g
        node._grad_owned = True


def _unbroadcast(g, shape):
    """Reduce a broadcast gradient back to `shape`."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _toposort(root):
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    return order


def backward(root, seed=None):
    """Accumulate d(sum(root * seed))/d(leaf) into every reachable .grad.

    seed defaults to ones, i.e. the gradient of sum(root). Interior grads are
    released as soon as their parents have consumed them, so after the sweep
    only leaf nodes (inputs and parameters) still hold .grad.
    """
    root.grad = np.ones_like(root.value) if seed is None else np.asarray(seed, dtype=np.float64)
    for node in reversed(_toposort(root)):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
        if node._parents:
            node.grad = None
            node._grad_owned = False


# ---------------------------------------------------------------- elementwise

def add(a, b):
    av, an = _split(a)
    bv, bn = _split(b)
    out = Node(av + bv, _parents(an, bn))

    def back(g):
        if an is not None:
            _accum(an, _unbroadcast(g, an.value.shape))
        if bn is not None:
            _accum(bn, _unbroadcast(g, bn.value.shape))

    out._backward = back
    return out


def sub(a, b):
    av, an = _split(a)
    bv, bn = _split(b)
    out = Node(av - bv, _parents(an, bn))

    def back(g):
        if an is not None:
            _accum(an, _unbroadcast(g, an.value.shape))
        if bn is not None:
            _accum(bn, _unbroadcast(-g, bn.value.shape))

    out._backward = back
    return out


def mul(a, b):
    av, an = _split(a)
    bv, bn = _split(b)
    out = Node(av * bv, _parents(an, bn))

    def back(g):
        if an is not None:
            _accum(an, _unbroadcast(g * bv, an.value.shape))
        if bn is not None:
            _accum(bn, _unbroadcast(g * av, bn.value.shape))

    out._backward = back
    return out


def div(a, b):
    av, an = _split(a)
    bv, bn = _split(b)
    out = Node(av / bv, _parents(an, bn))

    def back(g):
        if an is not None:
            _accum(an, _unbroadcast(g / bv, an.value.shape))
        if bn is not None:
            _accum(bn, _unbroadcast(-g * av / (bv * bv), bn.value.shape))

    out._backward = back
    return out


def neg(a):
    av, an = _split(a)
    out = Node(-av, _parents(an))

    def back(g):
        _accum(an, -g)

    out._backward = back
    return out


def pow_const(a, p):
    """a ** p for a constant exponent; caller keeps the base in-domain."""
    av, an = _split(a)
    p = float(p)
    out = Node(av ** p, _parents(an))

    def back(g):
        _accum(an, g * p * av ** (p - 1.0))

    out._backward = back
    return out


def abs_(a):
    av, an = _split(a)
    out = Node(np.abs(av), _parents(an))

    def back(g):
        _accum(an, g * np.sign(av))

    out._backward = back
    return out


def where(cond, a, b):
    """Elementwise select on a constant boolean mask."""
    cond = np.asarray(cond, dtype=bool)
    av, an = _split(a)
    bv, bn = _split(b)
    out = Node(np.where(cond, av, bv), _parents(an, bn))

    def back(g):
        if an is not None:
            _accum(an, _unbroadcast(np.where(cond, g, 0.0), an.value.shape))
        if bn is not None:
            _accum(bn, _unbroadcast(np.where(cond, 0.0, g), bn.value.shape))

    out._backward = back
    return out


# ------------------------------------------------------------- linear algebra

def matmul(a, b):
    av, an = _split(a)
    bv, bn = _split(b)
    if av.ndim < 2 or bv.ndim < 2:
        raise ValueError(f"matmul needs >=2-D operands, got {av.shape} @ {bv.shape}")
    if av.shape[-1] != bv.shape[-2]:
        raise ValueError(f"matmul inner dims differ: {av.shape} @ {bv.shape}")
    out = Node(av @ bv, _parents(an, bn))

    def back(g):
        if an is not None:
            _accum(an, _unbroadcast(g @ np.swapaxes(bv, -1, -2), an.value.shape))
        if bn is not None:
            if bv.ndim == 2 and g.ndim > 2:
                # batched x 2-D weight: fold batch into rows, one dgemm
                k = av.shape[-1]
                gb = av.reshape(-1, k).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.swapaxes(av, -1, -2) @ g, bn.value.shape)
            _accum(bn, gb)

    out._backward = back
    return out


# ------------------------------------------------------------------ reductions

def sum_(a, axis=None, keepdims=False):
    av, an = _split(a)
    out = Node(av.sum(axis=axis, keepdims=keepdims), _parents(an))

    def back(g):
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(g, axis)
        _accum(an, np.broadcast_to(gg, av.shape))

    out._backward = back
    return out


def mean(a, axis=None, keepdims=False):
    av, an = _split(a)
    out = Node(av.mean(axis=axis, keepdims=keepdims), _parents(an))
    count = av.size / out.value.size

    def back(g):
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(g, axis)
        _accum(an, np.broadcast_to(gg, av.shape) / count)

    out._backward = back
    return out


# ----------------------------------------------------------------- shape moves

def reshape(a, shape):
    av, an = _split(a)
    out = Node(av.reshape(shape), _parents(an))

    def back(g):
        _accum(an, g.reshape(av.shape))

    out._backward = back
    return out


def swapaxes(a, axis1, axis2):
    av, an = _split(a)
    out = Node(np.swapaxes(av, axis1, axis2).copy(), _parents(an))

    def back(g):
        _accum(an, np.swapaxes(g, axis1, axis2))

    out._backward = back
    return out


def take_range(a, start, stop, axis=0):
    """Contiguous slice [start:stop) along one axis."""
    av, an = _split(a)
    idx = [slice(None)] * av.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = Node(av[idx].copy(), _parents(an))

    def back(g):
        full = np.zeros_like(av)
        full[idx] = g
        _accum(an, full)

    out._backward = back
    return out


# ------------------------------------------------------------------ nonlinear

def softmax(a, axis=-1):
    av, an = _split(a)
    shifted = av - av.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Node(y, _parents(an))

    def back(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        _accum(an, y * (g - inner))

    out._backward = back
    return out


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a):
    """Exact gaussian-error gelu: x * Phi(x)."""
    av, an = _split(a)
    phi_cdf = 0.5 * (1.0 + erf(av * _INV_SQRT2))
    out = Node(av * phi_cdf, _parents(an))

    def back(g):
        pdf = np.exp(-0.5 * av * av) * _INV_SQRT2PI
        _accum(an, g * (phi_cdf + av * pdf))

    out._backward = back
    return out


def layer_norm(a, gain, bias, eps=1e-5):
    """Normalize the last axis to zero mean / unit variance, then scale+shift."""
    av, an = _split(a)
    gv, gn = _split(gain)
    bv, bn = _split(bias)
    mu = av.mean(axis=-1, keepdims=True)
    xc = av - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y0 = xc * inv
    out = Node(y0 * gv + bv, _parents(an, gn, bn))

    def back(g):
        if bn is not None:
            _accum(bn, _unbroadcast(g, bv.shape))
        if gn is not None:
            _accum(gn, _unbroadcast(g * y0, gv.shape))
        if an is not None:
            dy0 = g * gv
            m1 = dy0.mean(axis=-1, keepdims=True)
            m2 = (dy0 * y0).mean(axis=-1, keepdims=True)
            _accum(an, inv * (dy0 - m1 - y0 * m2))

    out._backward = back
    return out


# -------------------------------------------------------------- convolutions
# Internals run time-major ([B,T,C]) so every pass is a single dgemm over
# flattened rows plus at most a K-tap scatter with contiguous channel chunks.
# Shared kernels: forward im2col, the input-gradient scatter, the weight
# gradient. The transposed conv is the same three kernels in other roles.

def _conv_fwd_tc(x, w_mat, stride, padding, K):
    # x [B,T,C], w_mat [K*C, O] -> [B,T',O]
    B, T, C = x.shape
    xp = np.pad(x, ((0, 0), (padding, padding), (0, 0))) if padding else x
    win = sliding_window_view(xp, K, axis=1)[:, ::stride]  # [B,T',C,K]
    tout = win.shape[1]
    cols = win.transpose(0, 1, 3, 2).reshape(B * tout, K * C)
    return (cols @ w_mat).reshape(B, tout, -1)


def _conv_dx_tc(dy, w_mat, stride, padding, tlen, K):
    # dy [B,T',X], w_mat [K*Y, X] -> [B,tlen,Y]: one dgemm, K scatter taps
    B, tout, X = dy.shape
    Y = w_mat.shape[0] // K
    cols = (dy.reshape(B * tout, X) @ w_mat.T).reshape(B, tout, K, Y)
    buf = np.zeros((B, tlen + 2 * padding, Y))
    for k in range(K):
        buf[:, k:k + stride * tout:stride, :] += cols[:, :, k, :]
    return buf[:, padding:padding + tlen] if padding else buf


def _conv_dw_tc(dy, x, stride, padding, K):
    # dy [B,T',O], x [B,T,C] -> [K*C, O]
    B, tout, O = dy.shape
    xp = np.pad(x, ((0, 0), (padding, padding), (0, 0))) if padding else x
    win = sliding_window_view(xp, K, axis=1)[:, ::stride]
    cols = win.transpose(0, 1, 3, 2).reshape(B * tout, -1)
    return cols.T @ dy.reshape(B * tout, O)


def _promote_conv_x(x, layout):
    if x.ndim == 1:
        return x[None, :, None], 2
    if x.ndim == 2:
        # 2-D input is [C,T] in ct layout, [T,C] in tc
        return (x.T[None] if layout == "ct" else x[None]), 1
    if x.ndim == 3:
        return (x.transpose(0, 2, 1) if layout == "ct" else x), 0
    raise ValueError(f"conv input must be 1-D, 2-D, or 3-D, got shape {x.shape}")


def _restore_conv_y(y, dropped, layout, O):
    # y [B,T',O] -> caller's layout/rank
    B = y.shape[0]
    if dropped == 2 and O == 1:
        return y[0, :, 0]
    if layout == "ct":
        y = y.transpose(0, 2, 1)
    if dropped >= 1 and B == 1:
        return y[0].copy()
    return y.copy() if layout == "ct" else y


def _promote_conv_w(w):
    if w.ndim == 1:
        return w[None, None, :]
    if w.ndim == 3:
        return w
    raise ValueError(f"conv kernel must be 1-D or 3-D, got shape {w.shape}")


def conv1d(x, w, bias=None, stride=1, padding=0, layout="ct"):
    """Strided cross-correlation along time; output length
    (T + 2p - K)//stride + 1. Kernel is [C_out,C_in,K] (or [K]).
    layout "ct": x is [B,C,T] / [C,T] / [T]; layout "tc": [B,T,C].
    Optional bias [C_out] is added per output channel.
    """
    if layout not in ("ct", "tc"):
        raise ValueError(f"layout must be 'ct' or 'tc', got {layout!r}")
    xv, xn = _split(x)
    wv, wn = _split(w)
    bv, bn = _split(bias) if bias is not None else (None, None)
    xtc, dropped = _promote_conv_x(xv, layout)
    wv3 = _promote_conv_w(wv)
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if padding < 0:
        raise ValueError(f"padding must be >= 0, got {padding}")
    B, T, C = xtc.shape
    O, Cw, K = wv3.shape
    if C != Cw:
        raise ValueError(
            f"conv1d channel mismatch: input {xv.shape} has C_in={C}, "
            f"kernel {wv.shape} has C_in={Cw}")
    if K > T + 2 * padding:
        raise ValueError(
            f"conv1d kernel K={K} longer than padded input T+2p={T + 2 * padding}")
    w_mat = wv3.transpose(2, 1, 0).reshape(K * C, O)  # (k,c) rows
    y = _conv_fwd_tc(xtc, w_mat, stride, padding, K)
    if bv is not None:
        y = y + bv  # broadcasts over [B,T',O]
    y = _restore_conv_y(y, dropped, layout, O)
    # captured by shape, not by node: a closure referencing `out` would tie
    # the output into a reference cycle and keep whole step graphs alive
    out_shape = y.shape

    def back(g):
        gtc, _ = _promote_conv_x(g.reshape(out_shape), layout)
        if xn is not None:
            dx = _conv_dx_tc(gtc, w_mat, stride, padding, T, K)
            if layout == "ct" and dx.ndim == 3:
                dx = dx.transpose(0, 2, 1)
            _accum(xn, dx.reshape(xv.shape))
        if wn is not None:
            dwm = _conv_dw_tc(gtc, xtc, stride, padding, K)
            _accum(wn, dwm.reshape(K, C, O).transpose(2, 1, 0).reshape(wv.shape))
        if bn is not None:
            _accum(bn, _unbroadcast(gtc.sum(axis=(0, 1)), bv.shape))

    return Node(y, _parents(xn, wn, bn), back)


def conv_transpose1d(x, w, bias=None, stride=1, padding=0, output_padding=0,
                     layout="ct"):
    """Transposed conv (upsampling): kernel [C_in,C_out,K];
    output length (T-1)*stride - 2p + K + output_padding.
    layout "ct": x is [B,C,T] / [C,T] / [T]; layout "tc": [B,T,C].
    """
    if layout not in ("ct", "tc"):
        raise ValueError(f"layout must be 'ct' or 'tc', got {layout!r}")
    xv, xn = _split(x)
    wv, wn = _split(w)
    bv, bn = _split(bias) if bias is not None else (None, None)
    xtc, dropped = _promote_conv_x(xv, layout)
    wv3 = _promote_conv_w(wv)
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if not 0 <= output_padding < stride:
        raise ValueError(f"output_padding must be in [0, stride), got {output_padding}")
    B, T, C = xtc.shape
    Cw, O, K = wv3.shape
    if C != Cw:
        raise ValueError(
            f"conv_transpose1d channel mismatch: input {xv.shape} has C_in={C}, "
            f"kernel {wv.shape} has C_in={Cw}")
    tout = (T - 1) * stride - 2 * padding + K + output_padding
    if tout < 1:
        raise ValueError(
            f"conv_transpose1d output length {tout} < 1 for T={T}, K={K}, "
            f"stride={stride}, padding={padding}")
    w_mat = wv3.transpose(2, 1, 0).reshape(K * O, C)  # (k,o) rows
    y = _conv_dx_tc(xtc, w_mat, stride, padding, tout, K)
    if bv is not None:
        y = y + bv
    y = _restore_conv_y(y, dropped, layout, O)
    out_shape = y.shape  # shape only; holding the node itself makes a cycle

    def back(g):
        gtc, _ = _promote_conv_x(g.reshape(out_shape), layout)
        if xn is not None:
            dx = _conv_fwd_tc(gtc, w_mat, stride, padding, K)
            if layout == "ct" and dx.ndim == 3:
                dx = dx.transpose(0, 2, 1)
            _accum(xn, dx.reshape(xv.shape))
        if wn is not None:
            dwm = _conv_dw_tc(xtc, gtc, stride, padding, K)  # [K*O, C]
            _accum(wn, dwm.reshape(K, O, C).transpose(2, 1, 0).reshape(wv.shape))
        if bn is not None:
            _accum(bn, _unbroadcast(gtc.sum(axis=(0, 1)), bv.shape))

    return Node(y, _parents(xn, wn, bn), back)


# ------------------------------------------------------------ local attention
# Row tiles turn the banded score/mix computations into batched dgemms: for a
# tile of R rows, scores against the R+W-1 needed key rows are one matmul and
# the band is the W staircase diagonals of that tile. Keys/values are
# zero-padded by W//2 on both ends so every tile span is in range; the
# validity mask puts -inf on out-of-range offsets before the softmax.

_ATTN_TILE = 48


def _band_valid(T, window):
    half = window // 2
    t = np.arange(T)[:, None]
    o = np.arange(-half, half + 1)[None, :]
    return (t + o >= 0) & (t + o < T)


def _band_from_pairs(a, b_pad, window, out=None):
    # band[b,t,w] = a[b,t] . b_pad[b,t+w]  (b_pad is padded by W//2 each side)
    B, T, D = a.shape
    band = out if out is not None else np.empty((B, T, window))
    r_all = np.arange(_ATTN_TILE)[:, None]
    c_all = np.arange(window)[None, :]
    for t0 in range(0, T, _ATTN_TILE):
        t1 = min(t0 + _ATTN_TILE, T)
        R = t1 - t0
        span = b_pad[:, t0:t0 + R + window - 1]
        s = a[:, t0:t1] @ span.swapaxes(1, 2)  # [B,R,R+W-1]
        band[:, t0:t1, :] = s[:, r_all[:R], r_all[:R] + c_all]
    return band


def _band_mix(band, b_pad, window):
    # y[b,t] = sum_w band[b,t,w] * b_pad[b,t+w]
    B, T, _ = band.shape
    D = b_pad.shape[2]
    y = np.empty((B, T, D))
    r_all = np.arange(_ATTN_TILE)[:, None]
    c_all = np.arange(window)[None, :]
    for t0 in range(0, T, _ATTN_TILE):
        t1 = min(t0 + _ATTN_TILE, T)
        R = t1 - t0
        S = R + window - 1
        A = np.zeros((B, R, S))
        A[:, r_all[:R], r_all[:R] + c_all] = band[:, t0:t1]
        y[:, t0:t1] = A @ b_pad[:, t0:t0 + S]
    return y


def _band_mix_adjoint(band, a, T_pad, window):
    # out_pad[b,t+w] += sum over rows: band[b,t,w] * a[b,t]; adjoint of _band_mix
    B, T, _ = band.shape
    D = a.shape[2]
    out = np.zeros((B, T_pad, D))
    r_all = np.arange(_ATTN_TILE)[:, None]
    c_all = np.arange(window)[None, :]
    for t0 in range(0, T, _ATTN_TILE):
        t1 = min(t0 + _ATTN_TILE, T)
        R = t1 - t0
        S = R + window - 1
        A = np.zeros((B, R, S))
        A[:, r_all[:R], r_all[:R] + c_all] = band[:, t0:t1]
        out[:, t0:t0 + S] += A.swapaxes(1, 2) @ a[:, t0:t1]
    return out


def local_attention(q, k, v, window):
    """Scaled dot-product attention restricted to a centered window of odd
    width; out-of-range offsets at the edges are excluded from the softmax.
    q, k, v: [B,T,D] or [T,D].
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    qv, qn = _split(q)
    kv, kn = _split(k)
    vv, vn = _split(v)
    squeeze = qv.ndim == 2
    if squeeze:
        qv, kv, vv = qv[None], kv[None], vv[None]
    if not (qv.shape == kv.shape == vv.shape):
        raise ValueError(
            f"local_attention shape mismatch: q{qv.shape} k{kv.shape} v{vv.shape}")
    B, T, D = qv.shape
    half = window // 2
    scale = 1.0 / np.sqrt(D)
    pad = ((0, 0), (half, half), (0, 0))
    k_pad = np.pad(kv, pad)
    v_pad = np.pad(vv, pad)
    valid = _band_valid(T, window)
    scores = _band_from_pairs(qv, k_pad, window)
    scores *= scale
    scores[:, ~valid] = -np.inf
    # the zero offset is always in range, so the row max is finite
    m = scores.max(axis=2, keepdims=True)
    e = np.exp(scores - m)
    attn = e / e.sum(axis=2, keepdims=True)
    y = _band_mix(attn, v_pad, window)
    out = Node(y[0] if squeeze else y, _parents(qn, kn, vn))

    def back(g):
        g3 = g.reshape(B, T, D)
        da = _band_from_pairs(g3, v_pad, window)
        ds = attn * (da - (da * attn).sum(axis=2, keepdims=True))
        ds *= scale  # invalid entries have attn = 0, hence ds = 0
        if qn is not None:
            dq = _band_mix(ds, k_pad, window)
            _accum(qn, dq[0] if squeeze else dq)
        if kn is not None:
            dk = _band_mix_adjoint(ds, qv, T + 2 * half, window)[:, half:half + T]
            _accum(kn, dk[0] if squeeze else dk)
        if vn is not None:
            dv = _band_mix_adjoint(attn, g3, T + 2 * half, window)[:, half:half + T]
            _accum(vn, dv[0] if squeeze else dv)

    out._backward = back
    return out


# --------------------------------------------------------------- interpolation

def interpolate_linear(values, target_len):
    """Resample the last axis to target_len by linear interpolation at sample
    centers, clamping at the edges. target_len == T returns an exact copy.
    Used for masks and resized views; it is numpy-level (no gradient flows
    through resampled masks).
    """
    values = np.asarray(values, dtype=np.float64)
    T = values.shape[-1]
    if target_len < 1:
        raise ValueError(f"target_len must be >= 1, got {target_len}")
    if target_len == T:
        return values.copy()
    pos = (np.arange(target_len) + 0.5) * (T / target_len) - 0.5
    pos = np.clip(pos, 0.0, T - 1.0)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, T - 1)
    frac = pos - lo
    return (1.0 - frac) * values[..., lo] + frac * values[..., hi]


# ----------------------------------------------------------------------- adam

@dataclass
class AdamState:
    """First/second moment accumulators keyed by parameter name."""
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    @classmethod
    def init(cls, params):
        return cls(
            m={name: np.zeros_like(p.value) for name, p in params.items()},
            v={name: np.zeros_like(p.value) for name, p in params.items()},
            step=0,
        )


def adam_step(params, state, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, in place on each param Node's value.

    Raises on non-finite gradients rather than propagating them into moments.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = p.grad
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(
                f"non-finite gradient for parameter {name!r} at adam step {t}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.value -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def zero_grads(params):
    for p in params.values():
        p.grad = None


# ----------------------------------------------------------- gradient checking

@dataclass
class FdCheckResult:
    max_rel_err: float
    per_input: list
    worst_input: int
    worst_index: tuple

    def ok(self, tol):
        return self.max_rel_err < tol


def fd_check(f, inputs, eps=1e-5, floor=1e-3):
    """Compare reverse-mode gradients of sum(f(*inputs)) against central
    differences, elementwise. Relative error uses max(|ad|, |fd|, floor) as
    the denominator so near-zero gradients do not blow up the ratio.
    """
    inputs = [np.array(x, dtype=np.float64) for x in inputs]
    nodes = [Node(x.copy()) for x in inputs]
    out = f(*nodes)
    backward(out)
    ad = [n.grad.copy() if n.grad is not None else np.zeros_like(n.value) for n in nodes]

    def total(xs):
        return float(np.sum(f(*[Node(x) for x in xs]).value))

    per_input = []
    worst = (-1.0, 0, ())
    for i in range(len(inputs)):
        flat = inputs[i].reshape(-1)
        fd = np.zeros_like(flat)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            fp = total(inputs)
            flat[j] = orig - eps
            fm = total(inputs)
            flat[j] = orig
            fd[j] = (fp - fm) / (2.0 * eps)
        fd = fd.reshape(inputs[i].shape)
        denom = np.maximum(np.maximum(np.abs(ad[i]), np.abs(fd)), floor)
        rel = np.abs(ad[i] - fd) / denom
        per_input.append(float(rel.max()) if rel.size else 0.0)
        if rel.size and per_input[-1] > worst[0]:
            idx = np.unravel_index(int(rel.argmax()), rel.shape)
            worst = (per_input[-1], i, idx)
    return FdCheckResult(
        max_rel_err=max(per_input) if per_input else 0.0,
        per_input=per_input,
        worst_input=worst[1],
        worst_index=worst[2],
    )


def standard_gradient_battery(seed=0):
    """One fd_check per op on small random tensors; returns [(name, err)].

    Inputs are bounded away from the kinks of abs and from zero denominators;
    everything else in the op set is smooth.
    """
    from .rng import RngStream

    rng = RngStream(seed)

    def t(*shape, lo=-1.5, hi=1.5):
        return rng.uniform(lo, hi, shape)

    def away_from_zero(*shape, lo=0.2, hi=1.5):
        mag = rng.uniform(lo, hi, shape)
        sign = np.where(rng.uniform(size=shape) < 0.5, -1.0, 1.0)
        return mag * sign

    cond = rng.uniform(size=(3, 4)) < 0.5
    # constants drawn once so repeated evaluations see the same function
    c43 = t(4, 3)
    c34 = t(3, 4)
    c236 = t(2, 3, 6)
    cases = [
        ("add", lambda a, b: add(a, b), [t(3, 4), t(3, 4)]),
        ("add_broadcast", lambda a, b: add(a, b), [t(3, 4), t(4)]),
        ("sub", lambda a, b: sub(a, b), [t(3, 4), t(3, 4)]),
        ("mul", lambda a, b: mul(a, b), [t(3, 4), t(3, 4)]),
        ("div", lambda a, b: div(a, b), [t(3, 4), away_from_zero(3, 4)]),
        ("neg", lambda a: neg(a), [t(3, 4)]),
        ("pow_sq", lambda a: pow_const(a, 2.0), [t(3, 4)]),
        ("pow_sqrt", lambda a: pow_const(a, 0.5), [t(3, 4, lo=0.1, hi=2.0)]),
        ("abs", lambda a: abs_(a), [away_from_zero(3, 4)]),
        ("where", lambda a, b: where(cond, a, b), [t(3, 4), t(3, 4)]),
        ("matmul_2d", lambda a, b: matmul(a, b), [t(3, 4), t(4, 5)]),
        ("matmul_batched", lambda a, b: matmul(a, b), [t(2, 3, 4), t(4, 5)]),
        ("sum_all", lambda a: sum_(a), [t(3, 4)]),
        ("sum_axis", lambda a: mul(sum_(a, axis=1), 0.3), [t(3, 4)]),
        ("mean_axis", lambda a: mul(mean(a, axis=-1), 2.0), [t(2, 3, 4)]),
        ("reshape", lambda a: mul(reshape(a, (4, 3)), c43), [t(3, 4)]),
        ("swapaxes", lambda a: mul(swapaxes(a, 0, 1), c43), [t(3, 4)]),
        ("take_range", lambda a: mul(take_range(a, 1, 3, axis=1), 0.7), [t(3, 4)]),
        ("softmax", lambda a: mul(softmax(a, axis=-1), c34), [t(3, 4)]),
        ("gelu", lambda a: gelu(a), [t(3, 4, lo=-3.0, hi=3.0)]),
        ("layer_norm", lambda a, g, b: mul(layer_norm(a, g, b), c236),
         [t(2, 3, 6), t(6, lo=0.5, hi=1.5), t(6)]),
        ("conv1d_s1", lambda x, w: conv1d(x, w, stride=1, padding=1), [t(2, 3, 8), t(4, 3, 3)]),
        ("conv1d_s2", lambda x, w: conv1d(x, w, stride=2, padding=2), [t(2, 3, 10), t(4, 3, 5)]),
        ("conv_transpose1d", lambda x, w: conv_transpose1d(
            x, w, stride=2, padding=2, output_padding=1), [t(2, 4, 5), t(4, 3, 5)]),
        ("local_attention", lambda q, k, v: local_attention(q, k, v, 5),
         [t(2, 7, 3), t(2, 7, 3), t(2, 7, 3)]),
        ("local_attention_wide", lambda q, k, v: local_attention(q, k, v, 13),
         [t(1, 5, 3), t(1, 5, 3), t(1, 5, 3)]),
    ]
    results = []
    for name, fn, args in cases:
        res = fd_check(fn, args)
        results.append((name, res.max_rel_err))
    return results
