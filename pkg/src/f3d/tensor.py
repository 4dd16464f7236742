"""Dense float tensors with reverse-mode automatic differentiation.

Values are numpy arrays (float32 by default, float64 in shadow mode for
gradient checking). Differentiation is define-by-run: while a Tape is
active, every op appends a node holding its parents and a backward
closure; append order is topological order, so backward() is a single
reverse sweep with no recursion.

Broadcasting is restricted to leading batch dims: two operands must have
equal shapes, or one operand's shape must be a suffix of the other's
(e.g. bias (d,) against activations (B, n, d)). Anything else needs an
explicit reshape.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

FLOAT = np.float32
_SQRT2 = float(np.sqrt(2.0))
_INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))


class ShapeError(ValueError):
    pass


class Node:
    """One tape entry: parents and the local vector-Jacobian product."""

    __slots__ = ("op", "parents", "backward_fn", "grad", "index")

    def __init__(self, op, parents, backward_fn, index=None):
        self.op = op
        self.parents = parents          # tuple of Node-or-None, aligned with inputs
        self.backward_fn = backward_fn  # grad_out -> tuple of grads (or None) per parent
        self.grad = None
        self.index = index              # position in the tape; None for leaves


class Tensor:
    __slots__ = ("data", "node")

    def __init__(self, data, node=None):
        if not isinstance(data, np.ndarray):
            data = np.asarray(data, dtype=FLOAT)
        if data.dtype not in (np.float32, np.float64):
            data = data.astype(FLOAT)
        self.data = data
        self.node = node

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def grad(self):
        return self.node.grad if self.node is not None else None

    def item(self):
        return float(self.data)

    def __repr__(self):
        tag = "leaf" if (self.node is not None and self.node.index is None) else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}{', ' + tag if tag else ''})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)


class Tape:
    """Append-only op record; rebuilt every training step."""

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        global _TAPE
        if _TAPE is not None:
            raise RuntimeError("a tape is already active (tapes are single-threaded and non-nested)")
        _TAPE = self
        return self

    def __exit__(self, *exc):
        global _TAPE
        _TAPE = None
        return False

    def append(self, node):
        node.index = len(self.nodes)
        self.nodes.append(node)

    def backward(self, loss, params=None):
        """Accumulate d(loss)/d(x) into every reachable node's .grad.

        `loss` must be a scalar recorded on this tape. Parameters passed in
        `params` that the loss never touched get an explicit zero gradient so
        optimizers can step uniformly.
        """
        if loss.node is None or loss.node.index is None:
            raise ValueError("backward: loss is not recorded on the active tape")
        if loss.size != 1:
            raise ValueError(f"backward: loss must be scalar, got shape {loss.shape}")
        loss.node.grad = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            g = node.grad
            if g is None or node.backward_fn is None:
                continue
            for parent, pg in zip(node.parents, node.backward_fn(g)):
                if parent is None or pg is None:
                    continue
                if parent.grad is None:
                    parent.grad = pg
                else:
                    parent.grad = parent.grad + pg
        if params is not None:
            for p in params:
                if p.node is not None and p.node.grad is None:
                    p.node.grad = np.zeros_like(p.data)


_TAPE: Tape | None = None


def param(data, dtype=FLOAT):
    """Leaf tensor that collects gradients across tapes (a trainable weight)."""
    arr = np.asarray(data, dtype=dtype)
    return Tensor(arr, node=Node("leaf", (), None))


def constant(data, dtype=FLOAT):
    return Tensor(np.asarray(data, dtype=dtype))


def zero_grads(params):
    for p in params:
        if p.node is not None:
            p.node.grad = None


def as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else FLOAT
    return Tensor(np.asarray(x, dtype=dtype))


def _record(op, out_data, inputs, backward_fn):
    """Append a node if a tape is active and any input is differentiable."""
    out = Tensor(out_data)
    if _TAPE is None:
        return out
    parents = tuple(t.node if isinstance(t, Tensor) else None for t in inputs)
    if all(p is None for p in parents):
        return out
    node = Node(op, parents, backward_fn)
    _TAPE.append(node)
    out.node = node
    return out


def _check_broadcast(a_shape, b_shape, op):
    """Equal shapes, or one shape is a suffix of the other (leading-batch only)."""
    if a_shape == b_shape:
        return
    small, big = (a_shape, b_shape) if len(a_shape) < len(b_shape) else (b_shape, a_shape)
    if len(small) == len(big) or (len(small) > 0 and big[len(big) - len(small):] != small):
        raise ShapeError(f"{op}: shapes {a_shape} and {b_shape} are not leading-batch broadcastable")


def _reduce_to(grad, shape):
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    return grad.sum(axis=tuple(range(extra)))


def _same_dtype(a, b, op):
    if a.data.dtype != b.data.dtype:
        raise TypeError(f"{op}: mixed dtypes {a.data.dtype} vs {b.data.dtype} (shadow mode mixes?)")


# ---------------------------------------------------------------------------
# elementwise

def add(a, b):
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    _same_dtype(a, b, "add")
    _check_broadcast(a.shape, b.shape, "add")
    out = a.data + b.data

    def backward(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return _record("add", out, (a, b), backward)


def sub(a, b):
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    _same_dtype(a, b, "sub")
    _check_broadcast(a.shape, b.shape, "sub")
    out = a.data - b.data

    def backward(g):
        return _reduce_to(g, a.shape), -_reduce_to(g, b.shape)

    return _record("sub", out, (a, b), backward)


def mul(a, b):
    if isinstance(b, (int, float)):
        return scale(a, float(b))
    if isinstance(a, (int, float)):
        return scale(b, float(a))
    _same_dtype(a, b, "mul")
    _check_broadcast(a.shape, b.shape, "mul")
    out = a.data * b.data
    ad, bd = a.data, b.data

    def backward(g):
        return _reduce_to(g * bd, a.shape), _reduce_to(g * ad, b.shape)

    return _record("mul", out, (a, b), backward)


def scale(a, s, shift=0.0):
    """a * s + shift with python scalars."""
    a = as_tensor(a)
    s = float(s)
    shift = float(shift)
    out = a.data * s if shift == 0.0 else a.data * s + shift

    def backward(g):
        return (g * s,)

    return _record("scale", out, (a,), backward)


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)

    def backward(g):
        return (g * out,)

    return _record("exp", out, (a,), backward)


def gelu(a):
    """Exact erf-based GELU."""
    a = as_tensor(a)
    x = a.data
    phi = 0.5 * (1.0 + erf(x / _SQRT2))
    out = x * phi

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        return (g * (phi + x * pdf),)

    return _record("gelu", out, (a,), backward)


def sigmoid(a):
    a = as_tensor(a)
    out = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        return (g * out * (1.0 - out),)

    return _record("sigmoid", out, (a,), backward)


def dropout(a, p, rng):
    """Inverted dropout; identity when p == 0."""
    if p <= 0.0:
        return a
    keep = (rng.random(a.shape) >= p).astype(a.data.dtype) / (1.0 - p)
    out = a.data * keep

    def backward(g):
        return (g * keep,)

    return _record("dropout", out, (a,), backward)


# ---------------------------------------------------------------------------
# linear algebra

def matmul(a, b):
    """Matrix product with leading-batch broadcasting on either side."""
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2:
        raise ShapeError(f"matmul: operands must be at least 2-D, got {ad.shape} and {bd.shape}")
    if ad.shape[-1] != bd.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ for shapes {ad.shape} and {bd.shape}")
    _same_dtype(a, b, "matmul")
    if ad.ndim != bd.ndim:
        _check_broadcast(ad.shape[:-2], bd.shape[:-2], "matmul batch dims")
    elif ad.shape[:-2] != bd.shape[:-2]:
        raise ShapeError(f"matmul: batch dims differ for shapes {ad.shape} and {bd.shape}")
    out = np.matmul(ad, bd)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(bd, -1, -2))
        gb = np.matmul(np.swapaxes(ad, -1, -2), g)
        if ga.shape != ad.shape:
            ga = ga.sum(axis=tuple(range(ga.ndim - ad.ndim)))
        if gb.shape != bd.shape:
            gb = gb.sum(axis=tuple(range(gb.ndim - bd.ndim)))
        return ga, gb

    return _record("matmul", out, (a, b), backward)


def linear(x, w, b=None):
    """x @ w + b, fused into one node. w: (k, n), b: (n,)."""
    x = as_tensor(x, like=w)
    xd, wd = x.data, w.data
    if xd.shape[-1] != wd.shape[0]:
        raise ShapeError(f"linear: input dim {xd.shape} does not match weight {wd.shape}")
    out = np.matmul(xd, wd)
    if b is not None:
        out = out + b.data
    inputs = (x, w) if b is None else (x, w, b)

    def backward(g):
        gx = np.matmul(g, wd.T)
        g2 = g.reshape(-1, g.shape[-1])
        gw = np.matmul(xd.reshape(-1, xd.shape[-1]).T, g2)
        if b is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    return _record("linear", out, inputs, backward)


# ---------------------------------------------------------------------------
# shape surgery

def reshape(a, shape):
    a = as_tensor(a)
    out = a.data.reshape(shape)
    orig = a.data.shape

    def backward(g):
        return (g.reshape(orig),)

    return _record("reshape", out, (a,), backward)


def transpose(a, axes):
    a = as_tensor(a)
    axes = tuple(axes)
    out = a.data.transpose(axes)
    inv = tuple(np.argsort(axes))

    def backward(g):
        return (g.transpose(inv),)

    return _record("transpose", out, (a,), backward)


def concat(tensors, axis):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        pieces = []
        for i in range(len(sizes)):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offsets[i], offsets[i + 1])
            pieces.append(g[tuple(sl)])
        return tuple(pieces)

    return _record("concat", out, tuple(tensors), backward)


def take(a, indices, axis):
    """Gather rows along an axis with 1-D indices (embedding lookup, token selection)."""
    a = as_tensor(a)
    idx = np.asarray(indices)
    if idx.ndim != 1:
        raise ShapeError(f"take: indices must be 1-D, got shape {idx.shape}")
    out = np.take(a.data, idx, axis=axis)
    in_shape = a.data.shape

    def backward(g):
        ga = np.zeros(in_shape, dtype=g.dtype)
        np.add.at(np.moveaxis(ga, axis, 0), idx, np.moveaxis(g, axis, 0))
        return (ga,)

    return _record("take", out, (a,), backward)


def slice_axis(a, axis, start, stop):
    a = as_tensor(a)
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(start, stop)
    sl = tuple(sl)
    out = a.data[sl]
    in_shape = a.data.shape

    def backward(g):
        ga = np.zeros(in_shape, dtype=g.dtype)
        ga[sl] = g
        return (ga,)

    return _record("slice", out, (a,), backward)


# ---------------------------------------------------------------------------
# reductions and normalizers

def sum_all(a):
    a = as_tensor(a)
    out = np.asarray(a.data.sum(), dtype=a.data.dtype)
    shape = a.data.shape

    def backward(g):
        return (np.broadcast_to(g, shape).copy(),)

    return _record("sum", out, (a,), backward)


def mean_all(a):
    a = as_tensor(a)
    n = a.data.size
    out = np.asarray(a.data.mean(), dtype=a.data.dtype)
    shape = a.data.shape

    def backward(g):
        return (np.broadcast_to(g / n, shape).copy(),)

    return _record("mean", out, (a,), backward)


def layernorm(x, gain, bias, eps=1e-5):
    """Normalize the last axis, then scale and shift."""
    x = as_tensor(x, like=gain)
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data
    n = xd.shape[-1]
    gd = gain.data

    def backward(g):
        gxhat = g * gd
        s1 = gxhat.sum(axis=-1, keepdims=True)
        s2 = (gxhat * xhat).sum(axis=-1, keepdims=True)
        gx = (gxhat - s1 / n - xhat * s2 / n) * inv
        axes = tuple(range(g.ndim - 1))
        return gx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    return _record("layernorm", out, (x, gain, bias), backward)


def softmax_rows(x, mask=None):
    """Row softmax over the last axis with an optional boolean visibility mask.

    Masked-out entries are exactly zero in the output. A row with no visible
    entries is a layout bug and raises.
    """
    x = as_tensor(x)
    xd = x.data
    if mask is not None:
        m = mask.data if isinstance(mask, Tensor) else np.asarray(mask)
        if m.dtype != np.bool_:
            m = m.astype(bool)
        _check_broadcast(m.shape, xd.shape, "softmax_rows mask")
        if not m.any(axis=-1).all():
            raise ValueError("softmax_rows: a row is fully masked (no visible keys)")
        neg = np.where(m, xd, -np.inf)
        z = neg - neg.max(axis=-1, keepdims=True)
        e = np.exp(z)  # exp(-inf) is exactly 0, so masked entries stay 0
    else:
        z = xd - xd.max(axis=-1, keepdims=True)
        e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _record("softmax", out, (x,), backward)


# ---------------------------------------------------------------------------
# losses (all mean-reduced so weights are resolution independent)

def mse(pred, target):
    t = as_tensor(target, like=pred)
    if pred.shape != t.shape:
        raise ShapeError(f"mse: shapes differ {pred.shape} vs {t.shape}")
    r = pred.data - t.data
    n = r.size
    out = np.asarray((r * r).mean(), dtype=pred.data.dtype)

    def backward(g):
        gr = (2.0 / n) * r * g
        return gr, -gr

    return _record("mse", out, (pred, t), backward)


def smooth_l1(pred, target, beta=1.0):
    """Huber-style smooth L1, mean over all entries, transition at `beta`."""
    t = as_tensor(target, like=pred)
    if pred.shape != t.shape:
        raise ShapeError(f"smooth_l1: shapes differ {pred.shape} vs {t.shape}")
    r = pred.data - t.data
    ar = np.abs(r)
    n = r.size
    vals = np.where(ar < beta, 0.5 * r * r / beta, ar - 0.5 * beta)
    out = np.asarray(vals.mean(), dtype=pred.data.dtype)

    def backward(g):
        gr = np.clip(r / beta, -1.0, 1.0) / n * g
        return gr, -gr

    return _record("smooth_l1", out, (pred, t), backward)


def bce_logits(logits, target, clamp=15.0):
    """Binary cross entropy on logits, clamped at |logit| <= clamp for stability."""
    t = as_tensor(target, like=logits)
    if logits.shape != t.shape:
        raise ShapeError(f"bce_logits: shapes differ {logits.shape} vs {t.shape}")
    td = t.data
    if not np.all((td == 0.0) | (td == 1.0)):
        raise ValueError("bce_logits: targets must be exactly 0 or 1")
    l = np.clip(logits.data, -clamp, clamp)
    inside = np.abs(logits.data) < clamp
    n = l.size
    # stable softplus(l) - l*t
    vals = np.maximum(l, 0.0) + np.log1p(np.exp(-np.abs(l))) - l * td
    out = np.asarray(vals.mean(), dtype=logits.data.dtype)

    def backward(g):
        p = 1.0 / (1.0 + np.exp(-l))
        return ((p - td) * inside / n * g, None)

    return _record("bce_logits", out, (logits, t), backward)


def kl_normal(mean, logvar):
    """KL(N(mean, exp(logvar)) || N(0, 1)): sum over latent dim, mean over batch."""
    md, lv = mean.data, logvar.data
    b = md.shape[0] if md.ndim > 1 else 1
    vals = -0.5 * (1.0 + lv - md * md - np.exp(lv))
    out = np.asarray(vals.sum() / b, dtype=md.dtype)

    def backward(g):
        return (md / b * g, -0.5 * (1.0 - np.exp(lv)) / b * g)

    return _record("kl_normal", out, (mean, logvar), backward)
