"""Dense tensors with a reverse-mode gradient tape.

Everything is float32 by default; operations preserve the input dtype so
the finite-difference checker can rerun a forward pass in float64.
Gradient accumulation follows a fixed reverse-topological order, so
repeated backward passes over the same graph are bit-identical.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "ContractError",
    "NumericsError",
    "no_grad",
    "tensor",
    "add",
    "sub",
    "mul",
    "matmul",
    "concat",
    "stack",
    "layer_norm",
    "masked_softmax",
    "silu",
    "embedding_lookup",
    "backward",
]


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


class ContractError(ValueError):
    """An API precondition was violated."""


class NumericsError(ArithmeticError):
    """Non-finite values encountered in a recorded computation."""


_grad_enabled = True


class no_grad:
    """Context manager that disables tape recording (planning / eval)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _as_array(x):
    if isinstance(x, np.ndarray):
        return x if x.dtype in (np.float32, np.float64) else x.astype(np.float32)
    if isinstance(x, (np.float32, np.float64)):
        return np.asarray(x)
    return np.asarray(x, dtype=np.float32)


class Tensor:
    __slots__ = ("data", "parents", "vjp", "requires_grad", "op", "name")

    def __init__(self, data, requires_grad=False, parents=(), vjp=None, op="leaf", name=None):
        self.data = _as_array(data)
        self.requires_grad = requires_grad
        self.parents = parents
        self.vjp = vjp
        self.op = op
        self.name = name

    # -- introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        tag = self.name or self.op
        return f"Tensor({tag}, shape={self.data.shape}, grad={self.requires_grad})"

    # -- arithmetic ----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def tanh(self):
        return tanh(self)

    def relu(self):
        return relu(self)

    def exp(self):
        return texp(self)

    def detach(self):
        """Stop-grad: same values, no tape history."""
        return Tensor(self.data, op="detach")


def tensor(data, name=None):
    """Wrap raw data as a constant (no gradient) tensor."""
    return Tensor(data, name=name)


def _ensure(x):
    return x if isinstance(x, Tensor) else Tensor(x, op="const")


def _tracked(parents):
    return _grad_enabled and any(p.requires_grad for p in parents)


def _make(data, parents, vjp, op):
    if _tracked(parents):
        return Tensor(data, requires_grad=True, parents=tuple(parents), vjp=vjp, op=op)
    return Tensor(data, op=op)


def _reduce_to(grad, shape):
    """Sum a broadcast gradient back down to the operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- elementwise -------------------------------------------------------

def add(a, b):
    a, b = _ensure(a), _ensure(b)
    out = a.data + b.data

    def vjp(g):
        return _reduce_to(g, a.data.shape), _reduce_to(g, b.data.shape)

    return _make(out, (a, b), vjp, "add")


def sub(a, b):
    a, b = _ensure(a), _ensure(b)
    out = a.data - b.data

    def vjp(g):
        return _reduce_to(g, a.data.shape), _reduce_to(-g, b.data.shape)

    return _make(out, (a, b), vjp, "sub")


def mul(a, b):
    a, b = _ensure(a), _ensure(b)
    out = a.data * b.data

    def vjp(g):
        return (_reduce_to(g * b.data, a.data.shape),
                _reduce_to(g * a.data, b.data.shape))

    return _make(out, (a, b), vjp, "mul")


def tanh(a):
    a = _ensure(a)
    out = np.tanh(a.data)

    def vjp(g):
        return (g * (1.0 - out * out),)

    return _make(out, (a,), vjp, "tanh")


def relu(a):
    a = _ensure(a)
    out = np.maximum(a.data, 0)

    def vjp(g):
        return (g * (a.data > 0),)

    return _make(out, (a,), vjp, "relu")


def silu(a):
    """x * sigmoid(x): smooth, so finite differences stay clean."""
    a = _ensure(a)
    sig = 1.0 / (1.0 + np.exp(-a.data))
    out = a.data * sig

    def vjp(g):
        return (g * (sig * (1.0 + a.data * (1.0 - sig))),)

    return _make(out, (a,), vjp, "silu")


def texp(a):
    a = _ensure(a)
    out = np.exp(a.data)

    def vjp(g):
        return (g * out,)

    return _make(out, (a,), vjp, "exp")


# -- shape manipulation ------------------------------------------------

def reshape(a, shape):
    a = _ensure(a)
    out = a.data.reshape(shape)

    def vjp(g):
        return (g.reshape(a.data.shape),)

    return _make(out, (a,), vjp, "reshape")


def swapaxes(a, i, j):
    a = _ensure(a)
    out = np.swapaxes(a.data, i, j)

    def vjp(g):
        return (np.swapaxes(g, i, j),)

    return _make(out, (a,), vjp, "swapaxes")


def take(a, key):
    """Basic (slice/index) selection."""
    a = _ensure(a)
    out = a.data[key]

    def vjp(g):
        full = np.zeros_like(a.data)
        full[key] += g
        return (full,)

    return _make(out, (a,), vjp, "take")


def concat(tensors, axis):
    tensors = [_ensure(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _make(out, tuple(tensors), vjp, "concat")


def stack(tensors, axis):
    tensors = [_ensure(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)

    def vjp(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _make(out, tuple(tensors), vjp, "stack")


# -- reductions --------------------------------------------------------

def tsum(a, axis=None, keepdims=False):
    a = _ensure(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape),)
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.data.shape),)

    return _make(out, (a,), vjp, "sum")


def tmean(a, axis=None, keepdims=False):
    a = _ensure(a)
    if axis is None:
        n = a.data.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        n = 1
        for ax in axes:
            n *= a.data.shape[ax]
    return mul(tsum(a, axis, keepdims), 1.0 / n)


# -- fused network primitives ------------------------------------------

def matmul(a, b):
    a, b = _ensure(a), _ensure(b)
    if a.data.ndim < 2 or b.data.ndim < 2 or a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def vjp(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        if b.data.ndim == 2 and a.data.ndim > 2:
            # shared weight: one flat GEMM instead of a batched product
            # followed by a reduction over the batch axes
            k = b.data.shape[1]
            gb = a.data.reshape(-1, a.data.shape[-1]).T @ g.reshape(-1, k)
        else:
            gb = _reduce_to(np.swapaxes(a.data, -1, -2) @ g, b.data.shape)
        return _reduce_to(ga, a.data.shape), gb

    return _make(out, (a, b), vjp, "matmul")


def layer_norm(x, gain, bias, eps=1e-5):
    """Normalize the last axis, then scale and shift."""
    x, gain, bias = _ensure(x), _ensure(gain), _ensure(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def vjp(g):
        dgain = _reduce_to(g * xhat, gain.data.shape)
        dbias = _reduce_to(g, bias.data.shape)
        dxhat = g * gain.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dx = inv * (dxhat - m1 - xhat * m2)
        return dx, dgain, dbias

    return _make(out, (x, gain, bias), vjp, "layer_norm")


def masked_softmax(logits, blocked=None):
    """Softmax over the last axis; ``blocked`` entries act as -inf logits.

    A row with every entry blocked yields all-zero weights rather than an
    error, which downstream attention turns into a zero output row.
    """
    logits = _ensure(logits)
    x = logits.data
    if blocked is None:
        m = x.max(axis=-1, keepdims=True)
        e = np.exp(x - m)
        s = e.sum(axis=-1, keepdims=True)
        out = e / s
    else:
        blk = np.broadcast_to(blocked, x.shape)
        keep = ~blk
        m = np.max(np.where(keep, x, -np.inf), axis=-1, keepdims=True)
        m = np.where(np.isfinite(m), m, 0.0).astype(x.dtype)
        e = np.where(keep, np.exp(x - m), 0.0).astype(x.dtype)
        s = e.sum(axis=-1, keepdims=True)
        out = np.divide(e, np.where(s > 0, s, 1.0), dtype=x.dtype)

    def vjp(g):
        inner = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - inner),)

    return _make(out, (logits,), vjp, "masked_softmax")


def embedding_lookup(table, idx):
    """Row lookup ``table[idx]`` with scatter-add gradients."""
    table = _ensure(table)
    idx = np.asarray(idx)
    out = table.data[idx]

    def vjp(g):
        full = np.zeros_like(table.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make(out, (table,), vjp, "embedding")


# -- reverse pass ------------------------------------------------------

def _toposort(root):
    order, seen, stacked = [], set(), [(root, False)]
    while stacked:
        node, expanded = stacked.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stacked.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stacked.append((p, False))
    return order


def _first_bad_node(root):
    for node in _toposort(root):
        if not np.isfinite(node.data).all():
            return node.name or node.op
    return root.name or root.op


def backward(loss, store=None):
    """Reverse-mode gradients of a recorded scalar loss.

    Returns ``{param_name: grad}`` covering exactly the unfrozen
    parameters of ``store`` (zeros for parameters the loss does not
    touch). Without a store, returns gradients keyed by tensor id for
    every reachable leaf that requires grad.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.data.shape}")
    if not np.isfinite(loss.data).all():
        raise NumericsError(f"non-finite forward value at node '{_first_bad_node(loss)}'")

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_toposort(loss)):
        g = grads.get(id(node))
        if g is None or node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            pid = id(parent)
            if pid in grads:
                grads[pid] = grads[pid] + pg
            else:
                grads[pid] = pg
        del grads[id(node)]

    if store is None:
        return grads
    out = {}
    for name in store.unfrozen_names():
        t = store[name]
        g = grads.get(id(t))
        out[name] = np.zeros_like(t.data) if g is None else np.ascontiguousarray(g)
    return out
