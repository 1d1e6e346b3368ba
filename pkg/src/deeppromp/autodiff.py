"""Small tape-based reverse-mode differentiation over numpy arrays.

Every :class:`Tensor` records the operation that produced it and a closure
that maps the output gradient to parent gradients. ``backward`` walks the
graph in reverse topological order. Only the handful of operations needed by
the movement-primitive models are provided; elementwise ops follow numpy
broadcasting and gradients are summed back to the operand shapes.
"""

from __future__ import annotations

import numpy as np


class NonFiniteError(FloatingPointError):
    """Raised when a loss (or an intermediate node) is NaN or infinite."""


class Tensor:
    __slots__ = ("value", "grad", "parents", "backward_fn", "op")
    # keep numpy from broadcasting over Tensor objects in mixed expressions
    __array_ufunc__ = None

    def __init__(self, value, parents=(), backward_fn=None, op="leaf"):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.value.shape})"

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

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __pow__(self, p):
        if p != 2:
            raise NotImplementedError("only squaring is supported")
        return square(self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)

    def backward(self, seed=None):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every reachable node."""
        order = _topo_order(self)
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.value) if seed is None else np.asarray(seed, float)
        for node in reversed(order):
            if node.backward_fn is None or node.grad is None:
                continue
            parent_grads = node.backward_fn(node.grad)
            for parent, g in zip(node.parents, parent_grads):
                if not isinstance(parent, Tensor) or g is None:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g


def _topo_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if isinstance(p, Tensor) and id(p) not in seen:
                stack.append((p, False))
    return order


def first_non_finite(root):
    """Return ``(index, node)`` of the earliest non-finite node feeding ``root``."""
    for i, node in enumerate(_topo_order(root)):
        if not np.all(np.isfinite(node.value)):
            return i, node
    return None


def value_of(x):
    return x.value if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _is_tensor(*xs):
    return any(isinstance(x, Tensor) for x in xs)


def add(a, b):
    if not _is_tensor(a, b):
        return value_of(a) + value_of(b)
    av, bv = value_of(a), value_of(b)
    return Tensor(av + bv, (a, b),
                  lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)), "add")


def sub(a, b):
    if not _is_tensor(a, b):
        return value_of(a) - value_of(b)
    av, bv = value_of(a), value_of(b)
    return Tensor(av - bv, (a, b),
                  lambda g: (_unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)), "sub")


def mul(a, b):
    if not _is_tensor(a, b):
        return value_of(a) * value_of(b)
    av, bv = value_of(a), value_of(b)
    return Tensor(av * bv, (a, b),
                  lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)), "mul")


def div(a, b):
    if not _is_tensor(a, b):
        return value_of(a) / value_of(b)
    av, bv = value_of(a), value_of(b)
    out = av / bv
    return Tensor(out, (a, b),
                  lambda g: (_unbroadcast(g / bv, av.shape),
                             _unbroadcast(-g * out / bv, bv.shape)), "div")


def matmul(a, b):
    if not _is_tensor(a, b):
        return value_of(a) @ value_of(b)
    av, bv = value_of(a), value_of(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise ValueError("matmul supports 2-D operands only")
    if av.shape[1] != bv.shape[0]:
        raise ValueError(f"matmul shape mismatch {av.shape} @ {bv.shape}")
    return Tensor(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g), "matmul")


def square(a):
    if not isinstance(a, Tensor):
        return value_of(a) ** 2
    av = a.value
    return Tensor(av * av, (a,), lambda g: (2.0 * av * g,), "square")


def sqrt(a):
    if not isinstance(a, Tensor):
        return np.sqrt(value_of(a))
    out = np.sqrt(a.value)
    return Tensor(out, (a,), lambda g: (0.5 * g / out,), "sqrt")


def exp(a):
    if not isinstance(a, Tensor):
        return np.exp(value_of(a))
    out = np.exp(a.value)
    return Tensor(out, (a,), lambda g: (g * out,), "exp")


def log(a):
    if not isinstance(a, Tensor):
        return np.log(value_of(a))
    av = a.value
    return Tensor(np.log(av), (a,), lambda g: (g / av,), "log")


def relu(a):
    """ReLU with derivative 0 at exactly 0."""
    if not isinstance(a, Tensor):
        return np.maximum(value_of(a), 0.0)
    av = a.value
    mask = av > 0.0
    return Tensor(np.where(mask, av, 0.0), (a,), lambda g: (g * mask,), "relu")


def softplus(a):
    av = value_of(a)
    out = np.logaddexp(0.0, av)
    if not isinstance(a, Tensor):
        return out
    sig = 0.5 * (1.0 + np.tanh(0.5 * av))
    return Tensor(out, (a,), lambda g: (g * sig,), "softplus")


def maximum(a, floor):
    """Elementwise ``max(a, floor)`` for a scalar floor; gradient passes where a > floor."""
    if not isinstance(a, Tensor):
        return np.maximum(value_of(a), floor)
    av = a.value
    mask = av > floor
    return Tensor(np.where(mask, av, floor), (a,), lambda g: (g * mask,), "maximum")


def clip(a, lo, hi):
    if not isinstance(a, Tensor):
        return np.clip(value_of(a), lo, hi)
    av = a.value
    mask = (av >= lo) & (av <= hi)
    return Tensor(np.clip(av, lo, hi), (a,), lambda g: (g * mask,), "clip")


def tsum(a, axis=None, keepdims=False):
    if not isinstance(a, Tensor):
        return np.sum(value_of(a), axis=axis, keepdims=keepdims)
    shape = a.value.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return Tensor(np.sum(a.value, axis=axis, keepdims=keepdims), (a,), back, "sum")


def mean(a, axis=None, keepdims=False):
    n = value_of(a).size if axis is None else value_of(a).shape[axis]
    return tsum(a, axis=axis, keepdims=keepdims) / float(n)


def reshape(a, shape):
    if not isinstance(a, Tensor):
        return np.reshape(value_of(a), shape)
    old = a.value.shape
    return Tensor(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


def getitem(a, idx):
    if not isinstance(a, Tensor):
        return np.asarray(a)[idx]
    av = a.value

    parts = idx if isinstance(idx, tuple) else (idx,)
    fancy = any(not isinstance(p, (slice, int, type(None), type(Ellipsis))) for p in parts)

    def back(g):
        out = np.zeros_like(av)
        if fancy:
            np.add.at(out, idx, g)
        else:
            out[idx] = g
        return (out,)

    return Tensor(av[idx], (a,), back, "getitem")


def concat(items, axis=-1):
    if not _is_tensor(*items):
        return np.concatenate([value_of(x) for x in items], axis=axis)
    vals = [value_of(x) for x in items]
    sizes = np.cumsum([v.shape[axis] for v in vals])[:-1]

    def back(g):
        return tuple(np.split(g, sizes, axis=axis))

    return Tensor(np.concatenate(vals, axis=axis), tuple(items), back, "concat")


def grad(loss_fn, params):
    """Evaluate ``loss_fn`` on leaf copies of ``params`` and differentiate.

    ``params`` is a list of arrays; ``loss_fn`` receives a list of Tensors in
    the same order and must return a scalar Tensor. Returns
    ``(loss_value, [gradient arrays])``. Parameters the loss does not touch
    get zero gradients.
    """
    leaves = [Tensor(p) for p in params]
    loss = loss_fn(leaves)
    if not isinstance(loss, Tensor):
        raise TypeError("loss_fn must return a Tensor built from its arguments")
    if loss.value.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.value.shape}")
    if not np.isfinite(loss.value).all():
        hit = first_non_finite(loss)
        where = f"node #{hit[0]} (op={hit[1].op}, shape={hit[1].value.shape})" if hit else "loss"
        raise NonFiniteError(f"non-finite loss; first non-finite value at {where}")
    loss.backward()
    grads = [np.zeros_like(leaf.value) if leaf.grad is None else leaf.grad for leaf in leaves]
    return float(loss.value), grads
