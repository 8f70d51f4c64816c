"""Minimal reverse-mode automatic differentiation over numpy arrays.

The energy pipeline only needs a small, auditable op set: elementwise
arithmetic, a few transcendentals, reductions, indexing/stacking, and two
contraction primitives.  Every op records a value and per-parent vjp
closures; `backward` runs one reverse topological pass from a scalar root.

Module-level helpers (`exp`, `sqrt`, ...) dispatch on type so the same
formula code can run on plain ndarrays (reporting paths) or on `Var`
(gradient paths) without duplication.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Var", "backward", "exp", "log", "sqrt", "tanh", "arctan", "where",
    "maximum", "vsum", "matmul", "stack", "expand_dims", "unit_contract",
    "sigmoid", "is_var", "value_of",
]


def is_var(x) -> bool:
    return isinstance(x, Var)


def value_of(x):
    return x.value if isinstance(x, Var) else x


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to the shape of the broadcast operand."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Var:
    """A node in the tape: an ndarray value plus vjp links to its parents."""

    __slots__ = ("value", "grad", "_parents")

    # make ndarray <op> Var defer to the reflected Var methods
    __array_ufunc__ = None

    def __init__(self, value, _parents=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = _parents

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Var(shape={self.value.shape})"

    # -- elementwise arithmetic ------------------------------------------

    def __add__(self, other):
        a, b = self, _lift(other)
        out = Var(a.value + b.value, _parents=(
            (a, lambda g: _unbroadcast(g, a.value.shape)),
            (b, lambda g: _unbroadcast(g, b.value.shape)),
        ))
        return out

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) + (-self)

    def __neg__(self):
        return Var(-self.value, _parents=((self, lambda g: -g),))

    def __mul__(self, other):
        a, b = self, _lift(other)
        out = Var(a.value * b.value, _parents=(
            (a, lambda g: _unbroadcast(g * b.value, a.value.shape)),
            (b, lambda g: _unbroadcast(g * a.value, b.value.shape)),
        ))
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self, _lift(other)
        out = Var(a.value / b.value, _parents=(
            (a, lambda g: _unbroadcast(g / b.value, a.value.shape)),
            (b, lambda g: _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape)),
        ))
        return out

    def __rtruediv__(self, other):
        return _lift(other) / self

    def __pow__(self, p):
        if not np.isscalar(p):
            raise TypeError("only scalar exponents are supported")
        x = self
        out = Var(x.value ** p, _parents=(
            (x, lambda g: g * (p * x.value ** (p - 1.0))),
        ))
        return out

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    # -- shape ops --------------------------------------------------------

    def __getitem__(self, idx):
        x = self
        out_val = x.value[idx]

        def vjp(g):
            full = np.zeros_like(x.value)
            np.add.at(full, idx, g)
            return full

        return Var(out_val, _parents=((x, vjp),))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        x = self
        return Var(x.value.reshape(shape),
                   _parents=((x, lambda g: g.reshape(x.value.shape)),))

    def transpose(self, *axes):
        x = self
        if not axes:
            axes = tuple(reversed(range(x.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = np.argsort(axes)
        return Var(x.value.transpose(axes),
                   _parents=((x, lambda g: g.transpose(inv)),))

    @property
    def T(self):
        return self.transpose()

    def sum(self, axis=None, keepdims=False):
        x = self
        out_val = x.value.sum(axis=axis, keepdims=keepdims)

        def vjp(g):
            g = np.asarray(g)
            if axis is None:
                return np.broadcast_to(g, x.value.shape).copy()
            if not keepdims:
                g = np.expand_dims(g, axis)
            return np.broadcast_to(g, x.value.shape).copy()

        return Var(out_val, _parents=((x, vjp),))


def _lift(x):
    return x if isinstance(x, Var) else Var(np.asarray(x, dtype=np.float64))


# -- transcendentals ------------------------------------------------------

def _unary(x, fval, dfn):
    if not isinstance(x, Var):
        return fval(x)
    val = fval(x.value)
    return Var(val, _parents=((x, lambda g: g * dfn(x.value, val)),))


def exp(x):
    return _unary(x, np.exp, lambda xv, v: v)


def log(x):
    return _unary(x, np.log, lambda xv, v: 1.0 / xv)


def sqrt(x):
    return _unary(x, np.sqrt, lambda xv, v: 0.5 / v)


def tanh(x):
    return _unary(x, np.tanh, lambda xv, v: 1.0 - v * v)


def arctan(x):
    return _unary(x, np.arctan, lambda xv, v: 1.0 / (1.0 + xv * xv))


def sigmoid(x):
    if not isinstance(x, Var):
        return 1.0 / (1.0 + np.exp(-x))
    return 1.0 / (1.0 + exp(-x))


def where(mask, a, b):
    """Select per element; `mask` must be a constant boolean array."""
    mask = np.asarray(value_of(mask), dtype=bool)
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return np.where(mask, a, b)
    a, b = _lift(a), _lift(b)
    out = Var(np.where(mask, a.value, b.value), _parents=(
        (a, lambda g: _unbroadcast(np.where(mask, g, 0.0), a.value.shape)),
        (b, lambda g: _unbroadcast(np.where(mask, 0.0, g), b.value.shape)),
    ))
    return out


def maximum(x, c):
    """Elementwise max with a constant; gradient flows where x >= c."""
    if not isinstance(x, Var):
        return np.maximum(x, c)
    c = np.asarray(value_of(c))
    keep = x.value >= c
    return Var(np.maximum(x.value, c),
               _parents=((x, lambda g: np.where(keep, g, 0.0)),))


def vsum(x, axis=None, keepdims=False):
    if isinstance(x, Var):
        return x.sum(axis=axis, keepdims=keepdims)
    return np.sum(x, axis=axis, keepdims=keepdims)


def expand_dims(x, axis):
    if not isinstance(x, Var):
        return np.expand_dims(x, axis)
    return Var(np.expand_dims(x.value, axis),
               _parents=((x, lambda g: g.reshape(x.value.shape)),))


def matmul(a, b):
    """Matrix product: 1D/2D operands, same semantics as np.matmul."""
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return np.matmul(a, b)
    a, b = _lift(a), _lift(b)
    av, bv = a.value, b.value
    if av.ndim > 2 or bv.ndim > 2:
        raise ValueError("matmul supports 1D/2D operands only")
    out = Var(np.matmul(av, bv))

    def vjp_a(g):
        if av.ndim == 1 and bv.ndim == 1:
            return g * bv
        if av.ndim == 1:                      # (k,) @ (k,n) -> (n,)
            return np.matmul(bv, g)
        if bv.ndim == 1:                      # (m,k) @ (k,) -> (m,)
            return np.outer(g, bv)
        return np.matmul(g, bv.T)

    def vjp_b(g):
        if av.ndim == 1 and bv.ndim == 1:
            return g * av
        if av.ndim == 1:
            return np.outer(av, g)
        if bv.ndim == 1:
            return np.matmul(av.T, g)
        return np.matmul(av.T, g)

    out._parents = ((a, vjp_a), (b, vjp_b))
    return out


def stack(xs, axis=0):
    if not any(isinstance(x, Var) for x in xs):
        return np.stack(xs, axis=axis)
    xs = [_lift(x) for x in xs]
    out_val = np.stack([x.value for x in xs], axis=axis)
    parents = []
    for i, x in enumerate(xs):
        def vjp(g, i=i, x=x):
            return np.take(g, i, axis=axis).reshape(x.value.shape)
        parents.append((x, vjp))
    return Var(out_val, _parents=tuple(parents))


def unit_contract(w, x):
    """out[i, n, ...] = sum_p w[n, p] * x[i, p, ...]

    The per-unit linear map of an MLP layer applied to a stack of
    derivative tensors; both operands may require gradients.
    """
    if not (isinstance(w, Var) or isinstance(x, Var)):
        return np.einsum("np,ip...->in...", w, x)
    w, x = _lift(w), _lift(x)
    wv, xv = w.value, x.value
    out = Var(np.einsum("np,ip...->in...", wv, xv))
    m, p = xv.shape[0], xv.shape[1]
    rest = xv.shape[2:]
    xflat = xv.reshape(m, p, -1)

    def vjp_w(g):
        return np.einsum("inr,ipr->np", g.reshape(m, wv.shape[0], -1), xflat)

    def vjp_x(g):
        gx = np.einsum("np,inr->ipr", wv, g.reshape(m, wv.shape[0], -1))
        return gx.reshape(m, p, *rest)

    out._parents = ((w, vjp_w), (x, vjp_x))
    return out


def backward(root: Var):
    """Accumulate gradients of a scalar root into every reachable Var."""
    if root.value.size != 1:
        raise ValueError("backward expects a scalar root")

    order: list[Var] = []
    seen: set[int] = set()
    stack_ = [(root, False)]
    while stack_:
        node, processed = stack_.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for parent, _ in node._parents:
            if id(parent) not in seen:
                stack_.append((parent, False))

    for node in order:
        node.grad = np.zeros_like(node.value)
    root.grad = np.ones_like(root.value)

    for node in reversed(order):
        g = node.grad
        for parent, vjp in node._parents:
            parent.grad = parent.grad + vjp(g)
