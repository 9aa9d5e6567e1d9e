"""Dense-tensor reverse-mode automatic differentiation on a recording tape.

Everything is float64 numpy underneath. A ``Tape`` is opened as a context
manager; every primitive executed while it is active appends its result node
(operands, saved values, vector-Jacobian closures) to the tape. ``backward``
replays the tape once in reverse creation order, which is a reverse
topological order of the graph, and accumulates gradients on the leaf
tensors it reaches.

Design notes:
  * batching is plain numpy broadcasting over leading axes; gradients of
    broadcast operands are summed back to the operand shape,
  * a tape belongs to a single thread and a single backward sweep,
  * intermediate gradients are dropped as soon as a node has been processed
    so long unrolled recurrences do not hold two copies of every activation.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ShapeMismatchError",
    "Tensor",
    "Tape",
    "backward",
    "zero_grads",
    "add",
    "subtract",
    "multiply",
    "divide",
    "negative",
    "matmul",
    "affine",
    "tanh",
    "sigmoid",
    "exp",
    "expm1",
    "log",
    "softplus",
    "clamp_min",
    "square",
    "concat",
    "slice_last",
    "broadcast_rows",
    "reduce_sum",
    "reduce_mean",
    "mean_rows",
]


class ShapeMismatchError(ValueError):
    """Raised when operand shapes do not conform; message carries both shapes."""


class Tape:
    """Ordered record of primitive applications for one forward pass."""

    _stack: list["Tape"] = []

    def __init__(self):
        self.nodes: list[Tensor] = []
        self._used = False

    def __enter__(self):
        Tape._stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        Tape._stack.pop()
        return False

    @staticmethod
    def active():
        return Tape._stack[-1] if Tape._stack else None


class Tensor:
    """A float64 array plus the bookkeeping reverse mode needs.

    Leaf tensors (parameters, inputs) are built directly and carry no
    parents. Tensors produced by primitives reference their operands and the
    per-operand vector-Jacobian closures, and are recorded on the active
    tape. ``grad`` accumulates across backward sweeps until ``zero_grads``.
    """

    __slots__ = ("data", "grad", "parents", "_vjps", "name")

    def __init__(self, data, name=None, _parents=(), _vjps=(), _check=True):
        arr = np.asarray(data, dtype=np.float64)
        if _check and not np.all(np.isfinite(arr)):
            raise ValueError(f"tensor {name or ''} contains non-finite values")
        self.data = arr
        self.grad = None
        self.parents = _parents
        self._vjps = _vjps
        self.name = name
        if _parents:
            tape = Tape.active()
            if tape is not None:
                tape.nodes.append(self)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        tag = f" '{self.name}'" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape})"

    # operator sugar; every dunder maps onto a recorded primitive
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return subtract(self, other)

    def __rsub__(self, other):
        return subtract(other, self)

    def __mul__(self, other):
        return multiply(self, other)

    def __rmul__(self, other):
        return multiply(other, self)

    def __truediv__(self, other):
        return divide(self, other)

    def __neg__(self):
        return negative(self)

    def __matmul__(self, other):
        return matmul(self, other)


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x, _check=False)


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _elementwise_shapes(a, b, op):
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeMismatchError(
            f"{op}: shapes {a.data.shape} and {b.data.shape} do not broadcast"
        ) from None


def backward(tape, loss):
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf.

    `loss` must be a scalar tensor recorded on `tape`. Parameters that do
    not influence the loss simply keep a zero (None) gradient. One sweep per
    tape; the tape is consumed.
    """
    if not isinstance(loss, Tensor):
        raise TypeError("loss must be a Tensor")
    if loss.data.size != 1:
        raise ShapeMismatchError(
            f"backward: loss must be scalar, got shape {loss.data.shape}"
        )
    if tape._used:
        raise RuntimeError("tape has already been replayed")
    tape._used = True
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes):
        g = node.grad
        if g is None:
            continue
        for parent, vjp in zip(node.parents, node._vjps):
            if vjp is None:
                continue
            contrib = vjp(g)
            if parent.grad is None:
                parent.grad = contrib
            else:
                parent.grad = parent.grad + contrib
        node.grad = None  # free intermediate gradients as we go


def gradients(tape, loss, params):
    """backward() then collect d(loss)/d(p) per parameter, zeros if unused.

    Clears the collected gradients from the parameters, so separate calls do
    not accumulate.
    """
    backward(tape, loss)
    out = []
    for p in params:
        out.append(np.zeros_like(p.data) if p.grad is None else p.grad)
        p.grad = None
    return out


def zero_grads(tensors):
    for t in tensors:
        t.grad = None


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = _lift(a), _lift(b)
    _elementwise_shapes(a, b, "add")
    return Tensor(
        a.data + b.data,
        _parents=(a, b),
        _vjps=(
            lambda g, sa=a.data.shape: _unbroadcast(g, sa),
            lambda g, sb=b.data.shape: _unbroadcast(g, sb),
        ),
        _check=False,
    )


def subtract(a, b):
    a, b = _lift(a), _lift(b)
    _elementwise_shapes(a, b, "subtract")
    return Tensor(
        a.data - b.data,
        _parents=(a, b),
        _vjps=(
            lambda g, sa=a.data.shape: _unbroadcast(g, sa),
            lambda g, sb=b.data.shape: _unbroadcast(-g, sb),
        ),
        _check=False,
    )


def multiply(a, b):
    a, b = _lift(a), _lift(b)
    _elementwise_shapes(a, b, "multiply")
    return Tensor(
        a.data * b.data,
        _parents=(a, b),
        _vjps=(
            lambda g, bd=b.data, sa=a.data.shape: _unbroadcast(g * bd, sa),
            lambda g, ad=a.data, sb=b.data.shape: _unbroadcast(g * ad, sb),
        ),
        _check=False,
    )


def divide(a, b):
    a, b = _lift(a), _lift(b)
    _elementwise_shapes(a, b, "divide")
    return Tensor(
        a.data / b.data,
        _parents=(a, b),
        _vjps=(
            lambda g, bd=b.data, sa=a.data.shape: _unbroadcast(g / bd, sa),
            lambda g, ad=a.data, bd=b.data, sb=b.data.shape: _unbroadcast(
                -g * ad / (bd * bd), sb
            ),
        ),
        _check=False,
    )


def negative(a):
    a = _lift(a)
    return Tensor(-a.data, _parents=(a,), _vjps=(lambda g: -g,), _check=False)


def matmul(a, b):
    """Matrix multiply for 1-D/2-D operands with the usual vector rules."""
    a, b = _lift(a), _lift(b)
    ad, bd = a.data, b.data
    if ad.ndim > 2 or bd.ndim > 2 or ad.ndim == 0 or bd.ndim == 0:
        raise ShapeMismatchError(
            f"matmul: only 1-D/2-D operands supported, got {ad.shape} and {bd.shape}"
        )
    if ad.shape[-1] != (bd.shape[0] if bd.ndim >= 1 else None):
        raise ShapeMismatchError(
            f"matmul: inner dimensions differ, {ad.shape} vs {bd.shape}"
        )

    def vjp_a(g):
        g2 = np.atleast_2d(g) if ad.ndim == 2 or bd.ndim == 2 else g
        if ad.ndim == 1 and bd.ndim == 1:
            return g * bd
        if ad.ndim == 1:  # (n,) @ (n,m) -> (m,)
            return g @ bd.T
        if bd.ndim == 1:  # (m,n) @ (n,) -> (m,)
            return np.outer(g, bd)
        return g2 @ bd.T

    def vjp_b(g):
        if ad.ndim == 1 and bd.ndim == 1:
            return g * ad
        if ad.ndim == 1:
            return np.outer(ad, g)
        if bd.ndim == 1:
            return ad.T @ g
        return ad.T @ g

    return Tensor(ad @ bd, _parents=(a, b), _vjps=(vjp_a, vjp_b), _check=False)


def affine(x, w, b):
    """x @ w.T + b with w shaped (out, in); x may be (in,) or (batch, in)."""
    x, w, b = _lift(x), _lift(w), _lift(b)
    xd, wd = x.data, w.data
    if xd.shape[-1] != wd.shape[1]:
        raise ShapeMismatchError(
            f"affine: input dim {xd.shape} does not match weight {wd.shape}"
        )

    def vjp_x(g):
        return g @ wd

    def vjp_w(g):
        if xd.ndim == 1:
            return np.outer(g, xd)
        return g.T @ xd

    def vjp_b(g):
        return g if g.ndim == 1 else g.sum(axis=0)

    return Tensor(
        xd @ wd.T + b.data,
        _parents=(x, w, b),
        _vjps=(vjp_x, vjp_w, vjp_b),
        _check=False,
    )


def tanh(a):
    a = _lift(a)
    y = np.tanh(a.data)
    return Tensor(y, _parents=(a,), _vjps=(lambda g: g * (1.0 - y * y),), _check=False)


def sigmoid(a):
    a = _lift(a)
    y = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                 np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))
    return Tensor(y, _parents=(a,), _vjps=(lambda g: g * y * (1.0 - y),), _check=False)


def exp(a):
    a = _lift(a)
    y = np.exp(a.data)
    return Tensor(y, _parents=(a,), _vjps=(lambda g: g * y,), _check=False)


def log(a):
    a = _lift(a)
    return Tensor(
        np.log(a.data), _parents=(a,), _vjps=(lambda g, d=a.data: g / d,), _check=False
    )


def expm1(a):
    a = _lift(a)
    y = np.expm1(a.data)
    return Tensor(y, _parents=(a,), _vjps=(lambda g: g * (y + 1.0),), _check=False)


def clamp_min(a, floor):
    """Elementwise max(a, floor) with the usual subgradient."""
    a = _lift(a)
    mask = (a.data > floor).astype(np.float64)
    return Tensor(
        np.maximum(a.data, floor),
        _parents=(a,),
        _vjps=(lambda g: g * mask,),
        _check=False,
    )


def softplus(a):
    """log(1 + e^x), computed without overflow for large |x|."""
    a = _lift(a)
    d = a.data
    y = np.maximum(d, 0.0) + np.log1p(np.exp(-np.abs(d)))
    sig = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                   np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    return Tensor(y, _parents=(a,), _vjps=(lambda g: g * sig,), _check=False)


def square(a):
    a = _lift(a)
    return Tensor(
        a.data * a.data,
        _parents=(a,),
        _vjps=(lambda g, d=a.data: 2.0 * g * d,),
        _check=False,
    )


def concat(tensors):
    """Concatenate along the last axis."""
    ts = [_lift(t) for t in tensors]
    widths = [t.data.shape[-1] for t in ts]
    offsets = np.concatenate([[0], np.cumsum(widths)])

    def make_vjp(i):
        lo, hi = offsets[i], offsets[i + 1]
        return lambda g: g[..., lo:hi]

    return Tensor(
        np.concatenate([t.data for t in ts], axis=-1),
        _parents=tuple(ts),
        _vjps=tuple(make_vjp(i) for i in range(len(ts))),
        _check=False,
    )


def slice_last(a, start, stop):
    """Contiguous slice [start:stop] along the last axis."""
    a = _lift(a)
    n = a.data.shape[-1]
    if not (0 <= start <= stop <= n):
        raise ShapeMismatchError(
            f"slice_last: range [{start}:{stop}] invalid for width {n}"
        )

    def vjp(g):
        full = np.zeros(a.data.shape)
        full[..., start:stop] = g
        return full

    return Tensor(a.data[..., start:stop], _parents=(a,), _vjps=(vjp,), _check=False)


def broadcast_rows(a, n):
    """Repeat a 1-D tensor as n identical rows, gradient sums over rows."""
    a = _lift(a)
    if a.data.ndim != 1:
        raise ShapeMismatchError(f"broadcast_rows: need 1-D tensor, got {a.data.shape}")
    return Tensor(
        np.broadcast_to(a.data, (n, a.data.shape[0])).copy(),
        _parents=(a,),
        _vjps=(lambda g: g.sum(axis=0),),
        _check=False,
    )


def reduce_sum(a, axis=None):
    a = _lift(a)
    shape = a.data.shape

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, shape).copy()
        ge = np.expand_dims(g, axis)
        return np.broadcast_to(ge, shape).copy()

    return Tensor(a.data.sum(axis=axis), _parents=(a,), _vjps=(vjp,), _check=False)


def mean_rows(a):
    """Mean over axis 0 with strict left-to-right accumulation.

    Pinning the summation order makes an incremental running mean
    (sum_i += row_i; sum_i / i) bit-identical to re-aggregating the first i
    rows, which the online-learning path relies on.
    """
    a = _lift(a)
    if a.data.ndim != 2 or a.data.shape[0] == 0:
        raise ShapeMismatchError(f"mean_rows: need nonempty 2-D, got {a.data.shape}")
    n, _ = a.data.shape

    def vjp(g):
        return np.broadcast_to(g / n, a.data.shape).copy()

    total = np.cumsum(a.data, axis=0)[-1]
    return Tensor(total / n, _parents=(a,), _vjps=(vjp,), _check=False)


def reduce_mean(a, axis=None):
    a = _lift(a)
    shape = a.data.shape
    count = a.data.size if axis is None else shape[axis]

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g / count, shape).copy()
        ge = np.expand_dims(g / count, axis)
        return np.broadcast_to(ge, shape).copy()

    return Tensor(a.data.mean(axis=axis), _parents=(a,), _vjps=(vjp,), _check=False)
