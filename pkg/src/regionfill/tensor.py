"""Dense float tensors with tape-based reverse-mode automatic differentiation.

The tape is implicit: every operation that produces a tensor with
``requires_grad`` records its parents and a closure that scatters the
output gradient back to them. ``Tensor.backward()`` on a scalar walks the
graph in reverse topological order.

Every operation also charges a deterministic flop estimate to a global
counter (see the cost model notes on each op). The counter measures the
idealized arithmetic of the forward pass only, so instrumented totals can
be compared exactly against closed-form complexity models.
"""

from __future__ import annotations

import contextlib

import numpy as np

_FLOAT_DTYPES = (np.float32, np.float64)


class OpCounter:
    """Accumulates idealized forward-pass flop counts."""

    __slots__ = ("flops",)

    def __init__(self):
        self.flops = 0

    def add(self, n):
        self.flops += int(n)

    def reset(self):
        self.flops = 0


COUNTER = OpCounter()


def reset_flops():
    COUNTER.reset()


def flop_count():
    return COUNTER.flops


_GRAD_ENABLED = [True]


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (inference mode)."""
    _GRAD_ENABLED.append(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.pop()


def grad_enabled():
    return _GRAD_ENABLED[-1]


def _as_float_array(data, dtype=None):
    arr = np.asarray(data, dtype=dtype)
    if arr.dtype not in _FLOAT_DTYPES:
        arr = arr.astype(np.float32)
    return arr


class Tensor:
    """A dense float32/float64 array plus an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn", "_op")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = _as_float_array(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward_fn = None
        self._op = ""

    # ------------------------------------------------------------------
    # basic introspection
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

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.size == 1 else float(self.data)

    def numpy(self):
        return self.data

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}{flag})"

    def detach(self):
        """Same data, cut off from the graph."""
        return Tensor(self.data, requires_grad=False)

    def astype(self, dtype):
        out = _make(self.data.astype(dtype), (self,), None, "astype")
        if out.requires_grad:

            def backward(g):
                _accumulate(self, g.astype(self.data.dtype))

            out._backward_fn = backward
        return out

    def zero_grad(self):
        self.grad = None

    # ------------------------------------------------------------------
    # autodiff driver
    def backward(self, gradient=None):
        """Backpropagate from this tensor.

        Without an explicit ``gradient`` the tensor must be a scalar
        (size 1); the seed is then 1.
        """
        if gradient is None:
            if self.size != 1:
                raise ValueError(
                    f"backward() needs a scalar output, got shape {self.shape}; "
                    "pass an explicit gradient for non-scalars"
                )
            gradient = np.ones_like(self.data)
        else:
            gradient = np.asarray(gradient, dtype=self.data.dtype)
            if gradient.shape != self.data.shape:
                raise ValueError(
                    f"gradient shape {gradient.shape} does not match tensor shape {self.shape}"
                )
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        _accumulate(self, gradient)
        for node in reversed(topo):
            if node._backward_fn is not None:
                node._backward_fn(node.grad)

    # ------------------------------------------------------------------
    # operator sugar (definitions live below as free functions)
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_wrap(other, self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def abs(self):
        return absolute(self)

    def exp(self):
        return exp(self)

    def sqrt(self):
        return power(self, 0.5)


def _wrap(value, dtype):
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _make(data, parents, backward_fn, op):
    out = Tensor(data)
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
        out._op = op
    return out


def _accumulate(tensor, grad):
    if not tensor.requires_grad:
        return
    if tensor.grad is None:
        tensor.grad = np.array(grad, dtype=tensor.data.dtype, copy=True)
    else:
        tensor.grad += grad


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ----------------------------------------------------------------------
# elementwise arithmetic — cost model: one flop per output element


def add(a, b):
    a = _wrap(a, getattr(b, "dtype", np.float32))
    b = _wrap(b, a.dtype)
    data = a.data + b.data
    COUNTER.add(data.size)

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _make(data, (a, b), backward, "add")


def sub(a, b):
    a = _wrap(a, getattr(b, "dtype", np.float32))
    b = _wrap(b, a.dtype)
    data = a.data - b.data
    COUNTER.add(data.size)

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    return _make(data, (a, b), backward, "sub")


def mul(a, b):
    a = _wrap(a, getattr(b, "dtype", np.float32))
    b = _wrap(b, a.dtype)
    data = a.data * b.data
    COUNTER.add(data.size)

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), backward, "mul")


def div(a, b):
    a = _wrap(a, getattr(b, "dtype", np.float32))
    b = _wrap(b, a.dtype)
    data = a.data / b.data
    COUNTER.add(data.size)

    def backward(g):
        _accumulate(a, _unbroadcast(g / b.data, a.shape))
        _accumulate(b, _unbroadcast(-g * data / b.data, b.shape))

    return _make(data, (a, b), backward, "div")


def neg(a):
    data = -a.data
    COUNTER.add(data.size)

    def backward(g):
        _accumulate(a, -g)

    return _make(data, (a,), backward, "neg")


def power(a, exponent):
    exponent = float(exponent)
    data = a.data**exponent
    COUNTER.add(data.size)

    def backward(g):
        _accumulate(a, g * exponent * a.data ** (exponent - 1.0))

    return _make(data, (a,), backward, "pow")


def exp(a):
    data = np.exp(a.data)
    COUNTER.add(data.size)

    def backward(g):
        _accumulate(a, g * data)

    return _make(data, (a,), backward, "exp")


def absolute(a):
    data = np.abs(a.data)
    COUNTER.add(data.size)

    def backward(g):
        _accumulate(a, g * np.sign(a.data))

    return _make(data, (a,), backward, "abs")


# ----------------------------------------------------------------------
# reductions — cost model: one flop per input element


def tensor_sum(a, axis=None, keepdims=False):
    data = a.data.sum(axis=axis, keepdims=keepdims)
    COUNTER.add(a.size)

    def backward(g):
        if axis is None:
            grad = np.broadcast_to(g, a.shape)
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            grad = np.broadcast_to(g, a.shape)
        _accumulate(a, np.ascontiguousarray(grad))

    return _make(data, (a,), backward, "sum")


def tensor_mean(a, axis=None, keepdims=False):
    data = a.data.mean(axis=axis, keepdims=keepdims)
    COUNTER.add(a.size)
    count = a.size / data.size

    def backward(g):
        if axis is None:
            grad = np.broadcast_to(g / count, a.shape)
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            grad = np.broadcast_to(g / count, a.shape)
        _accumulate(a, np.ascontiguousarray(grad))

    return _make(data, (a,), backward, "mean")


# ----------------------------------------------------------------------
# matmul — cost model: 2·m·k·n per matrix product in the broadcast stack


def matmul(a, b):
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs >=2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    data = a.data @ b.data
    m, n = data.shape[-2], data.shape[-1]
    k = a.shape[-1]
    batch = int(np.prod(data.shape[:-2], dtype=np.int64)) if data.ndim > 2 else 1
    COUNTER.add(2 * batch * m * k * n)

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        _accumulate(a, _unbroadcast(ga, a.shape))
        _accumulate(b, _unbroadcast(gb, b.shape))

    return _make(data, (a, b), backward, "matmul")


# ----------------------------------------------------------------------
# shape ops — free


def reshape(a, shape):
    data = a.data.reshape(shape)

    def backward(g):
        _accumulate(a, g.reshape(a.shape))

    return _make(data, (a,), backward, "reshape")


def transpose(a, axes=None):
    data = a.data.transpose(axes)
    if axes is None:
        inverse = None
    else:
        inverse = tuple(np.argsort(axes))

    def backward(g):
        _accumulate(a, g.transpose(inverse))

    return _make(data, (a,), backward, "transpose")


def concat(tensors, axis=0):
    tensors = list(tensors)
    if not tensors:
        raise ValueError("concat needs at least one tensor")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(idx)])

    return _make(data, tuple(tensors), backward, "concat")


def take_rows(a, indices):
    """Select rows along the first axis; gradient scatters back."""
    indices = np.asarray(indices, dtype=np.intp)
    data = a.data[indices]

    def backward(g):
        grad = np.zeros(a.shape, dtype=a.data.dtype)
        np.add.at(grad, indices, g)
        _accumulate(a, grad)

    return _make(data, (a,), backward, "take_rows")
