"""Reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` wraps an ``ndarray`` together with an optional gradient
buffer. Operations build a define-by-run graph: each result remembers its
parents and a closure that pushes the output gradient back to them. Calling
:meth:`Tensor.backward` on a scalar walks the graph once in reverse
topological order. Repeated backward calls accumulate into ``grad``.

Design notes:

- activations and parameters are stored in whatever float dtype the caller
  supplies (float32 in the model, float64 in gradient checks);
- reductions (``sum``, ``mean``) and the layer-norm statistics always
  accumulate in float64 before casting back, so float32 models stay stable
  on long sequences;
- ``gelu`` uses the exact error-function form via ``scipy.special.erf``.
"""

from __future__ import annotations

import contextlib
import math
import threading

import numpy as np
from scipy.special import erf, expit

from .errors import ContractError, ParameterError, ShapeError

# per-thread so concurrent runs (e.g. a parallel sweep) cannot switch each
# other's graph construction off
_GRAD_MODE = threading.local()


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the ``with`` block."""
    prev = getattr(_GRAD_MODE, "enabled", True)
    _GRAD_MODE.enabled = False
    try:
        yield
    finally:
        _GRAD_MODE.enabled = prev


def _needs_grad(*tensors):
    return getattr(_GRAD_MODE, "enabled", True) and any(
        t.requires_grad for t in tensors
    )


def _unbroadcast(grad, shape):
    """Reduce ``grad`` back to ``shape`` by summing broadcast axes."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(
        i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1
    )
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _accum(t, g):
    g = _unbroadcast(np.asarray(g), t.data.shape)
    if t.grad is None:
        t.grad = g.astype(t.data.dtype, copy=True)
    else:
        t.grad = t.grad + g.astype(t.data.dtype, copy=False)


def _as_tensor(value, like=None):
    if isinstance(value, Tensor):
        return value
    arr = np.asarray(value)
    if arr.dtype.kind in "iub":
        arr = arr.astype(like.data.dtype if like is not None else np.float32)
    elif arr.ndim == 0 and like is not None and arr.dtype != like.data.dtype:
        # keep python-float constants from promoting a float32 graph
        arr = arr.astype(like.data.dtype)
    return Tensor(arr)


def _is_basic_key(key):
    items = key if isinstance(key, tuple) else (key,)
    return all(
        isinstance(k, (int, np.integer, slice)) or k is Ellipsis or k is None
        for k in items
    )


class Tensor:
    """A numpy array plus the bookkeeping needed for reverse-mode autodiff."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data)
        if arr.dtype.kind in "iub":
            arr = arr.astype(np.float32)
        elif arr.dtype.kind != "f":
            raise ShapeError(f"tensors hold float data, got dtype {arr.dtype}")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward_fn = None

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data.reshape(()))

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    # -- graph construction helpers ------------------------------------------

    def _child(self, data, parents, backward_fn):
        # the factory stays unapplied so no closure holds the child itself;
        # graphs then free by reference count the moment the root is dropped
        out = Tensor(data, requires_grad=_needs_grad(*parents))
        if out.requires_grad:
            out._parents = parents
            out._backward_fn = backward_fn
        return out

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other):
        a, b = self, _as_tensor(other, self)

        def make(out):
            def bw():
                if a.requires_grad:
                    _accum(a, out.grad)
                if b.requires_grad:
                    _accum(b, out.grad)

            return bw

        return self._child(a.data + b.data, (a, b), make)

    __radd__ = __add__

    def __mul__(self, other):
        a, b = self, _as_tensor(other, self)

        def make(out):
            def bw():
                if a.requires_grad:
                    _accum(a, out.grad * b.data)
                if b.requires_grad:
                    _accum(b, out.grad * a.data)

            return bw

        return self._child(a.data * b.data, (a, b), make)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-_as_tensor(other, self))

    def __rsub__(self, other):
        return (-self) + other

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ShapeError(
                "tensor/tensor division is not supported; multiply by a reciprocal"
            )
        return self * (1.0 / other)

    def __matmul__(self, other):
        a, b = self, _as_tensor(other, self)
        if a.data.ndim < 2 or b.data.ndim < 2:
            raise ShapeError(
                f"matmul needs ndim >= 2 on both sides, got {a.data.ndim} and {b.data.ndim}"
            )

        def make(out):
            def bw():
                if a.requires_grad:
                    _accum(a, out.grad @ np.swapaxes(b.data, -1, -2))
                if b.requires_grad:
                    _accum(b, np.swapaxes(a.data, -1, -2) @ out.grad)

            return bw

        return self._child(a.data @ b.data, (a, b), make)

    # -- shape manipulation ------------------------------------------------

    def __getitem__(self, key):
        a = self

        def make(out):
            def bw():
                g = np.zeros_like(a.data)
                if _is_basic_key(key):
                    g[key] += out.grad
                else:
                    np.add.at(g, key, out.grad)
                _accum(a, g)

            return bw

        return self._child(a.data[key], (a,), make)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        orig = a.data.shape

        def make(out):
            def bw():
                _accum(a, out.grad.reshape(orig))

            return bw

        return self._child(a.data.reshape(shape), (a,), make)

    def transpose(self, axes=None):
        a = self
        inv = None if axes is None else tuple(np.argsort(axes))

        def make(out):
            def bw():
                _accum(a, np.transpose(out.grad, inv))

            return bw

        return self._child(np.transpose(a.data, axes), (a,), make)

    def swapaxes(self, i, j):
        a = self

        def make(out):
            def bw():
                _accum(a, np.swapaxes(out.grad, i, j))

            return bw

        return self._child(np.swapaxes(a.data, i, j), (a,), make)

    def broadcast_to(self, shape):
        a = self

        def make(out):
            def bw():
                _accum(a, out.grad)

            return bw

        return self._child(np.broadcast_to(a.data, shape), (a,), make)

    def pad(self, axis, left, right):
        """Zero-pad along one axis with ``left``/``right`` extra entries."""
        if left < 0 or right < 0:
            raise ParameterError(f"pad widths must be >= 0, got ({left}, {right})")
        a = self
        axis_n = axis % a.data.ndim
        widths = [(0, 0)] * a.data.ndim
        widths[axis_n] = (left, right)
        size = a.data.shape[axis_n]

        def make(out):
            def bw():
                sl = [slice(None)] * a.data.ndim
                sl[axis_n] = slice(left, left + size)
                _accum(a, out.grad[tuple(sl)])

            return bw

        return self._child(np.pad(a.data, widths), (a,), make)

    # -- reductions ----------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        a = self
        data = a.data.sum(axis=axis, keepdims=keepdims, dtype=np.float64)
        data = data.astype(a.data.dtype, copy=False)

        def make(out):
            def bw():
                g = out.grad
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                _accum(a, np.broadcast_to(g, a.data.shape))

            return bw

        return self._child(data, (a,), make)

    def mean(self, axis=None, keepdims=False):
        a = self
        data = a.data.mean(axis=axis, keepdims=keepdims, dtype=np.float64)
        data = data.astype(a.data.dtype, copy=False)
        count = max(a.data.size // max(data.size, 1), 1)

        def make(out):
            def bw():
                g = out.grad
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                _accum(a, np.broadcast_to(g, a.data.shape) / count)

            return bw

        return self._child(data, (a,), make)

    # -- nonlinearities --------------------------------------------------------

    def softmax(self, axis=-1, temperature=1.0):
        """Softmax along ``axis`` of ``x / temperature``."""
        if temperature <= 0:
            raise ParameterError(f"softmax temperature must be > 0, got {temperature}")
        a = self
        z = a.data / temperature
        z = z - z.max(axis=axis, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=axis, keepdims=True)

        def make(out):
            def bw():
                g = out.grad
                dot = (g * y).sum(axis=axis, keepdims=True)
                _accum(a, (y * (g - dot)) / temperature)

            return bw

        return self._child(y, (a,), make)

    def sigmoid(self):
        a = self
        y = expit(a.data)

        def make(out):
            def bw():
                _accum(a, out.grad * y * (1.0 - y))

            return bw

        return self._child(y, (a,), make)

    def gelu(self):
        """Exact GELU, ``0.5 * x * (1 + erf(x / sqrt(2)))``."""
        a = self
        x = a.data
        cdf = 0.5 * (1.0 + erf(x / math.sqrt(2.0)))

        def make(out):
            def bw():
                pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
                _accum(a, out.grad * (cdf + x * pdf))

            return bw

        return self._child(x * cdf, (a,), make)

    def layer_norm(self, axis=-1, eps=1e-5):
        """Normalize to zero mean and unit variance along ``axis`` (no affine)."""
        a = self
        xd = a.data.astype(np.float64, copy=False)
        mu = xd.mean(axis=axis, keepdims=True)
        var = xd.var(axis=axis, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (xd - mu) * inv

        def make(out):
            def bw():
                g = out.grad.astype(np.float64, copy=False)
                gm = g.mean(axis=axis, keepdims=True)
                gxm = (g * xhat).mean(axis=axis, keepdims=True)
                _accum(a, inv * (g - gm - xhat * gxm))

            return bw

        return self._child(xhat.astype(a.data.dtype), (a,), make)

    def exp(self):
        a = self
        y = np.exp(a.data)

        def make(out):
            def bw():
                _accum(a, out.grad * y)

            return bw

        return self._child(y, (a,), make)

    def log(self):
        a = self

        def make(out):
            def bw():
                _accum(a, out.grad / a.data)

            return bw

        return self._child(np.log(a.data), (a,), make)

    def cos(self):
        a = self

        def make(out):
            def bw():
                _accum(a, -np.sin(a.data) * out.grad)

            return bw

        return self._child(np.cos(a.data), (a,), make)

    def softplus(self):
        """Numerically stable ``log(1 + exp(x))``."""
        a = self

        def make(out):
            def bw():
                _accum(a, out.grad * expit(a.data))

            return bw

        return self._child(np.logaddexp(0.0, a.data), (a,), make)

    # -- backward pass -----------------------------------------------------

    def backward(self):
        """Backpropagate from a scalar. Repeated calls add into ``grad``."""
        if self.data.size != 1:
            raise ContractError(
                f"backward requires a scalar loss, got shape {self.data.shape}"
            )
        if not self.requires_grad:
            raise ContractError("backward called on a tensor with requires_grad=False")

        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))

        # Stash grads left over from earlier backward calls so this pass
        # propagates only its own contribution, then add them back.
        saved = {}
        for node in topo:
            if node.grad is not None:
                saved[id(node)] = node.grad
                node.grad = None

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward_fn is not None:
                node._backward_fn(node)()

        for node in topo:
            old = saved.get(id(node))
            if old is not None:
                node.grad = old if node.grad is None else node.grad + old


def concat(tensors, axis=-1):
    """Concatenate tensors along ``axis``."""
    ts = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    if not ts:
        raise ContractError("concat needs at least one tensor")
    data = np.concatenate([t.data for t in ts], axis=axis)
    axis_n = axis % data.ndim
    sizes = [t.data.shape[axis_n] for t in ts]
    out = Tensor(data, requires_grad=_needs_grad(*ts))
    if out.requires_grad:
        out._parents = tuple(ts)

        def make(child):
            def bw():
                offset = 0
                for t, size in zip(ts, sizes):
                    if t.requires_grad:
                        sl = [slice(None)] * data.ndim
                        sl[axis_n] = slice(offset, offset + size)
                        _accum(t, child.grad[tuple(sl)])
                    offset += size

            return bw

        out._backward_fn = make
    return out


def lecun_uniform(rng, shape, fan_in, dtype=np.float32):
    """Uniform init on ``[-sqrt(1/fan_in), sqrt(1/fan_in)]``."""
    limit = math.sqrt(1.0 / max(int(fan_in), 1))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)
