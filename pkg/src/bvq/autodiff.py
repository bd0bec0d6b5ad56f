"""Reverse-mode automatic differentiation on dense float64 tensors.

A Tensor wraps an immutable numpy array plus an optional gradient
accumulator. Every op records its parents and a local backward closure;
``backward`` walks the tape in reverse topological order. The op set is
exactly what small convolutional encoder/decoders and their training losses
need: elementwise arithmetic, matmul, stride-1 same-padded conv2d, leaky
relu, reductions, pooling/upsampling, reshapes, row gathers and a
stop-gradient.

Every public op checks its result for NaN/Inf and fails fast: silent
divergence is much harder to debug downstream than an early error.
"""

import numpy as np

from .errors import NumericsError, ShapeError
from . import kernels


class Tensor:
    """Immutable value node of the computation graph."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_bwd")

    def __init__(self, data, requires_grad=False, _parents=(), _bwd=None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 4:
            raise ShapeError(f"tensors support at most 4 dimensions, got {arr.ndim}")
        if not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = _parents
        self._bwd = _bwd

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def detach(self):
        return stop_gradient(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)


def tensor(data, requires_grad=False):
    return Tensor(data, requires_grad=requires_grad)


def zeros(shape, requires_grad=False):
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def _lift(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _finite_or_raise(arr, op_name):
    if not np.isfinite(arr).all():
        raise NumericsError(f"non-finite values produced by op '{op_name}'")


def _make(data, op_name, parents, bwd):
    """Wrap an op result; graph is recorded only if some parent needs grad."""
    _finite_or_raise(data, op_name)
    needs = any(p.requires_grad for p in parents)
    if needs:
        return Tensor(data, requires_grad=True, _parents=tuple(parents), _bwd=bwd)
    return Tensor(data)


def _unbroadcast(grad, shape):
    """Reduce a broadcast gradient back to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(a, b, op_name):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op_name}: incompatible shapes {a.shape} and {b.shape}")


# ---------------------------------------------------------------------------
# elementwise ops

def add(a, b):
    _check_broadcast(a, b, "add")

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, "add", (a, b), bwd)


def sub(a, b):
    _check_broadcast(a, b, "sub")

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.data - b.data, "sub", (a, b), bwd)


def mul(a, b):
    _check_broadcast(a, b, "mul")

    def bwd(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(a.data * b.data, "mul", (a, b), bwd)


def neg(a):
    def bwd(g):
        return (-g,)

    return _make(-a.data, "neg", (a,), bwd)


def leaky_relu(a, slope=0.1):
    mask = a.data > 0.0

    def bwd(g):
        return (np.where(mask, g, slope * g),)

    return _make(np.where(mask, a.data, slope * a.data), "leaky_relu", (a,), bwd)


# ---------------------------------------------------------------------------
# linear algebra and convolution

def matmul(a, b):
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def bwd(g):
        return g @ b.data.T, a.data.T @ g

    return _make(a.data @ b.data, "matmul", (a, b), bwd)


def conv2d(x, w):
    """Stride-1, zero same-padded 2D correlation: [B,Ci,H,W] x [Co,Ci,k,k] -> [B,Co,H,W]."""
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d: expected 4D input and kernel, got {x.shape}, {w.shape}")
    b_, ci, h, wid = x.shape
    co, ci_w, k, k2 = w.shape
    if ci != ci_w:
        raise ShapeError(f"conv2d: input has {ci} channels, kernel expects {ci_w}")
    if k != k2 or k % 2 == 0:
        raise ShapeError(f"conv2d: kernels must be odd and square, got {k}x{k2}")
    if k > h or k > wid:
        raise ShapeError(f"conv2d: kernel {k} larger than image {h}x{wid}")

    def bwd(g):
        g = np.ascontiguousarray(g)
        return kernels.conv2d_bwd_x(g, w.data), kernels.conv2d_bwd_w(x.data, g, k)

    return _make(kernels.conv2d_fwd(x.data, w.data), "conv2d", (x, w), bwd)


# ---------------------------------------------------------------------------
# reductions

def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum(a, axis=None):  # noqa: A001 - mirrors numpy naming
    axes = _norm_axis(axis, a.ndim)

    def bwd(g):
        return (np.broadcast_to(np.expand_dims(g, axes), a.shape).copy(),)

    return _make(a.data.sum(axis=axes), "sum", (a,), bwd)


def mean(a, axis=None):
    axes = _norm_axis(axis, a.ndim)
    n = 1
    for ax in axes:
        n *= a.shape[ax]

    def bwd(g):
        return (np.broadcast_to(np.expand_dims(g / n, axes), a.shape).copy(),)

    return _make(a.data.mean(axis=axes), "mean", (a,), bwd)


def mse(a, b):
    """Mean over all elements of the squared difference."""
    if a.shape != b.shape:
        raise ShapeError(f"mse: shapes differ, {a.shape} vs {b.shape}")
    diff = a.data - b.data
    n = diff.size

    def bwd(g):
        scale = 2.0 * g / n
        return scale * diff, -scale * diff

    return _make(np.float64((diff * diff).mean()), "mse", (a, b), bwd)


# ---------------------------------------------------------------------------
# structural ops

def reshape(a, shape):
    if int(np.prod(shape)) != a.data.size:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}")

    def bwd(g):
        return (g.reshape(a.shape),)

    return _make(a.data.reshape(shape), "reshape", (a,), bwd)


def getitem(a, idx):
    """Basic slicing with gradient scatter back into the source shape."""
    out = a.data[idx]

    def bwd(g):
        full = np.zeros(a.shape)
        full[idx] += g
        return (full,)

    return _make(out, "getitem", (a,), bwd)


def take_rows(a, indices):
    """Gather rows of a 2D tensor; the gradient scatter-adds into the rows."""
    if a.ndim != 2:
        raise ShapeError(f"take_rows: expected 2D tensor, got {a.shape}")
    idx = np.asarray(indices, dtype=np.intp)

    def bwd(g):
        full = np.zeros(a.shape)
        np.add.at(full, idx, g)
        return (full,)

    return _make(a.data[idx], "take_rows", (a,), bwd)


def avg_pool2(a):
    """2x2 average pooling on [B,C,H,W]; H and W must be even."""
    if a.ndim != 4 or a.shape[2] % 2 or a.shape[3] % 2:
        raise ShapeError(f"avg_pool2: expected 4D input with even H,W, got {a.shape}")
    b_, c, h, w = a.shape
    pooled = a.data.reshape(b_, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def bwd(g):
        return (np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25,)

    return _make(pooled, "avg_pool2", (a,), bwd)


def upsample2(a):
    """Nearest-neighbour 2x upsampling on [B,C,H,W]."""
    if a.ndim != 4:
        raise ShapeError(f"upsample2: expected 4D input, got {a.shape}")
    up = np.repeat(np.repeat(a.data, 2, axis=2), 2, axis=3)

    def bwd(g):
        b_, c, h2, w2 = g.shape
        return (g.reshape(b_, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5)),)

    return _make(up, "upsample2", (a,), bwd)


def stop_gradient(a):
    """Value of a, cut out of the graph; backward contributes nothing upstream."""
    return Tensor(a.data)


# ---------------------------------------------------------------------------
# backward pass

def _topo_order(root):
    order = []
    seen = set()
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
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss):
    """Populate .grad on every requires-grad tensor reachable from the scalar loss.

    Repeated calls accumulate; clearing is the optimizer's job.
    """
    if loss.data.ndim != 0:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    adjoint = {id(loss): np.ones(())}
    order = _topo_order(loss)
    for node in reversed(order):
        g = adjoint.pop(id(node), None)
        if g is None:
            continue
        if node.grad is None:
            node.grad = np.array(g, dtype=np.float64)
        else:
            node.grad = node.grad + g
        if node._bwd is None:
            continue
        parent_grads = node._bwd(g)
        for p, pg in zip(node._parents, parent_grads):
            if not p.requires_grad or pg is None:
                continue
            if id(p) in adjoint:
                adjoint[id(p)] = adjoint[id(p)] + pg
            else:
                adjoint[id(p)] = pg
