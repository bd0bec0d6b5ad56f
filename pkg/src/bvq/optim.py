"""Named parameter collections and the Adam update."""

import numpy as np

from .autodiff import Tensor
from .errors import NumericsError, ShapeError


class ParamSet:
    """Named map of trainable tensors plus per-parameter Adam moments.

    Parameters are rebound to fresh Tensors on every optimizer step (tensor
    data is immutable); model code must therefore look parameters up by name
    at forward time instead of caching Tensor references.
    """

    def __init__(self):
        self._params = {}
        self._m = {}
        self._v = {}
        self.step_count = 0

    def add(self, name, data):
        if name in self._params:
            raise KeyError(f"parameter {name!r} already registered")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        self._m[name] = np.zeros(t.shape)
        self._v[name] = np.zeros(t.shape)
        return t

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def names(self):
        return list(self._params.keys())

    def items(self):
        return self._params.items()

    def n_values(self):
        total = 0
        for t in self._params.values():
            total += t.data.size
        return total

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def freeze(self):
        """Drop requires_grad on all parameters (their data is unchanged)."""
        for name, t in self._params.items():
            if t.requires_grad:
                self._params[name] = Tensor(t.data)

    def unfreeze(self):
        for name, t in self._params.items():
            if not t.requires_grad:
                self._params[name] = Tensor(t.data, requires_grad=True)

    def copy(self):
        """Deep copy of parameter values and optimizer state."""
        out = ParamSet()
        for name, t in self._params.items():
            out._params[name] = Tensor(t.data.copy(), requires_grad=t.requires_grad)
            out._m[name] = self._m[name].copy()
            out._v[name] = self._v[name].copy()
        out.step_count = self.step_count
        return out

    def load_values(self, other):
        """Replace parameter values and optimizer state with another set's."""
        if set(other._params) != set(self._params):
            raise ShapeError("parameter sets have different names")
        for name in self._params:
            req = self._params[name].requires_grad
            self._params[name] = Tensor(other._params[name].data.copy(), requires_grad=req)
            self._m[name] = other._m[name].copy()
            self._v[name] = other._v[name].copy()
        self.step_count = other.step_count

    def value_bytes(self):
        """Concatenated little-endian value blob, for change detection in tests."""
        chunks = [t.data.astype("<f8").tobytes() for _, t in sorted(self._params.items())]
        return b"".join(chunks)


def adam_step(params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update over every parameter; grads are cleared.

    Parameters without an accumulated gradient are treated as zero-gradient.
    """
    if lr <= 0.0:
        raise NumericsError(f"adam_step: lr must be positive, got {lr}")
    params.step_count += 1
    t = params.step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name in list(params._params.keys()):
        p = params._params[name]
        g = p.grad
        if g is None:
            g = np.zeros(p.shape)
        elif g.shape != p.data.shape:
            raise ShapeError(f"adam_step: grad shape {g.shape} != param shape {p.data.shape}")
        m = params._m[name]
        v = params._v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        update = lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        new_data = p.data - update
        if not np.isfinite(new_data).all():
            raise NumericsError(f"adam_step: parameter {name!r} became non-finite")
        params._params[name] = Tensor(new_data, requires_grad=p.requires_grad)
