"""Reverse-mode automatic differentiation over numpy arrays.

Operations on :class:`Tensor` objects are recorded on the innermost active
:class:`Tape`.  ``Tape.gradient`` sweeps the record list backwards and returns
the gradient of a scalar loss with respect to any set of leaves.

Complex tensors follow the convention ``grad = dL/dRe + 1j * dL/dIm`` for a
real loss ``L``.  With it, the vector-Jacobian product of any complex-linear
map is its conjugate transpose, and real inputs simply keep the real part.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import fft as _fft

_local = threading.local()
_seq = itertools.count()


def _tape_stack() -> list:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


class Tensor:
    """Dense array with an optional gradient requirement."""

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if not np.iscomplexobj(arr):
            arr = arr.astype(np.float64, copy=False)
        else:
            arr = arr.astype(np.complex128, copy=False)
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name
        self._seq = next(_seq)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return self.data.item()

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Record:
    inputs: tuple
    output: Tensor
    vjp: Callable


class Tape:
    """Records differentiable operations executed while the tape is active.

    >>> x = Tensor(3.0, requires_grad=True)
    >>> with Tape() as tape:
    ...     y = x * x
    >>> float(tape.gradient(y, [x])[0])
    6.0
    """

    def __init__(self):
        self.records: list[_Record] = []
        self.finalized = False

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        assert stack and stack[-1] is self, "tape stack corrupted"
        stack.pop()
        self.finalized = True

    def record(self, inputs: tuple, output: Tensor, vjp: Callable) -> None:
        self.records.append(_Record(inputs, output, vjp))

    def gradient(self, loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
        """Gradient of the scalar ``loss`` with respect to each of ``params``.

        Leaves that do not influence the loss get a zero array.
        """
        if loss.size != 1:
            raise ValueError(f"loss must be scalar, got shape {loss.shape}")
        if np.iscomplexobj(loss.data):
            raise ValueError("loss must be real")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for rec in reversed(self.records):
            g = grads.pop(id(rec.output), None)
            if g is None:
                continue
            in_grads = rec.vjp(g)
            for inp, gi in zip(rec.inputs, in_grads):
                if gi is None or not isinstance(inp, Tensor) or not inp.requires_grad:
                    continue
                if inp._seq >= rec.output._seq:
                    raise RuntimeError("tape is not topologically ordered")
                if not inp.is_complex and np.iscomplexobj(gi):
                    gi = gi.real
                gi = np.broadcast_to(gi, inp.shape)
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = np.array(gi, copy=True)
        return [grads.get(id(p), np.zeros_like(p.data)) for p in params]


def make_op(data: np.ndarray, inputs: tuple, vjp: Callable) -> Tensor:
    """Wrap a forward result and register its backward rule on the active tape."""
    out = Tensor(data)
    stack = _tape_stack()
    if stack and any(isinstance(t, Tensor) and t.requires_grad for t in inputs):
        out.requires_grad = True
        stack[-1].record(inputs, out, vjp)
    return out


def no_tape_active() -> bool:
    return not _tape_stack()


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    nlead = g.ndim - len(shape)
    if nlead:
        g = g.sum(axis=tuple(range(nlead)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _data(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x)


# elementwise ----------------------------------------------------------------

def add(a, b) -> Tensor:
    ad, bd = _data(a), _data(b)
    return make_op(ad + bd, (a, b), lambda g: (_unbroadcast(g, ad.shape), _unbroadcast(g, bd.shape)))


def sub(a, b) -> Tensor:
    ad, bd = _data(a), _data(b)
    return make_op(ad - bd, (a, b), lambda g: (_unbroadcast(g, ad.shape), _unbroadcast(-g, bd.shape)))


def mul(a, b) -> Tensor:
    ad, bd = _data(a), _data(b)

    def vjp(g):
        return (_unbroadcast(g * np.conj(bd), ad.shape), _unbroadcast(g * np.conj(ad), bd.shape))

    return make_op(ad * bd, (a, b), vjp)


def div(a, b) -> Tensor:
    ad, bd = _data(a), _data(b)
    out = ad / bd

    def vjp(g):
        ga = g / np.conj(bd)
        gb = -g * np.conj(out / bd)
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return make_op(out, (a, b), vjp)


def power(a: Tensor, p: float) -> Tensor:
    ad = a.data
    return make_op(ad ** p, (a,), lambda g: (g * p * ad ** (p - 1),))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return make_op(out, (a,), lambda g: (g * np.conj(out),))


def log(a: Tensor) -> Tensor:
    ad = a.data
    return make_op(np.log(ad), (a,), lambda g: (g / np.conj(ad),))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return make_op(out, (a,), lambda g: (g / (2.0 * out),))


def sin(a: Tensor) -> Tensor:
    ad = a.data
    return make_op(np.sin(ad), (a,), lambda g: (g * np.cos(ad),))


def cos(a: Tensor) -> Tensor:
    ad = a.data
    return make_op(np.cos(ad), (a,), lambda g: (-g * np.sin(ad),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return make_op(out, (a,), lambda g: (g * (1.0 - out * out),))


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(a: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    x = a.data
    inner = _GELU_C * (x + 0.044715 * (x * x * x))
    th = np.tanh(inner)
    out = 0.5 * x * (1.0 + th)

    def vjp(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
        return (g * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * dinner),)

    return make_op(out, (a,), vjp)


def real(a: Tensor) -> Tensor:
    return make_op(a.data.real.copy(), (a,), lambda g: (g.astype(np.complex128),))


def imag(a: Tensor) -> Tensor:
    return make_op(a.data.imag.copy(), (a,), lambda g: (1j * g,))


def abs2(a: Tensor) -> Tensor:
    """Squared modulus, real valued."""
    ad = a.data
    return make_op((ad * np.conj(ad)).real, (a,), lambda g: (2.0 * g * ad,))


# reductions and shape ------------------------------------------------------

def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    shape = a.shape

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return make_op(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), vjp)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return tsum(a, axis, keepdims) * (1.0 / n)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    return make_op(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)
    return make_op(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def getitem(a: Tensor, index) -> Tensor:
    shape, dtype = a.shape, a.data.dtype

    def vjp(g):
        full = np.zeros(shape, dtype=np.result_type(dtype, g.dtype))
        np.add.at(full, index, g)
        return (full,)

    return make_op(a.data[index], (a,), vjp)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    datas = [_data(t) for t in tensors]
    splits = np.cumsum([d.shape[axis] for d in datas])[:-1]
    return make_op(np.concatenate(datas, axis=axis), tuple(tensors),
                   lambda g: tuple(np.split(g, splits, axis=axis)))


def broadcast_to(a: Tensor, shape) -> Tensor:
    old = a.shape
    return make_op(np.broadcast_to(a.data, shape).copy(), (a,), lambda g: (_unbroadcast(g, old),))


def einsum(subscripts: str, *operands) -> Tensor:
    """Differentiable einsum for explicit subscripts without ellipses."""
    lhs, out_sub = subscripts.replace(" ", "").split("->")
    in_subs = lhs.split(",")
    if len(in_subs) != len(operands):
        raise ValueError("operand count does not match subscripts")
    datas = [_data(o) for o in operands]
    out = np.einsum(subscripts, *datas, optimize=len(datas) > 2)

    def vjp(g):
        grads = []
        for i, sub_i in enumerate(in_subs):
            others = [(s, np.conj(d)) for j, (s, d) in enumerate(zip(in_subs, datas)) if j != i]
            avail = set(out_sub).union(*[set(s) for s, _ in others]) if others else set(out_sub)
            kept = "".join(c for c in sub_i if c in avail)
            spec = ",".join([out_sub] + [s for s, _ in others]) + "->" + kept
            r = np.einsum(spec, g, *[d for _, d in others], optimize=len(others) > 1)
            if kept != sub_i:
                r = r.reshape([datas[i].shape[k] if c in avail else 1 for k, c in enumerate(sub_i)])
                r = np.broadcast_to(r, datas[i].shape)
            grads.append(r)
        return tuple(grads)

    return make_op(out, tuple(operands), vjp)


# spectral --------------------------------------------------------------------

def fft(a: Tensor, axes: Sequence[int]) -> Tensor:
    """Unnormalized forward DFT along ``axes``; the adjoint is the conjugate DFT."""
    axes = tuple(axes)
    n = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    return make_op(_fft.fft_along(a.data, axes), (a,), lambda g: (n * _fft.ifft_along(g, axes),))


def ifft(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    n = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    return make_op(_fft.ifft_along(a.data, axes), (a,), lambda g: (_fft.fft_along(g, axes) / n,))
