"""Dense float64 tensors with a tape-based reverse-mode gradient engine.

Operations record a :class:`TapeNode` on the innermost active :class:`Tape`
whenever one of their inputs requires a gradient. Outside a tape every op is a
plain numpy computation, which is what inference uses.

    >>> x = Tensor([1.0, 2.0], requires_grad=True)
    >>> with Tape() as tape:
    ...     y = (x * x).sum()
    >>> tape.backward(y)
    >>> x.grad
    array([2., 4.])
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ContractError",
    "ShapeError",
    "Tape",
    "TapeNode",
    "Tensor",
    "add",
    "as_tensor",
    "broadcast_to",
    "concat",
    "cos",
    "div",
    "exp",
    "gradients",
    "log",
    "matmul",
    "mean",
    "mul",
    "neg",
    "relu",
    "reshape",
    "sigmoid",
    "sin",
    "softmax",
    "sub",
    "sum",
    "temporal_diff",
    "transpose",
]


class ShapeError(ValueError):
    """Raised when operand shapes violate an operation's contract."""


class ContractError(RuntimeError):
    """Raised when the engine is used out of order (e.g. backward before forward)."""


class Tensor:
    """A dense float64 array that may carry a gradient."""

    __slots__ = ("data", "grad", "requires_grad", "node", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.node: TapeNode | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

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

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        axes = list(range(self.ndim))
        axes[-2], axes[-1] = axes[-1], axes[-2]
        return transpose(self, tuple(axes))


@dataclass(eq=False)
class TapeNode:
    """One recorded operation; ``vjp`` closes over whatever the forward saved."""

    op: str
    inputs: tuple[Tensor, ...]
    outputs: tuple[Tensor, ...]
    vjp: Callable[..., Sequence[np.ndarray | None]]
    tape: "Tape" = field(repr=False, default=None)


_ACTIVE: list["Tape"] = []


class Tape:
    """Records operations while active; replays their adjoints in reverse."""

    def __init__(self):
        self.nodes: list[TapeNode] = []

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.remove(self)
        return False

    def backward(self, output: Tensor, seed=None) -> None:
        """Propagate ``seed`` (default ones) from ``output`` to every leaf.

        Leaf gradients are written to ``leaf.grad`` (overwriting).
        """
        node = output.node
        if node is None or node.tape is not self:
            raise ContractError("backward called on a value that was not recorded on this tape")
        seed = np.ones_like(output.data) if seed is None else np.asarray(seed, dtype=np.float64)
        if seed.shape != output.shape:
            raise ShapeError(f"seed shape {seed.shape} != output shape {output.shape}")

        grads: dict[int, np.ndarray] = {id(output): seed}
        leaves: dict[int, Tensor] = {}
        for node in reversed(self.nodes):
            outs = [grads.pop(id(o), None) for o in node.outputs]
            if all(g is None for g in outs):
                continue
            outs = [np.zeros_like(o.data) if g is None else g for o, g in zip(node.outputs, outs)]
            for inp, g in zip(node.inputs, node.vjp(*outs)):
                if g is None or not inp.requires_grad:
                    continue
                key = id(inp)
                grads[key] = grads[key] + g if key in grads else g
                if inp.node is None:
                    leaves[key] = inp
        for key, leaf in leaves.items():
            leaf.grad = grads[key]


def gradients(fn: Callable[[], Tensor], wrt: Sequence[Tensor], seed=None) -> list[np.ndarray]:
    """Run ``fn`` under a fresh tape and return d fn / d wrt (zeros if unreached)."""
    saved = [t.requires_grad for t in wrt]
    for t in wrt:
        t.requires_grad = True
        t.grad = None
    try:
        with Tape() as tape:
            out = fn()
        tape.backward(out, seed)
        return [np.zeros_like(t.data) if t.grad is None else t.grad for t in wrt]
    finally:
        for t, flag in zip(wrt, saved):
            t.requires_grad = flag


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(op: str, outputs, inputs: Sequence[Tensor], vjp) -> Tensor | tuple[Tensor, ...]:
    single = not isinstance(outputs, tuple)
    outs = tuple(Tensor(o) for o in ((outputs,) if single else outputs))
    if _ACTIVE and any(t.requires_grad for t in inputs):
        tape = _ACTIVE[-1]
        node = TapeNode(op, tuple(inputs), outs, vjp, tape)
        for o in outs:
            o.requires_grad = True
            o.node = node
        tape.nodes.append(node)
    return outs[0] if single else outs


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# --- elementwise -----------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _record("add", a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _record("sub", a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return _record("mul", ad * bd, (a, b),
                   lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    out = ad / bd
    return _record("div", out, (a, b),
                   lambda g: (_unbroadcast(g / bd, ad.shape),
                              _unbroadcast(-g * out / bd, bd.shape)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _record("neg", -a.data, (a,), lambda g: (-g,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _record("exp", out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _record("log", np.log(ad), (a,), lambda g: (g / ad,))


def cos(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _record("cos", np.cos(ad), (a,), lambda g: (-g * np.sin(ad),))


def sin(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _record("sin", np.sin(ad), (a,), lambda g: (g * np.cos(ad),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _record("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # split by sign so exp never overflows
    x = a.data
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return _record("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def softmax(a, axis: int = -1) -> Tensor:
    """Softmax along ``axis`` (last by default), computed with max-subtraction."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _record("softmax", out, (a,), vjp)


# --- reductions and shape ops ------------------------------------------------


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001 - mirrors numpy
    a = as_tensor(a)
    shape = a.shape

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _record("sum", np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), vjp)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = np.asarray(a.data.mean(axis=axis, keepdims=keepdims))
    count = a.size // max(out.size, 1)
    shape = a.shape

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, shape).copy(),)

    return _record("mean", out, (a,), vjp)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    src = a.shape
    return _record("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(src),))


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return _record("transpose", a.data.transpose(axes), (a,),
                   lambda g: (g.transpose(inverse),))


def broadcast_to(a, shape) -> Tensor:
    a = as_tensor(a)
    src = a.shape
    return _record("broadcast_to", np.broadcast_to(a.data, shape).copy(), (a,),
                   lambda g: (_unbroadcast(g, src),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record("concat", np.concatenate([t.data for t in tensors], axis=axis), tensors, vjp)


def matmul(a, b) -> Tensor:
    """Batched matrix product with numpy broadcasting over leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul operands must be at least 2-D")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def vjp(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return _record("matmul", ad @ bd, (a, b), vjp)


def temporal_diff(a, axis: int = -2) -> Tensor:
    """First difference along ``axis`` with a zero first slice (shape preserved)."""
    a = as_tensor(a)
    x = np.moveaxis(a.data, axis, 0)
    out = np.zeros_like(x)
    out[1:] = x[1:] - x[:-1]

    def vjp(g):
        g = np.moveaxis(g, axis, 0)
        gx = np.zeros_like(g)
        gx[1:] += g[1:]
        gx[:-1] -= g[1:]
        return (np.moveaxis(gx, 0, axis),)

    return _record("temporal_diff", np.moveaxis(out, 0, axis), (a,), vjp)
