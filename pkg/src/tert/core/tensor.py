"""Minimal tensor type with reverse-mode automatic differentiation.

Tensors wrap numpy arrays (float32 by default, float64 when a caller builds a
64-bit reference graph for gradient checking). Operations record themselves on
the innermost active :class:`Tape`; ``backward`` replays the tape in reverse
and accumulates gradients on every ``requires_grad`` leaf. A tape is single
use: running backward twice raises :class:`TapeConsumedError`.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float32


class ShapeError(ValueError):
    """Raised when operation inputs do not conform."""


class NonFiniteError(FloatingPointError):
    """Raised when an operation receives or produces NaN/Inf values."""


class TapeConsumedError(RuntimeError):
    """Raised when backward is called on an already-consumed tape."""


_TAPE_STACK: list["Tape"] = []


class Tensor:
    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def grad_or_zero(self) -> np.ndarray:
        if self.grad is None:
            return np.zeros_like(self.data)
        return self.grad

    def zero_grad(self) -> None:
        self.grad = None

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of operations for one forward pass."""

    def __init__(self):
        self.nodes = []  # (out, inputs, backward_fn)
        self.consumed = False

    def record(self, out: Tensor, inputs, backward_fn) -> None:
        self.nodes.append((out, inputs, backward_fn))

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (int, float)):
        # keep python scalars at the default precision so they do not promote
        # float32 arrays to float64
        return Tensor(np.asarray(x, dtype=DEFAULT_DTYPE))
    return Tensor(x)


def _check_finite(name: str, *arrays: np.ndarray) -> None:
    for arr in arrays:
        # single-pass detector: any NaN propagates to the sum, and +inf/-inf
        # yield inf or nan (inf + -inf = nan), so the scalar test is exhaustive
        if not np.isfinite(np.sum(arr)):
            raise NonFiniteError(f"{name}: non-finite values encountered")


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to the shape of a broadcast input."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _make(data: np.ndarray, inputs, backward_fn, name: str) -> Tensor:
    _check_finite(name, data)
    requires = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=requires, dtype=data.dtype)
    if requires:
        tape = _active_tape()
        if tape is not None:
            tape.record(out, inputs, backward_fn)
    return out


# ---------------------------------------------------------------------------
# elementwise / arithmetic ops


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast")
    return _make(data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} do not broadcast")
    return _make(data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not broadcast")
    return _make(
        data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def exp(a) -> Tensor:
    a = _as_tensor(a)
    data = np.exp(a.data)
    return _make(data, (a,), lambda g: (g * data,), "exp")


def log(a) -> Tensor:
    a = _as_tensor(a)
    _check_finite("log", a.data)
    data = np.log(a.data)
    return _make(data, (a,), lambda g: (g / a.data,), "log")


def square(a) -> Tensor:
    a = _as_tensor(a)
    return _make(a.data * a.data, (a,), lambda g: (g * 2.0 * a.data,), "square")


def elu(a, alpha: float = 1.0) -> Tensor:
    a = _as_tensor(a)
    pos = a.data > 0.0
    neg_part = alpha * np.expm1(np.minimum(a.data, 0.0))
    data = np.where(pos, a.data, neg_part)
    return _make(data, (a,),
                 lambda g: (np.where(pos, g, g * (neg_part + alpha)),), "elu")


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp to constant bounds; gradient passes only inside the bounds."""
    a = _as_tensor(a)
    data = np.clip(a.data, lo, hi)
    inside = ((a.data > lo) & (a.data < hi)).astype(a.data.dtype)
    return _make(data, (a,), lambda g: (g * inside,), "clip")


def minimum(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    take_a = a.data <= b.data
    data = np.where(take_a, a.data, b.data)
    return _make(
        data,
        (a, b),
        lambda g: (
            _unbroadcast(g * take_a, a.shape),
            _unbroadcast(g * ~take_a, b.shape),
        ),
        "minimum",
    )


# ---------------------------------------------------------------------------
# reductions and reshaping


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _make(np.asarray(data), (a,), back, "sum")


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else a.data.shape[axis]

    def back(g):
        gg = g / count
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _make(np.asarray(data), (a,), back, "mean")


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    inv = np.argsort(axes)
    return _make(
        np.ascontiguousarray(a.data.transpose(axes)),
        (a,),
        lambda g: (g.transpose(inv),),
        "transpose",
    )


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return _make(data, tuple(tensors), back, "concat")


def take(a, indices, axis: int = 0) -> Tensor:
    """Gather slices along an axis (integer index array)."""
    a = _as_tensor(a)
    idx = np.asarray(indices, dtype=np.int64)
    data = np.take(a.data, idx, axis=axis)
    # plain scatter assignment is much faster than add.at and is exact
    # whenever no index repeats
    unique = idx.ndim == 1 and len(np.unique(idx)) == idx.size

    def back(g):
        ga = np.zeros_like(a.data)
        where = tuple([slice(None)] * axis + [idx])
        if unique:
            ga[where] = g
        else:
            np.add.at(ga, where, g)
        return (ga,)

    return _make(data, (a,), back, "take")


def embedding(table, indices) -> Tensor:
    """Row lookup into an embedding table (2-d parameter)."""
    table = _as_tensor(table)
    if table.data.ndim != 2:
        raise ShapeError(f"embedding: table must be 2-d, got {table.shape}")
    return take(table, indices, axis=0)


# ---------------------------------------------------------------------------
# linear algebra and neural-net ops


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim < 1 or b.data.ndim < 2 or a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")

    if a.data.ndim > 2 and b.data.ndim == 2:
        # collapse leading axes into one GEMM instead of a batched small-matmul
        # loop; the weight gradient then needs no unbroadcast sum
        k, n = b.data.shape
        lead = a.data.shape[:-1]
        a2d = a.data.reshape(-1, k)
        data = (a2d @ b.data).reshape(*lead, n)

        def back(g):
            g2d = g.reshape(-1, n)
            ga = (g2d @ b.data.T).reshape(a.data.shape)
            gb = a2d.T @ g2d
            return (ga, gb)

        return _make(data, (a, b), back, "matmul")

    data = a.data @ b.data

    def back(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))

    return _make(data, (a, b), back, "matmul")


def softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        return (data * (g - dot),)

    return _make(data, (a,), back, "softmax")


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    a, gain, bias = _as_tensor(a), _as_tensor(gain), _as_tensor(bias)
    if gain.shape != (a.shape[-1],) or bias.shape != (a.shape[-1],):
        raise ShapeError(
            f"layer_norm: gain/bias {gain.shape}/{bias.shape} do not match feature dim {a.shape[-1:]}"
        )
    mean = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    norm = centered * inv
    data = norm * gain.data + bias.data
    n = a.shape[-1]

    def back(g):
        g_norm = g * gain.data
        g_var = (g_norm * centered).sum(axis=-1, keepdims=True) * (-0.5) * inv**3
        g_mean = -(g_norm * inv).sum(axis=-1, keepdims=True) + g_var * (-2.0) * centered.mean(
            axis=-1, keepdims=True
        )
        ga = g_norm * inv + g_var * 2.0 * centered / n + g_mean / n
        ggain = _unbroadcast(g * norm, gain.shape)
        gbias = _unbroadcast(g, bias.shape)
        return (ga, ggain, gbias)

    return _make(data, (a, gain, bias), back, "layer_norm")


def dropout_mask(shape, rate: float, key) -> np.ndarray:
    """Counter-based dropout mask from a (seed, layer_id, step) key."""
    seed, layer_id, step = (int(k) & 0xFFFFFFFFFFFFFFFF for k in key)
    packed = np.array([seed, ((layer_id << 32) ^ step) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=packed))
    keep = rng.random(shape, dtype=np.float32) >= rate
    return keep.astype(np.float32) * np.float32(1.0 / (1.0 - rate))


def dropout(a, rate: float, key, training: bool) -> Tensor:
    """Inverted dropout; identity in eval mode. ``key`` = (seed, layer_id, step)."""
    a = _as_tensor(a)
    if not training or rate <= 0.0:
        return a
    mask = dropout_mask(a.shape, rate, key).astype(a.data.dtype)
    return _make(a.data * mask, (a,), lambda g: (g * mask,), "dropout")


def mse(pred, target) -> Tensor:
    """Mean squared error over all elements (scalar)."""
    pred, target = _as_tensor(pred), _as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse: shapes {pred.shape} and {target.shape} differ")
    return tmean(square(sub(pred, target)))


_LOG_2PI = float(np.log(2.0 * np.pi))


def gaussian_log_prob(mean, log_std, value) -> Tensor:
    """Diagonal-Gaussian log density, summed over the last axis."""
    mean, log_std, value = _as_tensor(mean), _as_tensor(log_std), _as_tensor(value)
    inv_std = exp(neg(log_std))
    z = mul(sub(value, mean), inv_std)
    per_dim = add(add(mul(square(z), -0.5), neg(log_std)), -0.5 * _LOG_2PI)
    return tsum(per_dim, axis=-1)


# ---------------------------------------------------------------------------
# backward


def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate gradients of ``loss`` onto every reachable requires_grad leaf.

    Consumes the tape; a second call raises :class:`TapeConsumedError`.
    """
    if tape.consumed:
        raise TapeConsumedError("tape already consumed by a previous backward")
    if loss.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    tape.consumed = True
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for out, inputs, backward_fn in reversed(tape.nodes):
        g = grads.pop(id(out), None)
        if g is None:
            continue
        for inp, gi in zip(inputs, backward_fn(g)):
            if not inp.requires_grad:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi.astype(inp.data.dtype, copy=True)
    # whatever is left in grads belongs to leaves; assign each exactly once
    assigned: set[int] = set()
    for _, inputs, _ in tape.nodes:
        for inp in inputs:
            key = id(inp)
            if inp.requires_grad and key in grads and key not in assigned:
                assigned.add(key)
                g = grads[key]
                inp.grad = g if inp.grad is None else inp.grad + g
