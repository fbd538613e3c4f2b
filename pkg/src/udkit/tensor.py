"""A small reverse-mode autodiff over float64 numpy arrays.

Only the operations the encoder and task heads need are provided. Each op
records its inputs and a closure that pushes the output gradient back to
them; ``Tensor.backward`` replays the closures in reverse topological order.
"""

from __future__ import annotations

import contextlib
import struct
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import erf

DTYPE = np.float64
_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad=None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError(f"backward() without a gradient needs a scalar, got {self.shape}")
            grad = np.ones_like(self.data)
        order = _topological(self)
        _accumulate(self, np.asarray(grad, dtype=DTYPE))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if node._parents:
                    # interior gradients are not needed after propagation
                    node.grad = None

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)


class Parameter(Tensor):
    """A trainable leaf tensor with an optimizer group label."""

    __slots__ = ("group", "decay", "name")

    def __init__(self, data, group: str, decay: bool = True, name: str = ""):
        super().__init__(np.array(data, dtype=DTYPE), requires_grad=True)
        if group not in ("encoder", "task"):
            raise ValueError(f"unknown parameter group {group!r}")
        self.group = group
        self.decay = decay
        self.name = name

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape}, group={self.group!r})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _topological(root: Tensor) -> list[Tensor]:
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
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if g.shape != t.data.shape:
        g = _unbroadcast(g, t.data.shape)
    if t.grad is None:
        t.grad = np.array(g, dtype=DTYPE)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _make(data, parents: Sequence[Tensor], backward) -> Tensor:
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, True, tuple(parents), backward)
    return Tensor(data)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _make(a.data + b.data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: _accumulate(a, -g))


def mul(a, b) -> Tensor:
    """Elementwise product; a python float acts as scalar scaling."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")

    def backward(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _make(a.data * b.data, (a, b), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    return _make(a.data * factor, (a,), lambda g: _accumulate(a, g * factor))


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))

    def backward(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x.data**2)
        _accumulate(x, g * (cdf + x.data * pdf))

    return _make(x.data * cdf, (x,), backward)


def dropout(x: Tensor, p: float, rng: Optional[np.random.Generator], training: bool = True, mask=None) -> Tensor:
    """Inverted dropout. ``mask`` (keep=True) overrides sampling."""
    if not training or (p == 0.0 and mask is None):
        return x
    if mask is None:
        mask = rng.random(x.shape) >= p
    keep = mask.astype(DTYPE) / (1.0 - p)
    return _make(x.data * keep, (x,), lambda g: _accumulate(x, g * keep))


# linear algebra and shape


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(g):
        if a.requires_grad:
            _accumulate(a, np.matmul(g, np.swapaxes(b.data, -1, -2)))
        if b.requires_grad:
            _accumulate(b, np.matmul(np.swapaxes(a.data, -1, -2), g))

    return _make(out, (a, b), backward)


def reshape(a: Tensor, shape) -> Tensor:
    return _make(a.data.reshape(shape), (a,), lambda g: _accumulate(a, g.reshape(a.shape)))


def transpose(a: Tensor, axes=None) -> Tensor:
    inverse = None if axes is None else np.argsort(axes)
    return _make(
        np.transpose(a.data, axes), (a,), lambda g: _accumulate(a, np.transpose(g, inverse))
    )


def take(a: Tensor, index) -> Tensor:
    """Basic or integer-array indexing; repeated indices accumulate."""
    if isinstance(index, Tensor):
        raise TypeError("index with numpy arrays or python ints, not tensors")

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        _accumulate(a, full)

    return _make(a.data[index], (a,), backward)


def embedding(weight: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= weight.shape[0]):
        raise ValueError(f"embedding: ids outside [0, {weight.shape[0]})")
    return take(weight, ids)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.shape for t in tensors]
        raise ValueError(f"concat: incompatible shapes {shapes}") from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                _accumulate(t, np.take(g, np.arange(lo, hi), axis=axis))

    return _make(out, tensors, backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return concat([reshape(t, t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors], axis)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.shape))

    return _make(out, (a,), backward)


def mean(a: Tensor, axis=None) -> Tensor:
    count = a.data.size if axis is None else a.shape[axis]
    return scale(tsum(a, axis), 1.0 / count)


# normalisation


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        _accumulate(x, out * (g - (g * out).sum(axis=axis, keepdims=True)))

    return _make(out, (x,), backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(g):
        _accumulate(x, g - np.exp(out) * g.sum(axis=axis, keepdims=True))

    return _make(out, (x,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-12) -> Tensor:
    """Normalise over the last axis, then apply ``gain`` and ``bias``."""
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        if gain.requires_grad:
            _accumulate(gain, g * xhat)
        if bias.requires_grad:
            _accumulate(bias, g)
        if x.requires_grad:
            gx = g * gain.data
            d = x.shape[-1]
            _accumulate(
                x,
                inv
                * (gx - gx.sum(-1, keepdims=True) / d - xhat * (gx * xhat).sum(-1, keepdims=True) / d),
            )

    return _make(out, (x, gain, bias), backward)


def scalar_mix(layers: Sequence[Tensor], weights: Tensor, gamma: Tensor, dropped=None) -> Tensor:
    """``gamma * sum_i softmax(w)_i * layers[i]`` with dropped layers' weights at -inf.

    ``dropped`` is a boolean mask over layers; dropped layers get exactly
    zero mixing weight and their weight parameter receives zero gradient.
    """
    L = len(layers)
    if weights.shape != (L,):
        raise ValueError(f"scalar_mix: {L} layers but weights of shape {weights.shape}")
    alive = np.ones(L, dtype=bool) if dropped is None else ~np.asarray(dropped, dtype=bool)
    if not alive.any():
        raise ValueError("scalar_mix: every layer is dropped")
    w = np.where(alive, weights.data, -np.inf)
    e = np.exp(w - w[alive].max())
    probs = e / e.sum()
    stacked = np.stack([t.data for t in layers])
    mixed = np.tensordot(probs, stacked, axes=1)
    c = float(gamma.data)
    out = c * mixed

    def backward(g):
        if gamma.requires_grad:
            _accumulate(gamma, np.asarray((g * mixed).sum()).reshape(gamma.shape))
        if weights.requires_grad:
            # d out / d w_k = c * p_k * (layer_k - mixed)
            dots = np.array([(g * t).sum() for t in stacked])
            gp = c * dots
            _accumulate(weights, probs * (gp - (gp * probs).sum()))
        for p, t in zip(probs, layers):
            if t.requires_grad and p != 0.0:
                _accumulate(t, (c * p) * g)

    return _make(out, (*layers, weights, gamma), backward)


def mixing_weights(weights: np.ndarray, dropped=None) -> np.ndarray:
    w = np.asarray(weights, dtype=DTYPE)
    alive = np.ones(len(w), dtype=bool) if dropped is None else ~np.asarray(dropped, dtype=bool)
    w = np.where(alive, w, -np.inf)
    e = np.exp(w - w[alive].max())
    return e / e.sum()


# losses


def label_smoothed_cross_entropy(logits: Tensor, gold, epsilon: float = 0.0, valid=None) -> Tensor:
    """Mean over rows of ``-sum_k q_k log p_k`` with ``q = (1-eps) onehot + eps/K``.

    ``valid`` (rows x K booleans) removes candidates from both the softmax
    and the smoothing distribution; K is then the per-row valid count.
    """
    if logits.ndim == 1:
        logits = reshape(logits, (1, -1))
    gold = np.atleast_1d(np.asarray(gold, dtype=np.int64))
    rows, K = logits.shape
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"label smoothing must be in [0, 1), got {epsilon}")
    if gold.shape != (rows,):
        raise ValueError(f"{rows} logit rows but {gold.shape[0]} gold labels")
    if K < 2:
        raise ValueError("cross entropy needs at least two classes")
    if gold.size and (gold.min() < 0 or gold.max() >= K):
        raise ValueError(f"gold index outside [0, {K})")
    valid = np.ones((rows, K), dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    if not valid[np.arange(rows), gold].all():
        raise ValueError("gold index falls on an invalid candidate")
    z = np.where(valid, logits.data, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    logz = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = np.where(valid, z - logz, 0.0)
    n_valid = valid.sum(axis=1, keepdims=True)
    q = np.where(valid, epsilon / n_valid, 0.0)
    q[np.arange(rows), gold] += 1.0 - epsilon
    loss = -(q * logp).sum() / rows
    p = np.where(valid, np.exp(logp), 0.0)

    def backward(g):
        _accumulate(logits, g * (p - q) / rows)

    return _make(loss, (logits,), backward)


def smoothed_targets(gold: int, K: int, epsilon: float) -> np.ndarray:
    q = np.full(K, epsilon / K)
    q[gold] += 1.0 - epsilon
    return q


# optimisation


class Adam:
    """Adam with decoupled weight decay and per-group learning rates.

    A group whose learning rate is exactly zero is skipped outright, so its
    parameters and moment estimates stay bit-identical.
    """

    def __init__(self, params: Iterable[Parameter], betas=(0.9, 0.99), eps: float = 1e-8, weight_decay: float = 0.01):
        self.params = list(params)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.state: dict[int, tuple[np.ndarray, np.ndarray, int]] = {}

    def step(self, lr) -> None:
        """``lr`` is a float or a mapping from group label to float."""
        for p in self.params:
            rate = lr[p.group] if isinstance(lr, dict) else lr
            if rate == 0.0 or p.grad is None:
                continue
            m, v, t = self.state.get(id(p), (np.zeros_like(p.data), np.zeros_like(p.data), 0))
            t += 1
            m = self.beta1 * m + (1.0 - self.beta1) * p.grad
            v = self.beta2 * v + (1.0 - self.beta2) * p.grad**2
            self.state[id(p)] = (m, v, t)
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            if p.decay and self.weight_decay:
                p.data *= 1.0 - rate * self.weight_decay
            p.data -= rate * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def global_grad_norm(params: Iterable[Tensor]) -> float:
    return float(np.sqrt(sum(float((p.grad**2).sum()) for p in params if p.grad is not None)))


def clip_gradients(params: Iterable[Tensor], max_norm: float) -> float:
    """Rescale all gradients so their joint L2 norm is at most ``max_norm``.

    Returns the factor applied (1.0 when no clipping was needed)."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    params = list(params)
    norm = global_grad_norm(params)
    if norm <= max_norm:
        return 1.0
    factor = max_norm / norm
    for p in params:
        if p.grad is not None:
            p.grad *= factor
    return factor


# checkpoints

MAGIC = b"UDK1"


def save_arrays(path, arrays: dict[str, np.ndarray]) -> None:
    """Write named arrays as float32 in the ``UDK1`` flat binary layout."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.asarray(arr)
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_arrays(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] != MAGIC:
        raise ValueError(f"{path}: not a UDK1 checkpoint")
    try:
        pos = 4
        (count,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        arrays = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            name = buf[pos : pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            shape = struct.unpack_from(f"<{rank}q", buf, pos)
            pos += 8 * rank
            size = int(np.prod(shape, dtype=np.int64))
            arr = np.frombuffer(buf, dtype="<f4", count=size, offset=pos).reshape(shape)
            pos += 4 * size
            arrays[name] = arr.astype(DTYPE)
    except (struct.error, ValueError):
        raise ValueError(f"{path}: truncated or corrupt UDK1 checkpoint") from None
    if pos != len(buf):
        raise ValueError(f"{path}: {len(buf) - pos} trailing bytes")
    return arrays
