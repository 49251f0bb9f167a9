"""Dense float64 tensors with a reverse-mode tape, plus Adam.

Tensors wrap 2-D numpy arrays. When a :class:`GradTape` is active and any
input of an op requires a gradient, the op is appended to the tape together
with a closure mapping the output gradient to input gradients. Backward
replays the tape in reverse, which is a valid reverse topological order
because ops are recorded as they execute.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

LEAKY_SLOPE = 0.01


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested op."""


class NonFiniteError(FloatingPointError):
    """An op produced NaN or Inf."""


_TAPES: list["GradTape"] = []
_TRACKERS: list["AllocationTracker"] = []
check_finite = True


class Tensor:
    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() on tensor of shape {self.shape}")
        return float(self.data.flat[0])

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

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

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    @property
    def T(self):
        return transpose(self)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(data) -> Tensor:
    return Tensor(data)


def parameter(data, name: str = "") -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


@dataclass
class _Record:
    out: Tensor
    parents: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class GradTape:
    """Records ops executed inside ``with GradTape() as tape:``.

    One tape per training step; not thread-safe.
    """

    def __init__(self):
        self.records: list[_Record] = []

    def __enter__(self) -> "GradTape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.remove(self)

    def gradient(self, loss: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
        """Gradients of scalar ``loss`` w.r.t. ``params``; unused params get zeros."""
        if loss.data.size != 1:
            raise DimensionError("gradient() needs a scalar loss")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for rec in reversed(self.records):
            g = grads.pop(id(rec.out), None)
            if g is None:
                continue
            for parent, pg in zip(rec.parents, rec.backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                prev = grads.get(key)
                grads[key] = pg if prev is None else prev + pg
        out = []
        for p in params:
            g = grads.get(id(p))
            out.append(np.zeros_like(p.data) if g is None else g)
        return out


@dataclass
class AllocationTracker:
    """Collects the shape of every tensor produced by an op while active."""

    shapes: list[tuple[int, ...]] = field(default_factory=list)

    def count_at_least(self, rows: int, cols: int) -> int:
        return sum(1 for s in self.shapes if s[0] >= rows and s[1] >= cols)

    @property
    def peak_elements(self) -> int:
        return max((int(np.prod(s)) for s in self.shapes), default=0)

    @property
    def peak_bytes(self) -> int:
        return 8 * self.peak_elements


@contextmanager
def track_allocations() -> Iterator[AllocationTracker]:
    tracker = AllocationTracker()
    _TRACKERS.append(tracker)
    try:
        yield tracker
    finally:
        _TRACKERS.remove(tracker)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    if check_finite and not np.isfinite(data).all():
        raise NonFiniteError("op produced non-finite values")
    if _TRACKERS:
        for tr in _TRACKERS:
            tr.shapes.append(data.shape)
    needs = bool(_TAPES) and any(p.requires_grad for p in parents)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = needs
    out.name = ""
    if needs:
        _TAPES[-1].records.append(_Record(out, parents, backward))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    for axis, (gs, s) in enumerate(zip(g.shape, shape)):
        if s == 1 and gs != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    for x, y in zip(a.shape, b.shape):
        if x != y and x != 1 and y != 1:
            raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


# ---------------------------------------------------------------- linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions differ {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _make(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def transpose(a: Tensor) -> Tensor:
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,))


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")
    ad, bd = a.data, b.data
    return _make(
        ad * bd, (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def scale(a: Tensor, c: float) -> Tensor:
    return _make(a.data * c, (a,), lambda g: (g * c,))


def mask_rows(a: Tensor, mask) -> Tensor:
    """Zero the rows of ``a`` where ``mask`` is 0 (the ``m ⊙ X`` selection)."""
    m = np.asarray(mask.data if isinstance(mask, Tensor) else mask, dtype=np.float64).reshape(-1)
    if m.shape[0] != a.shape[0]:
        raise DimensionError(f"mask of length {m.shape[0]} for {a.shape[0]} rows")
    col = m[:, None]
    return _make(a.data * col, (a,), lambda g: (g * col,))


def mask_cols(a: Tensor, mask) -> Tensor:
    m = np.asarray(mask.data if isinstance(mask, Tensor) else mask, dtype=np.float64).reshape(-1)
    if m.shape[0] != a.shape[1]:
        raise DimensionError(f"mask of length {m.shape[0]} for {a.shape[1]} columns")
    row = m[None, :]
    return _make(a.data * row, (a,), lambda g: (g * row,))


def elementwise(op: str, a: Tensor, b) -> Tensor:
    b = _lift(b)
    if op == "add":
        return add(a, b)
    if op == "sub":
        return sub(a, b)
    if op == "mul":
        return mul(a, b)
    if op == "mask":
        return mask_rows(a, b)
    raise ValueError(f"unknown elementwise op {op!r}")


def take_rows(a: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.intp)
    n, shape = a.shape[0], a.shape

    def back(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return _make(a.data[idx], (a,), back)


def scatter_rows(a: Tensor, idx, n_rows: int) -> Tensor:
    """Place the rows of ``a`` at positions ``idx`` of an ``n_rows``-row zero matrix."""
    idx = np.asarray(idx, dtype=np.intp)
    if idx.shape[0] != a.shape[0]:
        raise DimensionError("scatter_rows: index count differs from row count")
    out = np.zeros((n_rows, a.shape[1]))
    out[idx] = a.data
    return _make(out, (a,), lambda g: (g[idx],))


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    sizes = np.cumsum([p.shape[0] for p in parts])[:-1]
    return _make(np.vstack([p.data for p in parts]), tuple(parts), lambda g: tuple(np.split(g, sizes)))


def sum_rows(a: Tensor) -> Tensor:
    """Column sums, as a 1×n row."""
    shape = a.shape
    return _make(a.data.sum(axis=0, keepdims=True), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def max_rows(a: Tensor) -> Tensor:
    """Columnwise max over rows, as a 1×n row; gradient goes to the first argmax."""
    if a.shape[0] == 0:
        raise DimensionError("max over zero rows")
    arg = a.data.argmax(axis=0)
    cols = np.arange(a.shape[1])
    shape = a.shape

    def back(g):
        full = np.zeros(shape)
        full[arg, cols] = g[0]
        return (full,)

    return _make(a.data[arg, cols][None, :], (a,), back)


def mean_all(a: Tensor) -> Tensor:
    n, shape = a.data.size, a.shape
    return _make(np.array([[a.data.mean()]]), (a,), lambda g: (np.full(shape, g[0, 0] / n),))


# ------------------------------------------------------------------ activations


def sigmoid(x: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _make(y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _make(y, (x,), lambda g: (g * (1.0 - y * y),))


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    d = np.where(x.data > 0, 1.0, slope)
    return _make(x.data * d, (x,), lambda g: (g * d,))


def softmax_rows(x: Tensor) -> Tensor:
    if x.shape[1] < 1:
        raise DimensionError("softmax over zero columns")
    e = np.exp(x.data - x.data.max(axis=1, keepdims=True))
    y = e / e.sum(axis=1, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return _make(y, (x,), back)


_ACTIVATIONS = {
    "sigmoid": sigmoid,
    "tanh": tanh,
    "leaky_relu": leaky_relu,
    "softmax_rows": softmax_rows,
}


def activation(kind: str, x: Tensor) -> Tensor:
    try:
        return _ACTIVATIONS[kind](x)
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None


# ------------------------------------------------------------------------ losses


def bce(probs: Tensor, labels, eps: float = 1e-12) -> Tensor:
    """Mean binary cross-entropy with probabilities clamped to [eps, 1-eps]."""
    y = np.asarray(labels, dtype=np.float64).reshape(probs.shape)
    p = np.clip(probs.data, eps, 1.0 - eps)
    loss = -(y * np.log(p) + (1.0 - y) * np.log1p(-p)).mean()
    inside = (probs.data > eps) & (probs.data < 1.0 - eps)
    n = p.size

    def back(g):
        return (g[0, 0] * inside * (p - y) / (p * (1.0 - p)) / n,)

    return _make(np.array([[loss]]), (probs,), back)


# -------------------------------------------------------------------------- Adam


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(state: AdamState, params: Sequence[Tensor], grads: Sequence[np.ndarray]) -> None:
    """One bias-corrected Adam update, in place on ``params``."""
    if len(params) != len(grads):
        raise DimensionError("params and grads differ in length")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.data.shape:
            raise DimensionError(f"grad shape {g.shape} for param {p.name or ''} {p.data.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# -------------------------------------------------------------- gradient checking


def gradient_errors(
    f: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-4
) -> list[float]:
    """Per-parameter max of |analytic - central difference| / max(1, |analytic|)."""
    if h <= 0:
        raise ValueError("step must be positive")
    with GradTape() as tape:
        loss = f()
    analytic = tape.gradient(loss, params)
    errors = []
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = ga.reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f().item()
            flat[i] = orig - h
            down = f().item()
            flat[i] = orig
            if not (math.isfinite(up) and math.isfinite(down)):
                raise NonFiniteError("objective is not finite at a perturbed point")
            num = (up - down) / (2.0 * h)
            worst = max(worst, abs(gflat[i] - num) / max(1.0, abs(gflat[i])))
        errors.append(worst)
    return errors


def finite_diff_check(f: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-4) -> float:
    return max(gradient_errors(f, params, h), default=0.0)


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int | None = None) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in if fan_in is not None else shape[0])
    return rng.uniform(-bound, bound, size=shape)
