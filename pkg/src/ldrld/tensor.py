"""Minimal dense float64 tensors with tape-based reverse-mode differentiation.

Shapes are restricted to scalars ``()``, vectors ``(n,)`` and matrices
``(m, n)``: exactly what an MLP forward pass and the distillation losses
need.  Operations record onto the currently active :class:`Tape`; calling
``backward`` on a scalar loss replays the tape once in reverse order and
accumulates gradients into every tensor on the differentiation path.

Every forward operation verifies that its result is finite.  NaN or Inf
values (overflow, log of zero) raise :class:`NonFiniteError` immediately
instead of propagating silently.
"""

from __future__ import annotations

import threading

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "NonFiniteError",
    "as_tensor",
    "matmul",
    "exp",
    "log",
    "softplus",
    "relu",
    "logsumexp",
    "gather",
    "take_row",
    "softmax_masked",
    "softplus_np",
    "logsumexp_np",
]


class NonFiniteError(FloatingPointError):
    """A forward operation produced NaN or Inf."""


_state = threading.local()


def _active_tape() -> "Tape | None":
    return getattr(_state, "tape", None)


class _Record:
    """One recorded primitive: output plus per-parent gradient closures."""

    __slots__ = ("out", "parents")

    def __init__(self, out: "Tensor", parents: tuple) -> None:
        self.out = out
        self.parents = parents  # tuple of (Tensor, grad_fn)


class Tape:
    """Ordered log of primitive operations for one forward pass.

    Use as a context manager; operations executed inside the block record
    themselves when any operand requires gradients.  A tape and its tensors
    belong to a single thread; independent tapes may run in parallel threads.
    """

    def __init__(self) -> None:
        self.records: list[_Record] = []

    def __enter__(self) -> "Tape":
        stack = getattr(_state, "stack", None)
        if stack is None:
            stack = _state.stack = []
        stack.append(self)
        _state.tape = self
        return self

    def __exit__(self, *exc) -> None:
        stack = _state.stack
        stack.pop()
        _state.tape = stack[-1] if stack else None

    def backward(self, loss: "Tensor") -> None:
        """Accumulate dloss/dx into ``x.grad`` for every tensor on the path.

        Records are appended in forward order, so one reversed pass visits
        them in reverse topological order exactly once.
        """
        if loss.shape != ():
            raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
        loss.grad = np.ones((), dtype=np.float64)
        for rec in reversed(self.records):
            g = rec.out.grad
            if g is None:
                continue
            for parent, grad_fn in rec.parents:
                if not parent.requires_grad:
                    continue
                contrib = grad_fn(g)
                if parent.grad is None:
                    parent.grad = contrib
                else:
                    parent.grad = parent.grad + contrib


class Tensor:
    """Immutable float64 array plus gradient slot.

    ``data`` is a contiguous numpy array of shape ``()``, ``(n,)`` or
    ``(m, n)``.  Tensors are not mutated after construction except for
    gradient accumulation (and the optimizer swapping parameter buffers
    between steps).
    """

    __slots__ = ("data", "requires_grad", "grad", "tape")

    # keep numpy from absorbing Tensor operands; mixed arithmetic must come
    # back through the reflected operators below
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False) -> None:
        # NB: np.ascontiguousarray would promote 0-d arrays to shape (1,)
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 0 and not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        if arr.ndim > 2:
            raise ValueError(f"rank {arr.ndim} tensors are not supported")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.data)

    def __float__(self) -> float:
        return self.item()

    def sum(self) -> "Tensor":
        return _sum(self)

    def backward(self) -> None:
        if self.tape is None:
            raise RuntimeError("tensor is not connected to a tape")
        self.tape.backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; non-Tensor operands are treated as constants
    def __add__(self, other):
        return _add(self, other)

    def __radd__(self, other):
        return _add(self, other)

    def __sub__(self, other):
        return _add(self, _neg_operand(other))

    def __rsub__(self, other):
        return _add(neg(self), other)

    def __mul__(self, other):
        return _mul(self, other)

    def __rmul__(self, other):
        return _mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(value, requires_grad: bool = False) -> Tensor:
    """Wrap arrays or numbers as a Tensor; passes existing tensors through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=np.float64), requires_grad=requires_grad)


def _neg_operand(value):
    if isinstance(value, Tensor):
        return neg(value)
    return -np.asarray(value, dtype=np.float64)


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{op} produced a non-finite value")
    return arr


def _emit(op: str, out_data: np.ndarray, parents: list) -> Tensor:
    """Build the output tensor and record it if differentiation is live."""
    _check_finite(out_data, op)
    out = Tensor(out_data)
    tape = _active_tape()
    if tape is not None:
        live = tuple((p, fn) for p, fn in parents if p.requires_grad)
        if live:
            out.requires_grad = True
            out.tape = tape
            tape.records.append(_Record(out, live))
    return out


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    if grad.shape == shape:
        return grad
    if shape == ():
        return np.asarray(grad.sum(), dtype=np.float64)
    # row-vector bias against a matrix: collapse the leading axis
    if len(shape) == 1 and grad.ndim == 2 and grad.shape[1] == shape[0]:
        return grad.sum(axis=0)
    raise ValueError(f"cannot reduce gradient of shape {grad.shape} to {shape}")


def _binary_parents(a, b, da, db) -> tuple[list, np.ndarray, np.ndarray]:
    """Split operands into (parents, a_data, b_data) treating non-tensors as constants."""
    parents = []
    if isinstance(a, Tensor):
        a_data = a.data
        parents.append((a, da(a_data)))
    else:
        a_data = np.asarray(a, dtype=np.float64)
    if isinstance(b, Tensor):
        b_data = b.data
        parents.append((b, db(b_data)))
    else:
        b_data = np.asarray(b, dtype=np.float64)
    return parents, a_data, b_data


def _add(a, b) -> Tensor:
    def grad_for(operand_data):
        shape = operand_data.shape
        return lambda g: _reduce_to(g, shape)

    parents, a_data, b_data = _binary_parents(a, b, grad_for, grad_for)
    return _emit("add", a_data + b_data, parents)


def _mul(a, b) -> Tensor:
    parents = []
    a_data = a.data if isinstance(a, Tensor) else np.asarray(a, dtype=np.float64)
    b_data = b.data if isinstance(b, Tensor) else np.asarray(b, dtype=np.float64)
    if isinstance(a, Tensor):
        shape = a_data.shape
        parents.append((a, lambda g, o=b_data, s=shape: _reduce_to(g * o, s)))
    if isinstance(b, Tensor):
        shape = b_data.shape
        parents.append((b, lambda g, o=a_data, s=shape: _reduce_to(g * o, s)))
    return _emit("mul", a_data * b_data, parents)


def neg(a: Tensor) -> Tensor:
    return _emit("neg", -a.data, [(a, lambda g: -g)])


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two rank-2 tensors."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul requires matrices, got shapes {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = a.data @ b.data
    parents = [
        (a, lambda g, o=b.data: g @ o.T),
        (b, lambda g, o=a.data: o.T @ g),
    ]
    return _emit("matmul", out, parents)


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _emit("exp", out, [(a, lambda g, o=out: g * o)])


def log(a: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return _emit("log", out, [(a, lambda g, x=a.data: g / x)])


def softplus_np(x: np.ndarray) -> np.ndarray:
    """Stable log(1 + e^x), also used for constant-side loss terms."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def softplus(a: Tensor) -> Tensor:
    out = softplus_np(a.data)

    def grad(g, x=a.data):
        return g / (1.0 + np.exp(-x))  # sigmoid(x)

    return _emit("softplus", out, [(a, grad)])


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)
    return _emit("relu", out, [(a, lambda g, x=a.data: g * (x > 0.0))])


def _sum(a: Tensor) -> Tensor:
    shape = a.shape
    return _emit(
        "sum",
        np.asarray(a.data.sum(), dtype=np.float64),
        [(a, lambda g, s=shape: np.broadcast_to(g, s).astype(np.float64))],
    )


def logsumexp_np(x: np.ndarray) -> np.ndarray:
    """Stable log-sum-exp of a vector, with the max subtracted before exp."""
    x = np.asarray(x, dtype=np.float64)
    m = x.max()
    return m + np.log(np.exp(x - m).sum())


def logsumexp(a: Tensor) -> Tensor:
    """log(sum(exp(a))) over a vector; gradient is the softmax of ``a``."""
    if a.data.ndim != 1 or a.data.size == 0:
        raise ValueError(f"logsumexp requires a non-empty vector, got shape {a.shape}")
    out = logsumexp_np(a.data)

    def grad(g, x=a.data, lse=out):
        return g * np.exp(x - lse)

    return _emit("logsumexp", np.asarray(out, dtype=np.float64), [(a, grad)])


def gather(a: Tensor, indices) -> Tensor:
    """Select entries of a vector by index; repeated indices are allowed."""
    idx = np.asarray(indices, dtype=np.int64)
    if a.data.ndim != 1:
        raise ValueError(f"gather requires a vector, got shape {a.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.data.size):
        raise IndexError(f"gather index out of range for length {a.data.size}")
    out = a.data[idx]

    def grad(g, n=a.data.size, idx=idx):
        full = np.zeros(n, dtype=np.float64)
        np.add.at(full, idx, g)
        return full

    return _emit("gather", out, [(a, grad)])


def take_row(a: Tensor, i: int) -> Tensor:
    """Row ``i`` of a matrix as a vector."""
    if a.data.ndim != 2:
        raise ValueError(f"take_row requires a matrix, got shape {a.shape}")
    if not 0 <= i < a.shape[0]:
        raise IndexError(f"row {i} out of range for {a.shape[0]} rows")
    out = a.data[i].copy()

    def grad(g, shape=a.shape, i=i):
        full = np.zeros(shape, dtype=np.float64)
        full[i] = g
        return full

    return _emit("take_row", out, [(a, grad)])


def softmax_masked(z, mask, temperature: float) -> Tensor:
    """Temperature softmax over the entries of ``z`` selected by ``mask``.

    Excluded entries receive probability exactly 0 and no gradient; the
    normalization runs only over the selected set, stabilized by subtracting
    the selected maximum.
    """
    t = as_tensor(z)
    if t.data.ndim != 1:
        raise ValueError(f"softmax_masked requires a vector, got shape {t.shape}")
    sel = np.asarray(mask, dtype=bool)
    if sel.shape != t.data.shape:
        raise ValueError(f"mask shape {sel.shape} does not match input shape {t.shape}")
    if not sel.any():
        raise ValueError("softmax_masked requires at least one selected entry")
    if not temperature > 0.0:
        raise ValueError(f"temperature must be > 0, got {temperature}")

    scaled = t.data[sel] * (1.0 / temperature)
    e = np.exp(scaled - scaled.max())
    p_sel = e / e.sum()
    out = np.zeros_like(t.data)
    out[sel] = p_sel

    def grad(g, p=out, sel=sel, tau=temperature):
        # restricted softmax Jacobian: dp_i/dz_j = p_i (1[i==j] - p_j) / tau
        gm = g[sel]
        pm = p[sel]
        inner = (gm * pm).sum()
        full = np.zeros_like(p)
        full[sel] = pm * (gm - inner) / tau
        return full

    return _emit("softmax_masked", out, [(t, grad)])
