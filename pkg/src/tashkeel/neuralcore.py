"""Minimal dense numeric layer with exact reverse-mode gradients.

Matrices are 2-D float arrays; every op records enough on a tape to
backpropagate exactly, and `grad_check` verifies any composed scalar
loss against central finite differences. Kernels are plain numpy; there
is no broadcasting beyond the few shapes the ops define.

Matrices are treated as immutable once produced by an op. Only the
optimizer mutates Parameter values, between steps.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

from tashkeel.errors import NonFiniteError, ShapeError

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable tape recording (inference mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _as_2d(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data)
    if dtype is None:
        dtype = arr.dtype if arr.dtype in (np.float32, np.float64) else np.float64
    arr = np.ascontiguousarray(arr, dtype=dtype)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"matrices are 2-D, got shape {arr.shape}")
    return arr


class Matrix:
    """A 2-D float array, optionally a node in the gradient tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, *, parents=(), backward=None, requires_grad=False,
                 dtype=None):
        self.data = _as_2d(data, dtype)
        if not np.isfinite(self.data).all():
            raise NonFiniteError("matrix contains NaN or Inf")
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or bool(parents)
        self._parents: tuple[Matrix, ...] = parents
        self._backward: Callable[[], None] | None = backward

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 matrix, got {self.shape}")
        return float(self.data[0, 0])

    def backward(self) -> None:
        """Backpropagate from this node, accumulating into leaf grads."""
        order: list[Matrix] = []
        visited = {id(self)}
        stack: list[tuple[Matrix, Iterable[Matrix]]] = [(self, iter(self._parents))]
        while stack:
            node, parents = stack[-1]
            for parent in parents:
                if id(parent) not in visited and parent.requires_grad:
                    visited.add(id(parent))
                    stack.append((parent, iter(parent._parents)))
                    break
            else:
                order.append(node)
                stack.pop()
        if self.grad is None:
            self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()

    def __repr__(self) -> str:
        return f"Matrix({self.rows}x{self.cols}, grad={self.requires_grad})"


class Parameter(Matrix):
    """Named learnable matrix; its gradient persists across one step."""

    __slots__ = ("name",)

    def __init__(self, name: str, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def accumulate(m: Matrix, g: np.ndarray) -> None:
    """Add `g` into `m.grad`, allocating it on first touch."""
    if m.grad is None:
        m.grad = np.zeros_like(m.data)
    m.grad += g


def _tracked(parents: Sequence[Matrix]) -> bool:
    return _GRAD_ENABLED and any(p.requires_grad for p in parents)


def matrix(data, dtype=None) -> Matrix:
    """Wrap raw values as a constant (non-learnable) matrix."""
    return Matrix(data, dtype=dtype)


def zeros(rows: int, cols: int, dtype=np.float64) -> Matrix:
    return Matrix(np.zeros((rows, cols), dtype=dtype))


def matmul(a: Matrix, b: Matrix) -> Matrix:
    if a.cols != b.rows:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data
    if not _tracked((a, b)):
        return Matrix(out_data)
    out = Matrix(out_data, parents=(a, b))

    def backward():
        g = out.grad
        if a.requires_grad:
            accumulate(a, g @ b.data.T)
        if b.requires_grad:
            accumulate(b, a.data.T @ g)

    out._backward = backward
    return out


def add(a: Matrix, b: Matrix) -> Matrix:
    if a.shape != b.shape:
        raise ShapeError(f"add: {a.shape} + {b.shape}")
    out_data = a.data + b.data
    if not _tracked((a, b)):
        return Matrix(out_data)
    out = Matrix(out_data, parents=(a, b))

    def backward():
        if a.requires_grad:
            accumulate(a, out.grad)
        if b.requires_grad:
            accumulate(b, out.grad)

    out._backward = backward
    return out


def add_rowwise(a: Matrix, b: Matrix) -> Matrix:
    """Add the 1xC row vector `b` to every row of `a`."""
    if b.rows != 1 or b.cols != a.cols:
        raise ShapeError(f"add_rowwise: {a.shape} + {b.shape}")
    out_data = a.data + b.data
    if not _tracked((a, b)):
        return Matrix(out_data)
    out = Matrix(out_data, parents=(a, b))

    def backward():
        if a.requires_grad:
            accumulate(a, out.grad)
        if b.requires_grad:
            accumulate(b, out.grad.sum(axis=0, keepdims=True))

    out._backward = backward
    return out


def mul(a: Matrix, b: Matrix) -> Matrix:
    """Elementwise (Hadamard) product."""
    if a.shape != b.shape:
        raise ShapeError(f"mul: {a.shape} * {b.shape}")
    out_data = a.data * b.data
    if not _tracked((a, b)):
        return Matrix(out_data)
    out = Matrix(out_data, parents=(a, b))

    def backward():
        if a.requires_grad:
            accumulate(a, out.grad * b.data)
        if b.requires_grad:
            accumulate(b, out.grad * a.data)

    out._backward = backward
    return out


def scale_rows(a: Matrix, s: Matrix) -> Matrix:
    """Multiply row i of `a` by scalar s[i, 0]."""
    if s.cols != 1 or s.rows != a.rows:
        raise ShapeError(f"scale_rows: {a.shape} * {s.shape}")
    out_data = a.data * s.data
    if not _tracked((a, s)):
        return Matrix(out_data)
    out = Matrix(out_data, parents=(a, s))

    def backward():
        if a.requires_grad:
            accumulate(a, out.grad * s.data)
        if s.requires_grad:
            accumulate(s, (out.grad * a.data).sum(axis=1, keepdims=True))

    out._backward = backward
    return out


def concat_cols(a: Matrix, b: Matrix) -> Matrix:
    if a.rows != b.rows:
        raise ShapeError(f"concat_cols: {a.shape} | {b.shape}")
    out_data = np.hstack((a.data, b.data))
    if not _tracked((a, b)):
        return Matrix(out_data)
    out = Matrix(out_data, parents=(a, b))
    split = a.cols

    def backward():
        if a.requires_grad:
            accumulate(a, out.grad[:, :split])
        if b.requires_grad:
            accumulate(b, out.grad[:, split:])

    out._backward = backward
    return out


def slice_cols(a: Matrix, start: int, stop: int) -> Matrix:
    if not 0 <= start < stop <= a.cols:
        raise ShapeError(f"slice_cols: [{start}:{stop}] of {a.shape}")
    out_data = a.data[:, start:stop].copy()
    if not _tracked((a,)):
        return Matrix(out_data)
    out = Matrix(out_data, parents=(a,))

    def backward():
        g = np.zeros_like(a.data)
        g[:, start:stop] = out.grad
        accumulate(a, g)

    out._backward = backward
    return out


def sigmoid(a: Matrix) -> Matrix:
    x = a.data
    out_data = np.empty_like(x)
    pos = x >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out_data[~pos] = ex / (1.0 + ex)
    if not _tracked((a,)):
        return Matrix(out_data)
    out = Matrix(out_data, parents=(a,))

    def backward():
        accumulate(a, out.grad * out.data * (1.0 - out.data))

    out._backward = backward
    return out


def tanh(a: Matrix) -> Matrix:
    out_data = np.tanh(a.data)
    if not _tracked((a,)):
        return Matrix(out_data)
    out = Matrix(out_data, parents=(a,))

    def backward():
        accumulate(a, out.grad * (1.0 - out.data * out.data))

    out._backward = backward
    return out


def softmax_rows(a: Matrix) -> Matrix:
    """Row-wise softmax with max subtraction; each row sums to 1."""
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    out_data = ex / ex.sum(axis=1, keepdims=True)
    if not _tracked((a,)):
        return Matrix(out_data)
    out = Matrix(out_data, parents=(a,))

    def backward():
        g = out.grad
        y = out.data
        dot = (g * y).sum(axis=1, keepdims=True)
        accumulate(a, y * (g - dot))

    out._backward = backward
    return out


def sum_all(a: Matrix) -> Matrix:
    out_data = np.array([[a.data.sum()]], dtype=a.data.dtype)
    if not _tracked((a,)):
        return Matrix(out_data)
    out = Matrix(out_data, parents=(a,))

    def backward():
        accumulate(a, np.full_like(a.data, out.grad[0, 0]))

    out._backward = backward
    return out


def take_rows(table: Matrix, ids: np.ndarray) -> Matrix:
    """Gather rows of `table` by integer index (embedding lookup)."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ShapeError(f"take_rows: ids must be 1-D, got shape {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.rows):
        raise ShapeError(
            f"take_rows: index out of range for table with {table.rows} rows"
        )
    out_data = table.data[ids]
    if not _tracked((table,)):
        return Matrix(out_data)
    out = Matrix(out_data, parents=(table,))

    def backward():
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, ids, out.grad)

    out._backward = backward
    return out


def nll_rows(logits: Matrix, targets: np.ndarray) -> Matrix:
    """Per-row negative log-softmax probability of the target index.

    Returns an Rx1 column. Uses a numerically stable log-sum-exp.
    """
    ids = np.asarray(targets, dtype=np.int64)
    if ids.shape != (logits.rows,):
        raise ShapeError(
            f"nll_rows: need one target per row, got {ids.shape} for {logits.shape}"
        )
    if ids.size and (ids.min() < 0 or ids.max() >= logits.cols):
        raise ShapeError(
            f"nll_rows: target index out of range for {logits.cols} classes"
        )
    x = logits.data
    m = x.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(x - m).sum(axis=1))
    picked = x[np.arange(x.shape[0]), ids]
    out_data = (lse - picked).reshape(-1, 1)
    if not _tracked((logits,)):
        return Matrix(out_data)
    out = Matrix(out_data, parents=(logits,))

    def backward():
        probs = np.exp(x - m)
        probs /= probs.sum(axis=1, keepdims=True)
        probs[np.arange(x.shape[0]), ids] -= 1.0
        accumulate(logits, probs * out.grad)

    out._backward = backward
    return out


def cross_entropy(logits: Matrix, targets: np.ndarray,
                  mask: np.ndarray | None = None) -> Matrix:
    """Mean negative log-probability over unmasked rows.

    `targets` holds one class index per row; rows where `mask` is 0 are
    excluded from the mean (padding).
    """
    if mask is None:
        weights = np.full((logits.rows, 1), 1.0 / logits.rows)
    else:
        mask = np.asarray(mask, dtype=logits.data.dtype).reshape(-1, 1)
        if mask.shape[0] != logits.rows:
            raise ShapeError(
                f"cross_entropy: mask length {mask.shape[0]} != rows {logits.rows}"
            )
        total = mask.sum()
        if total == 0:
            raise ShapeError("cross_entropy: mask excludes every position")
        weights = mask / total
    nll = nll_rows(logits, targets)
    return sum_all(scale_rows(nll, matrix(weights, dtype=logits.data.dtype)))


def dropout(a: Matrix, rate: float, rng: np.random.Generator) -> Matrix:
    """Inverted dropout; call only in training mode."""
    if not 0.0 <= rate < 1.0:
        raise ShapeError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return a
    keep = (rng.random(a.shape) >= rate).astype(a.data.dtype) / (1.0 - rate)
    return mul(a, Matrix(keep))


def grad_check(
    f: Callable[[], Matrix],
    params: Sequence[Parameter],
    eps: float = 1e-5,
    sample_size: int = 200,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    `f` rebuilds the scalar loss from the current parameter values on
    every call and must be deterministic. Checks all coordinates when
    there are fewer than `sample_size`, otherwise a seeded sample.
    The error denominator is max(|analytic|, |numeric|, 1e-8).
    """
    for p in params:
        p.zero_grad()
    loss = f()
    if loss.data.size != 1:
        raise ShapeError(f"grad_check needs a scalar loss, got {loss.shape}")
    loss.backward()
    analytic = [p.grad.copy() for p in params]

    sizes = [p.data.size for p in params]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    if total <= sample_size:
        chosen = np.arange(total)
    else:
        chosen = rng.choice(total, size=sample_size, replace=False)

    bounds = np.cumsum([0] + sizes)
    max_rel = 0.0
    for flat_idx in chosen:
        pi = int(np.searchsorted(bounds, flat_idx, side="right") - 1)
        local = int(flat_idx - bounds[pi])
        param = params[pi]
        flat = param.data.reshape(-1)
        saved = flat[local]
        flat[local] = saved + eps
        f_plus = f().item()
        flat[local] = saved - eps
        f_minus = f().item()
        flat[local] = saved
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NonFiniteError("grad_check: non-finite loss during probing")
        numeric = (f_plus - f_minus) / (2.0 * eps)
        a_val = analytic[pi].reshape(-1)[local]
        rel = abs(a_val - numeric) / max(abs(a_val), abs(numeric), 1e-8)
        max_rel = max(max_rel, rel)
    return max_rel


def global_grad_norm(params: Sequence[Parameter]) -> float:
    total = 0.0
    for p in params:
        g = p.grad
        total += float((g.astype(np.float64) ** 2).sum())
    return float(np.sqrt(total))


def clip_grad_norm(params: Sequence[Parameter], max_norm: float) -> float:
    """Scale all gradients so their global norm is at most `max_norm`."""
    norm = global_grad_norm(params)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for p in params:
            p.grad *= scale
    return norm
