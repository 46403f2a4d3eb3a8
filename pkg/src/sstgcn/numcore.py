"""Dense 2-D tensors with tape-based reverse-mode automatic differentiation.

Only rank-2 float64 tensors exist; sequences and batches are handled as
lists of them.  Differentiable operations record a backward rule onto the
innermost active Tape, and backward() replays the rules in reverse
recording order, so gradient accumulation order is fixed and repeated
passes over the same tape are bit-identical.  Outside a Tape context every
operation is plain numpy arithmetic with nothing recorded.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "no_tape",
    "ShapeError",
    "GradientError",
    "NumericError",
    "matmul",
    "concat_cols",
    "slice_cols",
    "add_rowvec",
    "activation",
    "backward",
    "grad_check",
]


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class GradientError(RuntimeError):
    """backward() was handed a loss it cannot differentiate."""


class NumericError(ArithmeticError):
    """Non-finite values where finite ones are required."""


_STACK: list["Tape"] = []


def _active() -> "Tape | None":
    return _STACK[-1] if _STACK else None


class Tape:
    """Execution-ordered record of backward rules for one forward pass."""

    def __init__(self):
        # (output, inputs, rule); rule maps the output gradient to one
        # gradient array per input, in input order.
        self._entries = []

    def __enter__(self):
        _STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _STACK.pop()
        assert popped is self, "Tape contexts must nest properly"
        return False

    def __len__(self):
        return len(self._entries)


class no_tape:
    """Context that hides any active tape (for oracle re-evaluations)."""

    def __enter__(self):
        self._saved = _STACK[:]
        _STACK.clear()
        return self

    def __exit__(self, exc_type, exc, tb):
        _STACK[:] = self._saved
        return False


class Tensor:
    """A rows x cols float64 array, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad", "tape")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are rank-2, got an array of rank {arr.ndim}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self.tape = None

    @classmethod
    def _from_op(cls, arr: np.ndarray) -> "Tensor":
        t = cls.__new__(cls)
        t.data = arr
        t.requires_grad = False
        t.grad = None
        t.tape = None
        return t

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def item(self) -> float:
        if self.data.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.data.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- elementwise arithmetic (same-shape tensors or python scalars) --

    def _check_same_shape(self, other: "Tensor", op: str):
        if other.data.shape != self.data.shape:
            raise ShapeError(
                f"{op}: shapes {self.data.shape} and {other.data.shape} do not match"
            )

    def __add__(self, other):
        if isinstance(other, Tensor):
            self._check_same_shape(other, "add")
            return _track(self.data + other.data, (self, other), lambda g: (g, g))
        c = float(other)
        return _track(self.data + c, (self,), lambda g: (g,))

    __radd__ = __add__

    def __neg__(self):
        return _track(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        if isinstance(other, Tensor):
            self._check_same_shape(other, "sub")
            return _track(self.data - other.data, (self, other), lambda g: (g, -g))
        c = float(other)
        return _track(self.data - c, (self,), lambda g: (g,))

    def __rsub__(self, other):
        c = float(other)
        return _track(c - self.data, (self,), lambda g: (-g,))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            self._check_same_shape(other, "mul")
            sd, od = self.data, other.data
            return _track(sd * od, (self, other), lambda g: (g * od, g * sd))
        c = float(other)
        return _track(self.data * c, (self,), lambda g: (g * c,))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    # -- shape ops --

    def transpose(self) -> "Tensor":
        return _track(self.data.T.copy(), (self,), lambda g: (g.T,))

    T = property(transpose)

    def sum(self) -> "Tensor":
        d = self.data
        out = np.array([[d.sum()]])
        return _track(out, (self,), lambda g: (np.full_like(d, g[0, 0]),))

    # -- elementwise nonlinearities --

    def log(self) -> "Tensor":
        d = self.data
        return _track(np.log(d), (self,), lambda g: (g / d,))

    def clip(self, lo: float, hi: float) -> "Tensor":
        d = self.data
        mask = (d > lo) & (d < hi)
        return _track(np.clip(d, lo, hi), (self,), lambda g: (g * mask,))

    def sigmoid(self) -> "Tensor":
        y = _sigmoid(self.data)
        return _track(y, (self,), lambda g: (g * y * (1.0 - y),))

    def tanh(self) -> "Tensor":
        y = np.tanh(self.data)
        return _track(y, (self,), lambda g: (g * (1.0 - y * y),))

    def relu(self) -> "Tensor":
        d = self.data
        return _track(np.maximum(d, 0.0), (self,), lambda g: (g * (d > 0.0),))

    def prelu(self, alpha: "Tensor") -> "Tensor":
        """Leaky rectifier with a shared trainable slope (1x1 tensor)."""
        if alpha.data.shape != (1, 1):
            raise ShapeError(f"prelu slope must be 1x1, got {alpha.data.shape}")
        d = self.data
        a = alpha.data[0, 0]
        pos = d > 0.0

        def rule(g):
            gx = g * np.where(pos, 1.0, a)
            ga = np.array([[float(np.sum(g * np.where(pos, 0.0, d)))]])
            return gx, ga

        return _track(np.where(pos, d, a * d), (self, alpha), rule)

    def softmax_rows(self) -> "Tensor":
        """Row-wise softmax, max-subtracted for stability."""
        z = self.data - self.data.max(axis=1, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=1, keepdims=True)

        def rule(g):
            dot = (g * y).sum(axis=1, keepdims=True)
            return (y * (g - dot),)

        return _track(y, (self,), rule)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Piecewise form avoids overflow in exp for large negative inputs.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _track(out_data, inputs, rule) -> Tensor:
    out = Tensor._from_op(out_data)
    tape = _active()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.tape = tape
        tape._entries.append((out, inputs, rule))
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; backward gives dA = G·Bᵀ and dB = Aᵀ·G."""
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul: inner dimensions disagree: {a.data.shape} x {b.data.shape}"
        )
    ad, bd = a.data, b.data
    return _track(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Columnwise concatenation; backward splits the gradient."""
    if a.data.shape[0] != b.data.shape[0]:
        raise ShapeError(
            f"concat_cols: row counts differ: {a.data.shape} vs {b.data.shape}"
        )
    p = a.data.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)
    return _track(out, (a, b), lambda g: (g[:, :p], g[:, p:]))


def slice_cols(t: Tensor, start: int, stop: int) -> Tensor:
    """Column slice [start, stop); inverse of concat_cols on the halves."""
    rows, cols = t.data.shape
    if not (0 <= start < stop <= cols):
        raise ShapeError(f"slice_cols: [{start}, {stop}) out of range for {t.data.shape}")

    def rule(g):
        full = np.zeros((rows, cols))
        full[:, start:stop] = g
        return (full,)

    return _track(t.data[:, start:stop].copy(), (t,), rule)


def add_rowvec(x: Tensor, b: Tensor) -> Tensor:
    """Add a 1 x d bias row to every row of x (the only broadcast allowed)."""
    if b.data.shape[0] != 1 or b.data.shape[1] != x.data.shape[1]:
        raise ShapeError(
            f"add_rowvec: bias {b.data.shape} does not broadcast over {x.data.shape}"
        )
    return _track(
        x.data + b.data, (x, b), lambda g: (g, g.sum(axis=0, keepdims=True))
    )


def activation(x: Tensor, kind: str, alpha: Tensor | None = None) -> Tensor:
    """Apply an activation by name: sigmoid, tanh, relu, prelu, softmax_rows."""
    if kind == "sigmoid":
        return x.sigmoid()
    if kind == "tanh":
        return x.tanh()
    if kind == "relu":
        return x.relu()
    if kind == "prelu":
        if alpha is None:
            raise ValueError("prelu needs its trainable slope tensor")
        return x.prelu(alpha)
    if kind == "softmax_rows":
        return x.softmax_rows()
    raise ValueError(f"unknown activation kind: {kind!r}")


def backward(loss: Tensor) -> None:
    """Populate .grad on every requires_grad tensor the loss depends on.

    Grads are zeroed first, so the result is d(loss)/d(tensor) regardless of
    earlier passes; tensors recorded on the tape but not upstream of the
    loss end up with zero gradient.
    """
    if loss.data.shape != (1, 1):
        raise GradientError(f"loss must be a 1x1 tensor, got shape {loss.data.shape}")
    tape = loss.tape
    if tape is None:
        raise GradientError("loss was not produced under an active Tape")

    seen: dict[int, Tensor] = {}
    for out, inputs, _ in tape._entries:
        seen.setdefault(id(out), out)
        for t in inputs:
            seen.setdefault(id(t), t)
    for t in seen.values():
        if t.requires_grad:
            t.grad = np.zeros_like(t.data)

    loss.grad[0, 0] = 1.0
    for out, inputs, rule in reversed(tape._entries):
        grads = rule(out.grad)
        for t, g in zip(inputs, grads):
            if t.requires_grad:
                t.grad += g


def grad_check(f, theta: Tensor, eps: float = 1e-5) -> float:
    """Max relative disagreement between backward() and central differences.

    f is re-evaluated with single entries of theta perturbed by ±eps; the
    error for each entry is |analytic - fd| / max(1, |analytic|).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not theta.requires_grad:
        raise GradientError("grad_check needs a requires_grad tensor")

    with no_tape():
        with Tape():
            loss = f(theta)
            backward(loss)
        analytic = theta.grad.copy()

        worst = 0.0
        rows, cols = theta.data.shape
        for i in range(rows):
            for j in range(cols):
                orig = theta.data[i, j]
                theta.data[i, j] = orig + eps
                fp = f(theta).item()
                theta.data[i, j] = orig - eps
                fm = f(theta).item()
                theta.data[i, j] = orig
                fd = (fp - fm) / (2.0 * eps)
                if not (np.isfinite(fd) and np.isfinite(analytic[i, j])):
                    raise NumericError(
                        f"non-finite value while checking entry ({i}, {j})"
                    )
                err = abs(analytic[i, j] - fd) / max(1.0, abs(analytic[i, j]))
                worst = max(worst, err)
    return worst
