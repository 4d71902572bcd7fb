"""Dense-matrix reverse-mode automatic differentiation.

Every value is a finite 2-D float64 array recorded as a node on an explicit
tape (one tape per forward pass). Each recorded operation closes over a push
rule that routes its output gradient back to its parents, so a single reverse
sweep in recording order yields exact gradients for any scalar loss. Fan-out
is handled by additive accumulation; nodes never reached by the sweep keep a
zero gradient.
"""
from __future__ import annotations

import numpy as np

from .errors import ContractError, DegenerateRowError, DomainError, ShapeError
from .validation import as_matrix


class Tape:
    """Recording of one forward pass. Create a fresh tape per pass."""

    def __init__(self):
        self.nodes: list[Node] = []

    def _record(self, op, value, parents, push, name=None, needs_grad=True):
        if value.size and not np.isfinite(value).all():
            i, j = np.argwhere(~np.isfinite(value))[0]
            raise DomainError(f"{op} produced a non-finite entry at ({i}, {j})")
        node = Node(self, op, value, parents, push, name, needs_grad)
        self.nodes.append(node)
        return node

    def leaf(self, value, name: str | None = None) -> "Node":
        """Register a differentiable input (parameter or data)."""
        return self._record("leaf", as_matrix(value, name or "leaf"), (), None, name)

    def constant(self, value, name: str | None = None) -> "Node":
        """Register a value that participates in the forward pass only."""
        return self._record(
            "const", as_matrix(value, name or "const"), (), None, name, needs_grad=False
        )


class Node:
    """One recorded value. ``grad`` is populated by :func:`backward`."""

    __slots__ = ("tape", "op", "value", "parents", "name", "needs_grad", "grad", "_push")

    def __init__(self, tape, op, value, parents, push, name=None, needs_grad=True):
        self.tape = tape
        self.op = op
        self.value = value
        self.parents = parents
        self.name = name
        self.needs_grad = needs_grad or any(p.needs_grad for p in parents)
        self.grad = None
        self._push = push

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(op={self.op!r}, shape={self.value.shape})"

    # arithmetic sugar; scalars and arrays are lifted to constants
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_lift(self.tape, other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_lift(self.tape, other), self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def t(self):
        return transpose(self)

    def relu(self):
        return relu(self)

    def sigmoid(self):
        return sigmoid(self)

    def log(self):
        return log(self)

    def sqrt(self):
        return sqrt(self)

    def square(self):
        return square(self)

    def sum(self):
        return total_sum(self)

    def mean(self):
        return mean(self)


def _accum(node, g):
    if node.grad is None:
        node.grad = np.zeros_like(node.value)
    node.grad += g


def _lift(tape, x):
    if isinstance(x, Node):
        if x.tape is not tape:
            raise ContractError("operands belong to different tapes")
        return x
    return tape.constant(x)


def _pair(a, b):
    if isinstance(a, Node):
        return a, _lift(a.tape, b)
    if isinstance(b, Node):
        return _lift(b.tape, a), b
    raise ContractError("at least one operand must be a tape node")


def _unbroadcast(g, shape):
    """Sum a gradient over the axes that were broadcast in the forward pass."""
    if g.shape == shape:
        return g
    out = g
    for axis in (0, 1):
        if shape[axis] == 1 and out.shape[axis] != 1:
            out = out.sum(axis=axis, keepdims=True)
    return out


def _broadcast_value(op, a, b, fn):
    try:
        return fn(a.value, b.value)
    except ValueError:
        raise ShapeError(
            f"{op}: shapes {a.value.shape} and {b.value.shape} do not broadcast"
        ) from None


def add(a, b) -> Node:
    a, b = _pair(a, b)
    value = _broadcast_value("add", a, b, np.add)

    def push(g):
        if a.needs_grad:
            _accum(a, _unbroadcast(g, a.value.shape))
        if b.needs_grad:
            _accum(b, _unbroadcast(g, b.value.shape))

    return a.tape._record("add", value, (a, b), push)


def sub(a, b) -> Node:
    a, b = _pair(a, b)
    value = _broadcast_value("sub", a, b, np.subtract)

    def push(g):
        if a.needs_grad:
            _accum(a, _unbroadcast(g, a.value.shape))
        if b.needs_grad:
            _accum(b, _unbroadcast(-g, b.value.shape))

    return a.tape._record("sub", value, (a, b), push)


def mul(a, b) -> Node:
    a, b = _pair(a, b)
    value = _broadcast_value("mul", a, b, np.multiply)

    def push(g):
        if a.needs_grad:
            _accum(a, _unbroadcast(g * b.value, a.value.shape))
        if b.needs_grad:
            _accum(b, _unbroadcast(g * a.value, b.value.shape))

    return a.tape._record("mul", value, (a, b), push)


def div(a, b) -> Node:
    a, b = _pair(a, b)
    value = _broadcast_value("div", a, b, np.divide)
    # non-finite output (zero divisor) is rejected by _record

    def push(g):
        if a.needs_grad:
            _accum(a, _unbroadcast(g / b.value, a.value.shape))
        if b.needs_grad:
            _accum(b, _unbroadcast(-g * value / b.value, b.value.shape))

    return a.tape._record("div", value, (a, b), push)


def hadamard(a, b) -> Node:
    """Elementwise product of two identically shaped matrices."""
    a, b = _pair(a, b)
    if a.value.shape != b.value.shape:
        raise ShapeError(
            f"hadamard: shapes {a.value.shape} and {b.value.shape} differ"
        )
    return mul(a, b)


def matmul(a, b) -> Node:
    a, b = _pair(a, b)
    if a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(
            f"matmul: inner dimensions disagree, {a.value.shape} @ {b.value.shape}"
        )
    value = a.value @ b.value

    def push(g):
        if a.needs_grad:
            _accum(a, g @ b.value.T)
        if b.needs_grad:
            _accum(b, a.value.T @ g)

    return a.tape._record("matmul", value, (a, b), push)


def transpose(x: Node) -> Node:
    value = x.value.T

    def push(g):
        if x.needs_grad:
            _accum(x, g.T)

    return x.tape._record("transpose", value, (x,), push)


def relu(x: Node) -> Node:
    value = np.maximum(x.value, 0.0)

    def push(g):
        if x.needs_grad:
            _accum(x, g * (x.value > 0.0))

    return x.tape._record("relu", value, (x,), push)


def sigmoid(x: Node) -> Node:
    # stable logistic: exp only ever sees non-positive arguments
    v = x.value
    value = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                     np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))

    def push(g):
        if x.needs_grad:
            _accum(x, g * value * (1.0 - value))

    return x.tape._record("sigmoid", value, (x,), push)


def _check_positive(op, v):
    bad = v <= 0.0
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise DomainError(f"{op}: non-positive entry {v[i, j]!r} at ({i}, {j})")


def log(x: Node) -> Node:
    _check_positive("log", x.value)
    value = np.log(x.value)

    def push(g):
        if x.needs_grad:
            _accum(x, g / x.value)

    return x.tape._record("log", value, (x,), push)


def sqrt(x: Node) -> Node:
    _check_positive("sqrt", x.value)
    value = np.sqrt(x.value)

    def push(g):
        if x.needs_grad:
            _accum(x, g / (2.0 * value))

    return x.tape._record("sqrt", value, (x,), push)


def square(x: Node) -> Node:
    value = x.value * x.value

    def push(g):
        if x.needs_grad:
            _accum(x, 2.0 * g * x.value)

    return x.tape._record("square", value, (x,), push)


def total_sum(x: Node) -> Node:
    value = np.array([[x.value.sum()]])

    def push(g):
        if x.needs_grad:
            _accum(x, np.full_like(x.value, g[0, 0]))

    return x.tape._record("sum", value, (x,), push)


def mean(x: Node) -> Node:
    value = np.array([[x.value.mean()]])

    def push(g):
        if x.needs_grad:
            _accum(x, np.full_like(x.value, g[0, 0] / x.value.size))

    return x.tape._record("mean", value, (x,), push)


def sum_rows(x: Node) -> Node:
    """Row sums as an (N, 1) column."""
    value = x.value.sum(axis=1, keepdims=True)

    def push(g):
        if x.needs_grad:
            _accum(x, np.broadcast_to(g, x.value.shape))

    return x.tape._record("sum_rows", value, (x,), push)


def sum_cols(x: Node) -> Node:
    """Column sums as a (1, C) row."""
    value = x.value.sum(axis=0, keepdims=True)

    def push(g):
        if x.needs_grad:
            _accum(x, np.broadcast_to(g, x.value.shape))

    return x.tape._record("sum_cols", value, (x,), push)


def row_softmax(x: Node) -> Node:
    """Numerically stable softmax applied independently to each row."""
    shifted = x.value - x.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    value = e / e.sum(axis=1, keepdims=True)

    def push(g):
        if x.needs_grad:
            inner = (g * value).sum(axis=1, keepdims=True)
            _accum(x, value * (g - inner))

    return x.tape._record("row_softmax", value, (x,), push)


def _unit_rows(x: Node) -> Node:
    return div(x, sqrt(sum_rows(square(x))))


def cosine_matrix(a: Node, b: Node) -> Node:
    """Pairwise cosine similarity: out[i, j] = cos(a_i, b_j).

    Both inputs must share their column count and contain no zero row.
    """
    a, b = _pair(a, b)
    if a.value.shape[1] != b.value.shape[1]:
        raise ShapeError(
            f"cosine_matrix: column counts differ, {a.value.shape} vs {b.value.shape}"
        )
    for node, side in ((a, "left"), (b, "right")):
        norms = np.sqrt((node.value ** 2).sum(axis=1))
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise DegenerateRowError(
                zero[0], f"cosine_matrix: {side} operand row {zero[0]} has zero norm"
            )
    return matmul(_unit_rows(a), transpose(_unit_rows(b)))


def backward(loss: Node) -> dict[str, np.ndarray]:
    """Reverse sweep from a scalar loss node.

    Populates ``grad`` on every node that influences the loss, fills zero
    gradients in for leaves the loss never touched, and returns a mapping
    from leaf name to gradient for every named leaf on the tape.
    """
    if loss.value.shape != (1, 1):
        raise ShapeError(f"backward: loss must be 1x1, got {loss.value.shape}")
    tape = loss.tape
    for node in tape.nodes:
        node.grad = None
    loss.grad = np.ones((1, 1))
    for node in reversed(tape.nodes):
        if node.grad is None or node._push is None:
            continue
        node._push(node.grad)
    grads: dict[str, np.ndarray] = {}
    for node in tape.nodes:
        if node.op == "leaf":
            if node.grad is None:
                node.grad = np.zeros_like(node.value)
            if node.name is not None:
                grads[node.name] = node.grad
    return grads


def grad_check(f, params, step: float = 1e-5) -> float:
    """Compare tape gradients of ``f`` against central differences.

    ``f`` maps a list of leaf nodes to a scalar node and must be pure.
    Returns the worst relative error max(|analytic - fd| / max(1, |fd|))
    over every entry of every parameter.
    """
    params = [np.array(p, dtype=np.float64) for p in params]
    tape = Tape()
    leaves = [tape.leaf(p, name=f"p{i}") for i, p in enumerate(params)]
    loss = f(leaves)
    if loss.value.shape != (1, 1):
        raise ShapeError(f"grad_check: f must return a 1x1 node, got {loss.shape}")
    backward(loss)

    def value_at():
        probe_tape = Tape()
        probe = [probe_tape.leaf(p, name=f"p{i}") for i, p in enumerate(params)]
        out = f(probe).value
        return float(out[0, 0])

    worst = 0.0
    for k, leaf in enumerate(leaves):
        analytic = leaf.grad
        it = np.nditer(params[k], flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = params[k][idx]
            params[k][idx] = orig + step
            f_plus = value_at()
            params[k][idx] = orig - step
            f_minus = value_at()
            params[k][idx] = orig
            fd = (f_plus - f_minus) / (2.0 * step)
            err = abs(analytic[idx] - fd) / max(1.0, abs(fd))
            worst = max(worst, err)
    return worst
