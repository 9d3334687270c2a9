"""Scalar reverse-mode autodiff with a differentiable input-tangent channel.

The training losses here contain the network's time derivative x'(t), and
that derivative must itself be differentiated with respect to the network
parameters.  This module realizes that "forward-over-reverse" pattern with
two pieces:

* ``Node`` -- a scalar node in a reverse-mode computation graph (a tape
  rebuilt on every use; nothing is retained between optimizer steps).
* ``DualScalar`` -- a (value, tangent) pair whose two channels are both
  ``Node`` instances.  The tangent tracks d/dt with respect to the single
  network input, and because it is built out of graph nodes, losses that
  read the tangent channel remain differentiable w.r.t. parameters.

Everything is 64-bit floats.  Graphs are acyclic by construction and a
backward pass visits every node exactly once (reverse topological order).
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Node",
    "DualScalar",
    "leaf",
    "constant",
    "lift_input",
    "lift_params",
    "backward",
    "finite_difference_check",
    "dsum",
    "tanh",
    "exp",
    "sqrt",
    "sigmoid",
    "max0",
]


class Node:
    """One scalar node of the computation graph.

    Stores the forward value, references to parent nodes and the local
    partial derivative with respect to each parent (evaluated eagerly at
    construction time -- valid because the tape is rebuilt per step).
    """

    __slots__ = ("value", "parents", "partials", "adjoint")

    def __init__(self, value, parents=(), partials=()):
        self.value = float(value)
        self.parents = parents
        self.partials = partials
        self.adjoint = 0.0

    # -- arithmetic ----------------------------------------------------
    def __add__(self, other):
        o = _as_node(other)
        return Node(self.value + o.value, (self, o), (1.0, 1.0))

    __radd__ = __add__

    def __sub__(self, other):
        o = _as_node(other)
        return Node(self.value - o.value, (self, o), (1.0, -1.0))

    def __rsub__(self, other):
        o = _as_node(other)
        return Node(o.value - self.value, (self, o), (-1.0, 1.0))

    def __mul__(self, other):
        o = _as_node(other)
        return Node(self.value * o.value, (self, o), (o.value, self.value))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _as_node(other)
        inv = 1.0 / o.value
        return Node(self.value * inv, (self, o), (inv, -self.value * inv * inv))

    def __rtruediv__(self, other):
        return _as_node(other).__truediv__(self)

    def __neg__(self):
        return Node(-self.value, (self,), (-1.0,))

    def __pow__(self, p):
        p = float(p)
        return Node(self.value**p, (self,), (p * self.value ** (p - 1.0),))

    def __repr__(self):
        return f"Node({self.value!r})"


def _as_node(x) -> Node:
    if isinstance(x, Node):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return Node(float(x))
    raise TypeError(f"cannot use {type(x).__name__} in a scalar graph")


def leaf(value: float) -> Node:
    """A differentiable leaf (parameter) node."""
    return Node(value)


# -- scalar functions on nodes ----------------------------------------


def _ntanh(x: Node) -> Node:
    v = math.tanh(x.value)
    return Node(v, (x,), (1.0 - v * v,))


def _nexp(x: Node) -> Node:
    v = math.exp(x.value)
    return Node(v, (x,), (v,))


def _nsqrt(x: Node) -> Node:
    if x.value < 0.0:
        raise ValueError(f"sqrt of negative value {x.value}")
    v = math.sqrt(x.value)
    # derivative clamped to 0 at the origin (keeps eigenvalue gradients finite)
    d = 0.5 / v if v > 0.0 else 0.0
    return Node(v, (x,), (d,))


def _nsigmoid(x: Node) -> Node:
    v = 1.0 / (1.0 + math.exp(-x.value))
    return Node(v, (x,), (v * (1.0 - v),))


def _nmax0(x: Node) -> Node:
    # subgradient at exactly 0 is defined as 0 (the clamped side)
    if x.value > 0.0:
        return Node(x.value, (x,), (1.0,))
    return Node(0.0, (x,), (0.0,))


class DualScalar:
    """A (value, tangent) pair; both channels live on the reverse tape.

    ``tan`` is the derivative of ``val`` with respect to the single
    network input t.  Constants carry tangent 0, the lifted input carries
    tangent 1.
    """

    __slots__ = ("val", "tan")

    def __init__(self, val: Node, tan: Node):
        self.val = val
        self.tan = tan

    @property
    def value(self) -> float:
        return self.val.value

    @property
    def tangent(self) -> float:
        return self.tan.value

    # -- arithmetic (forward-mode rules, expressed in graph nodes) ----
    def __add__(self, other):
        o = _as_dual(other)
        return DualScalar(self.val + o.val, self.tan + o.tan)

    __radd__ = __add__

    def __sub__(self, other):
        o = _as_dual(other)
        return DualScalar(self.val - o.val, self.tan - o.tan)

    def __rsub__(self, other):
        return _as_dual(other).__sub__(self)

    def __mul__(self, other):
        o = _as_dual(other)
        return DualScalar(
            self.val * o.val, self.val * o.tan + self.tan * o.val
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _as_dual(other)
        val = self.val / o.val
        return DualScalar(val, (self.tan - val * o.tan) / o.val)

    def __rtruediv__(self, other):
        return _as_dual(other).__truediv__(self)

    def __neg__(self):
        return DualScalar(-self.val, -self.tan)

    def __pow__(self, p):
        p = float(p)
        val = self.val**p
        return DualScalar(val, (p * self.val ** (p - 1.0)) * self.tan)

    def __repr__(self):
        return f"DualScalar({self.value!r}, {self.tangent!r})"


def _as_dual(x) -> DualScalar:
    if isinstance(x, DualScalar):
        return x
    if isinstance(x, Node):
        return DualScalar(x, Node(0.0))
    if isinstance(x, (int, float, np.floating, np.integer)):
        return DualScalar(Node(float(x)), Node(0.0))
    raise TypeError(f"cannot use {type(x).__name__} as a DualScalar")


def constant(c: float) -> DualScalar:
    """A t-constant: tangent exactly 0."""
    return DualScalar(Node(float(c)), Node(0.0))


def lift_input(t: float) -> DualScalar:
    """Lift the network input; value t, tangent exactly 1."""
    if not math.isfinite(t):
        raise ValueError(f"input must be finite, got {t}")
    return DualScalar(Node(float(t)), Node(1.0))


def lift_params(theta: Sequence[float]) -> list[DualScalar]:
    """Wrap parameter values as differentiable leaves with zero tangent.

    Returns duals whose ``val`` nodes are the leaves to pass to
    :func:`backward`.
    """
    return [DualScalar(leaf(v), Node(0.0)) for v in theta]


def tanh(x: DualScalar) -> DualScalar:
    v = _ntanh(x.val)
    return DualScalar(v, (1.0 - v * v) * x.tan)


def exp(x: DualScalar) -> DualScalar:
    v = _nexp(x.val)
    return DualScalar(v, v * x.tan)


def sqrt(x: DualScalar) -> DualScalar:
    v = _nsqrt(x.val)
    if x.val.value > 0.0:
        return DualScalar(v, x.tan / (2.0 * v))
    return DualScalar(v, Node(0.0) * x.tan)


def sigmoid(x: DualScalar) -> DualScalar:
    v = _nsigmoid(x.val)
    return DualScalar(v, (v * (1.0 - v)) * x.tan)


def max0(x: DualScalar) -> DualScalar:
    """max(x, 0); the inactive branch has zero slope in both channels."""
    v = _nmax0(x.val)
    if x.val.value > 0.0:
        return DualScalar(v, x.tan * 1.0)
    return DualScalar(v, x.tan * 0.0)


def dsum(xs: Iterable) -> DualScalar:
    """Sum of DualScalars (or node/number mixes)."""
    total = None
    for x in xs:
        total = x if total is None else total + x
    if total is None:
        return constant(0.0)
    return _as_dual(total)


# -- reverse pass ------------------------------------------------------


def _toposort(root: Node) -> list[Node]:
    order: list[Node] = []
    visited: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order


def backward(loss, params: Sequence[Node]) -> np.ndarray:
    """Reverse-mode gradient of a scalar loss w.r.t. parameter leaves.

    Parameters not on any path to the loss get gradient 0.  The returned
    vector follows the order of ``params``.
    """
    if isinstance(loss, DualScalar):
        raise TypeError("loss must be a scalar Node; pass loss.val explicitly")
    if not isinstance(loss, Node):
        raise TypeError(f"loss must be a scalar graph node, got {type(loss).__name__}")
    order = _toposort(loss)
    for node in order:
        node.adjoint = 0.0
    loss.adjoint = 1.0
    for node in reversed(order):
        a = node.adjoint
        if a == 0.0:
            continue
        for parent, partial in zip(node.parents, node.partials):
            parent.adjoint += a * partial
    return np.array([p.adjoint for p in params], dtype=np.float64)


def finite_difference_check(
    loss_fn: Callable[[Sequence[Node]], Node],
    theta: np.ndarray,
    h: float = 1e-5,
) -> float:
    """Worst relative discrepancy of backward() vs. central differences.

    ``loss_fn`` maps a list of leaf nodes to a scalar loss node; it is
    re-invoked on shifted parameter vectors for the finite differences, so
    it must be deterministic.
    """
    if h <= 0.0:
        raise ValueError("h must be positive")
    theta = np.asarray(theta, dtype=np.float64)

    def value_at(vec: np.ndarray) -> float:
        return loss_fn([leaf(v) for v in vec]).value

    leaves = [leaf(v) for v in theta]
    grad = backward(loss_fn(leaves), leaves)

    worst = 0.0
    for i in range(theta.size):
        shift = np.zeros_like(theta)
        shift[i] = h
        fd = (value_at(theta + shift) - value_at(theta - shift)) / (2.0 * h)
        scale = max(abs(grad[i]), abs(fd))
        if scale < 1e-10:
            continue
        worst = max(worst, abs(grad[i] - fd) / scale)
    return worst
