"""Scalar reverse-mode differentiation on an explicit tape.

Every node is a scalar function of its parents. A node's value may also be a
numpy array, in which case the same scalar graph is evaluated elementwise for
a whole batch of inputs at once (for example a network evaluated at every
event time). Leaves holding plain floats then receive gradients summed over
the batch axis.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import expit

_SOFTPLUS_CUTOFF = 30.0


class DomainError(ValueError):
    """Raised when an operation is applied outside its domain (e.g. log of a non-positive value)."""


def softplus(x):
    """Stable log(1 + exp(x)) for floats or arrays."""
    if isinstance(x, (float, int)):
        if x > _SOFTPLUS_CUTOFF:
            return x + math.exp(-x)
        if x < -_SOFTPLUS_CUTOFF:
            return math.exp(x)
        return math.log1p(math.exp(x))
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    hi = x > _SOFTPLUS_CUTOFF
    lo = x < -_SOFTPLUS_CUTOFF
    mid = ~(hi | lo)
    out[hi] = x[hi] + np.exp(-x[hi])
    out[lo] = np.exp(x[lo])
    out[mid] = np.log1p(np.exp(x[mid]))
    return out


def sigmoid(x):
    if isinstance(x, float):
        if x >= 0:
            return 1.0 / (1.0 + math.exp(-x))
        e = math.exp(x)
        return e / (1.0 + e)
    return expit(x)


def inverse_softplus(y):
    """Raw value whose softplus is ``y``; y = 0 maps to -inf, which pins the parameter at zero."""
    y = np.asarray(y, dtype=float)
    with np.errstate(over="ignore", divide="ignore"):
        out = np.where(y > _SOFTPLUS_CUTOFF, y, np.log(np.expm1(np.minimum(y, _SOFTPLUS_CUTOFF))))
    return float(out) if out.ndim == 0 else out


def _reduce_to(grad, like):
    """Sum a broadcast gradient back down to the shape of ``like``."""
    if isinstance(like, float):
        return grad if isinstance(grad, float) else float(np.sum(grad))
    if np.ndim(like) == 0:
        return float(np.sum(grad)) if np.ndim(grad) else grad
    if np.shape(grad) != np.shape(like):
        return np.broadcast_to(grad, np.shape(like)).copy()
    return grad


class Tape:
    """Append-only record of operations; parents of node k always have index < k."""

    def __init__(self):
        self.values: list = []
        self.parents: list[tuple[int, ...]] = []
        self.partials: list[tuple] = []
        self.ops: list[str] = []
        self.leaves: list[int] = []

    def __len__(self):
        return len(self.values)

    def _push(self, op, value, parents=(), partials=()) -> "Var":
        self.values.append(value)
        self.parents.append(parents)
        self.partials.append(partials)
        self.ops.append(op)
        return Var(self, len(self.values) - 1)

    def var(self, value) -> "Var":
        """Register a differentiable leaf."""
        value = float(value) if np.isscalar(value) else np.asarray(value, dtype=float)
        if not np.all(np.isfinite(value)):
            raise DomainError("leaf value must be finite")
        v = self._push("leaf", value)
        self.leaves.append(v.index)
        return v

    def const(self, value) -> "Var":
        value = float(value) if np.isscalar(value) else np.asarray(value, dtype=float)
        return self._push("const", value)

    def backward(self, output: "Var", seed=None) -> list:
        """Gradient of ``output`` with respect to every leaf, in registration order.

        ``seed`` is the upstream adjoint of ``output``; it defaults to 1 (or
        ones for an array-valued output).
        """
        if output.tape is not self:
            raise ValueError("output does not belong to this tape")
        adj: list = [None] * len(self.values)
        if seed is None:
            seed = 1.0 if np.ndim(output.value) == 0 else np.ones_like(output.value)
        adj[output.index] = seed
        parents = self.parents
        partials = self.partials
        values = self.values
        for k in range(output.index, -1, -1):
            a = adj[k]
            if a is None:
                continue
            for p, d in zip(parents[k], partials[k]):
                contrib = _reduce_to(a * d, values[p])
                adj[p] = contrib if adj[p] is None else adj[p] + contrib
        out = []
        for leaf in self.leaves:
            g = adj[leaf]
            if g is None:
                g = 0.0 if np.ndim(values[leaf]) == 0 else np.zeros_like(values[leaf])
            out.append(g)
        return out

    def gradient(self, output: "Var", wrt: Sequence["Var"], seed=None) -> list:
        """Gradient of ``output`` with respect to the leaves ``wrt``."""
        grads = self.backward(output, seed)
        position = {leaf: i for i, leaf in enumerate(self.leaves)}
        res = []
        for v in wrt:
            if v.index not in position:
                raise ValueError(f"node {v.index} is not a leaf")
            res.append(grads[position[v.index]])
        return res


class Var:
    __slots__ = ("tape", "index")

    def __init__(self, tape: Tape, index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self):
        return self.tape.values[self.index]

    def __repr__(self):
        return f"Var({self.value!r})"

    def _lift(self, other) -> "Var":
        if isinstance(other, Var):
            if other.tape is not self.tape:
                raise ValueError("cannot combine variables from different tapes")
            return other
        return self.tape.const(other)

    def __add__(self, other):
        other = self._lift(other)
        return self.tape._push("add", self.value + other.value, (self.index, other.index), (1.0, 1.0))

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        return self.tape._push("sub", self.value - other.value, (self.index, other.index), (1.0, -1.0))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        return self.tape._push(
            "mul", self.value * other.value, (self.index, other.index), (other.value, self.value)
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self.tape._push("neg", -self.value, (self.index,), (-1.0,))

    def __truediv__(self, other):
        return self * self._lift(other).power(-1.0)

    def __rtruediv__(self, other):
        return self._lift(other) * self.power(-1.0)

    def __pow__(self, exponent):
        return self.power(exponent)

    def power(self, exponent: float):
        x = self.value
        if np.any(np.asarray(x) == 0) and exponent < 1:
            raise DomainError(f"power({exponent}) undefined at 0")
        if np.any(np.asarray(x) < 0) and not float(exponent).is_integer():
            raise DomainError(f"power({exponent}) of a negative value")
        return self.tape._push("power", x**exponent, (self.index,), (exponent * x ** (exponent - 1),))

    def exp(self):
        y = np.exp(self.value)
        return self.tape._push("exp", y, (self.index,), (y,))

    def log(self):
        x = self.value
        if np.any(np.asarray(x) <= 0) or np.any(np.isnan(x)):
            raise DomainError("log of a non-positive value")
        return self.tape._push("log", np.log(x), (self.index,), (1.0 / x,))

    def tanh(self):
        y = np.tanh(self.value)
        return self.tape._push("tanh", y, (self.index,), (1.0 - y * y,))

    def softplus(self):
        x = self.value
        return self.tape._push("softplus", softplus(x), (self.index,), (sigmoid(x),))

    def sigmoid(self):
        s = sigmoid(self.value)
        return self.tape._push("sigmoid", s, (self.index,), (s * (1.0 - s),))

    def sum(self):
        x = self.value
        return self.tape._push("sum", float(np.sum(x)), (self.index,), (1.0,))


def linear_combination(weights: Sequence[Var], inputs: Sequence[Var], bias: Var | None = None) -> Var:
    """sum_j weights[j] * inputs[j] (+ bias) as a single node."""
    if len(weights) != len(inputs) or not weights:
        raise ValueError("weights and inputs must be non-empty and of equal length")
    tape = weights[0].tape
    values = tape.values
    total = values[weights[0].index] * values[inputs[0].index]
    for w, x in zip(weights[1:], inputs[1:]):
        total = total + values[w.index] * values[x.index]
    parents = [w.index for w in weights] + [x.index for x in inputs]
    partials = [values[x.index] for x in inputs] + [values[w.index] for w in weights]
    if bias is not None:
        total = total + bias.value
        parents.append(bias.index)
        partials.append(1.0)
    return tape._push("lincomb", total, tuple(parents), tuple(partials))


def add(a: Var, b) -> Var:
    return a + b


def mul(a: Var, b) -> Var:
    return a * b


def neg(a: Var) -> Var:
    return -a


def exp(a: Var) -> Var:
    return a.exp()


def log(a: Var) -> Var:
    return a.log()


def tanh(a: Var) -> Var:
    return a.tanh()


def power(a: Var, exponent: float) -> Var:
    return a.power(exponent)


def backward(tape: Tape, output: Var, seed=None) -> list:
    return tape.backward(output, seed)
