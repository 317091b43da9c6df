"""Reverse-mode differentiation tape.

Only the primitives needed to differentiate a window value with respect to
raw strategy parameters are provided.  Values are numpy arrays (0-d for
scalars); records are vector-level for softmax groups, the stationary
solve and the sparse propagation used by the window DP, elementwise
elsewhere.

Example::

    tape = Tape()
    x = tape.var(np.array([0.0, 0.0]))
    y = dot(softmax_groups(x, np.array([0, 2])), np.array([1.0, 0.0]))
    grads = tape.backward(y)
    grads[x]   # array([ 0.25, -0.25])
"""
from __future__ import annotations

import warnings
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "Tape",
    "Var",
    "add",
    "sub",
    "mul",
    "div",
    "exp",
    "log",
    "maximum",
    "relu",
    "dot",
    "scale",
    "total",
    "gather",
    "softmax_groups",
    "stationary",
    "propagate",
]


class Var:
    """A node on a tape holding a forward value."""

    __slots__ = ("tape", "id", "value")

    def __init__(self, tape: "Tape", id: int, value: np.ndarray):
        self.tape = tape
        self.id = id
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    def __len__(self):
        return len(self.value)

    def __float__(self):
        return float(self.value)

    def __repr__(self):
        return f"Var(id={self.id}, value={self.value!r})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    # identity hashing so Vars can key the gradient map
    __hash__ = object.__hash__


class Tape:
    """Append-only record of primitive applications.

    Each record stores the output node id, the input node ids and a
    vector-Jacobian product closing over whatever forward values the
    primitive needs.  Inputs always precede outputs, so the reverse sweep
    is a single pass over the record list.
    """

    def __init__(self):
        self._values: list[np.ndarray] = []
        self._records: list[tuple[str, tuple[int, ...], int, Callable]] = []
        self._leaves: list[Var] = []

    def __len__(self):
        return len(self._records)

    def var(self, value) -> Var:
        """Register a leaf (a parameter to differentiate with respect to)."""
        v = self._node(np.array(value, dtype=float))
        self._leaves.append(v)
        return v

    def _node(self, value: np.ndarray) -> Var:
        self._values.append(value)
        return Var(self, len(self._values) - 1, value)

    def record(self, kind: str, inputs: Sequence[Var], value, vjp: Callable) -> Var:
        """Append a primitive; ``vjp(g)`` returns one adjoint per input."""
        for v in inputs:
            if v.tape is not self:
                raise ValueError("operands live on different tapes")
        out = self._node(np.asarray(value, dtype=float))
        self._records.append((kind, tuple(v.id for v in inputs), out.id, vjp))
        return out

    def kinds(self) -> list[str]:
        return [r[0] for r in self._records]

    def backward(self, output: Var) -> Mapping[Var, np.ndarray]:
        """One reverse sweep from a scalar output; returns leaf adjoints."""
        if output.tape is not self or output.id >= len(self._values):
            raise ValueError("output is not on this tape")
        if np.ndim(output.value) != 0:
            raise ValueError("backward needs a scalar output")
        adj: list[np.ndarray | None] = [None] * len(self._values)
        adj[output.id] = np.array(1.0)
        for _, in_ids, out_id, vjp in reversed(self._records):
            g = adj[out_id]
            if g is None:
                continue
            for i, gi in zip(in_ids, vjp(g)):
                if gi is None:
                    continue
                adj[i] = gi if adj[i] is None else adj[i] + gi
        grads = {
            leaf: (np.zeros_like(leaf.value) if adj[leaf.id] is None else np.asarray(adj[leaf.id], dtype=float))
            for leaf in self._leaves
        }
        return MappingProxyType(grads)


def _tape_of(*xs) -> Tape | None:
    tapes = {id(x.tape): x.tape for x in xs if isinstance(x, Var)}
    if len(tapes) > 1:
        raise ValueError("operands live on different tapes")
    return next(iter(tapes.values()), None)


def _val(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=float)


def _unbroadcast(g, shape):
    g = np.asarray(g)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _binary(kind, a, b, fwd, da, db):
    av, bv = _val(a), _val(b)
    out = fwd(av, bv)
    tape = _tape_of(a, b)
    if tape is None:
        return out
    inputs = [x for x in (a, b) if isinstance(x, Var)]

    def vjp(g):
        res = []
        if isinstance(a, Var):
            res.append(_unbroadcast(da(g, av, bv, out), av.shape))
        if isinstance(b, Var):
            res.append(_unbroadcast(db(g, av, bv, out), bv.shape))
        return res

    return tape.record(kind, inputs, out, vjp)


def add(a, b):
    return _binary("add", a, b, np.add, lambda g, a, b, o: g, lambda g, a, b, o: g)


def sub(a, b):
    return _binary("sub", a, b, np.subtract, lambda g, a, b, o: g, lambda g, a, b, o: -g)


def mul(a, b):
    return _binary("mul", a, b, np.multiply, lambda g, a, b, o: g * b, lambda g, a, b, o: g * a)


def div(a, b):
    if np.any(_val(b) == 0):
        raise ZeroDivisionError("division by zero on tape")
    return _binary("div", a, b, np.divide, lambda g, a, b, o: g / b, lambda g, a, b, o: -g * o / b)


def maximum(a, b):
    """Elementwise max; on ties the whole adjoint goes to ``a``."""
    return _binary(
        "max",
        a,
        b,
        np.maximum,
        lambda g, a, b, o: g * (a >= b),
        lambda g, a, b, o: g * (a < b),
    )


def relu(a):
    return maximum(a, 0.0)


def _unary(kind, a, fwd, d):
    av = _val(a)
    out = fwd(av)
    if not isinstance(a, Var):
        return out
    return a.tape.record(kind, [a], out, lambda g: [g * d(av, out)])


def exp(a):
    return _unary("exp", a, np.exp, lambda a, o: o)


def log(a):
    if np.any(_val(a) <= 0):
        raise ValueError("log of a nonpositive value")
    return _unary("log", a, np.log, lambda a, o: 1.0 / a)


def scale(a, c: float):
    return _unary("scale", a, lambda x: c * x, lambda a, o: c)


def total(a):
    av = _val(a)
    out = np.sum(av)
    if not isinstance(a, Var):
        return out
    return a.tape.record("sum", [a], out, lambda g: [np.broadcast_to(g, av.shape).copy()])


def dot(a, b):
    return _binary(
        "dot",
        a,
        b,
        lambda x, y: np.dot(x, y),
        lambda g, a, b, o: g * b,
        lambda g, a, b, o: g * a,
    )


def gather(a, index: np.ndarray):
    av = _val(a)
    index = np.asarray(index, dtype=np.intp)
    out = av[index]
    if not isinstance(a, Var):
        return out
    n = len(av)
    return a.tape.record(
        "gather", [a], out, lambda g: [np.bincount(index, weights=g, minlength=n)]
    )


def softmax_groups(theta, starts: np.ndarray, factor: np.ndarray | None = None):
    """Softmax over contiguous groups, each optionally multiplied by a constant.

    ``starts`` holds the first index of every group (sorted, starting at 0).
    """
    tv = _val(theta)
    if not np.all(np.isfinite(tv)):
        raise ValueError("non-finite strategy parameter")
    starts = np.asarray(starts, dtype=np.intp)
    sizes = np.diff(np.append(starts, len(tv)))
    if len(tv) == 0:
        return tv.copy()
    if np.any(sizes < 1):
        raise ValueError("empty softmax group")
    shift = np.repeat(np.maximum.reduceat(tv, starts), sizes)
    z = np.exp(tv - shift)
    q = z / np.repeat(np.add.reduceat(z, starts), sizes)
    f = np.ones(len(starts)) if factor is None else np.asarray(factor, dtype=float)
    fe = np.repeat(f, sizes)
    y = q * fe
    if not isinstance(theta, Var):
        return y

    def vjp(g):
        inner = np.repeat(np.add.reduceat(q * g, starts), sizes)
        return [y * (g - inner)]

    return theta.tape.record("softmax", [theta], y, vjp)


def stationary(weights, src: np.ndarray, dst: np.ndarray, n: int):
    """Invariant distribution of an irreducible chain given by sparse edges.

    The balance equations ``x_j = sum_i x_i P[i, j]`` for all but the last
    state plus ``sum x = 1`` form a nonsingular system for irreducible
    chains; it is LU-factored once and the factorization reused for the
    transposed adjoint solve.
    """
    wv = _val(weights)
    src = np.asarray(src, dtype=np.intp)
    dst = np.asarray(dst, dtype=np.intp)
    a = np.zeros((n, n))
    np.add.at(a, (dst, src), wv)
    a[np.arange(n), np.arange(n)] -= 1.0
    a[n - 1, :] = 1.0
    rhs = np.zeros(n)
    rhs[n - 1] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu = scipy.linalg.lu_factor(a, check_finite=False)
    u_diag = np.abs(np.diag(lu[0]))
    if not np.all(np.isfinite(lu[0])) or u_diag.min() <= 1e-12 * max(1.0, u_diag.max()):
        raise np.linalg.LinAlgError("stationary system is singular; chain not irreducible")
    x = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
    if not isinstance(weights, Var):
        return x

    def vjp(g):
        lam = scipy.linalg.lu_solve(lu, g, trans=1, check_finite=False)
        # a[dst, src] holds P[src, dst] except in the replaced last row
        gw = -lam[dst] * x[src]
        gw[dst == n - 1] = 0.0
        return [gw]

    return weights.tape.record("stationary", [weights], x, vjp)


def propagate(mass, weights, src_entry: np.ndarray, edge: np.ndarray, target: np.ndarray, n_out: int):
    """Sparse bilinear scatter ``out[target[e]] += mass[src_entry[e]] * weights[edge[e]]``."""
    mv, wv = _val(mass), _val(weights)
    contrib = mv[src_entry] * wv[edge]
    out = np.bincount(target, weights=contrib, minlength=n_out)
    tape = _tape_of(mass, weights)
    if tape is None:
        return out
    inputs = [x for x in (mass, weights) if isinstance(x, Var)]
    n_mass, n_w = len(mv), len(wv)

    def vjp(g):
        ge = g[target]
        res = []
        if isinstance(mass, Var):
            res.append(np.bincount(src_entry, weights=ge * wv[edge], minlength=n_mass))
        if isinstance(weights, Var):
            res.append(np.bincount(edge, weights=ge * mv[src_entry], minlength=n_w))
        return res

    return tape.record("propagate", inputs, out, vjp)
