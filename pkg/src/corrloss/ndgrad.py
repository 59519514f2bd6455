"""Small dense reverse-mode autodiff engine over float64 numpy arrays.

Values are rank 0, 1 or 2. Broadcasting is limited to a rank-0 operand
against any shape. Every op returns a new ``Node``; the tape is rebuilt on
each forward pass, and nodes carry a global creation counter so that the
reachable subgraph of a root can be replayed in reverse creation order.
"""
from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

EPS = 1e-12

_ids = itertools.count()


class ShapeError(ValueError):
    """Operand shapes do not conform for the requested op."""

    def __init__(self, op: str, a: tuple, b: tuple | None = None):
        self.op, self.shapes = op, (a, b)
        msg = f"{op}: incompatible shapes {a}" + (f" and {b}" if b is not None else "")
        super().__init__(msg)


def as_array(data) -> np.ndarray:
    """Validated read-only float64 copy of ``data`` (rank <= 2, all finite)."""
    arr = np.array(data, dtype=np.float64)
    if arr.ndim > 2:
        raise ShapeError("array", arr.shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError("array values must be finite")
    arr.setflags(write=False)
    return arr


class Node:
    __slots__ = ("value", "grad", "requires_grad", "parents", "backward_fn", "op", "id")
    # make numpy defer to our reflected operators instead of building object arrays
    __array_ufunc__ = None

    def __init__(
        self,
        value,
        requires_grad: bool = False,
        parents: Sequence["Node"] = (),
        backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None,
        op: str = "leaf",
        _checked: bool = False,
    ):
        self.value = value if _checked else as_array(value)
        self.grad = np.zeros(self.value.shape)
        self.requires_grad = requires_grad
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.op = op
        self.id = next(_ids)

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def zero_grad(self) -> None:
        self.grad = np.zeros(self.value.shape)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Node(op={self.op!r}, shape={self.shape}, requires_grad={self.requires_grad})"

    __add__ = lambda self, o: add(self, o)
    __radd__ = lambda self, o: add(o, self)
    __sub__ = lambda self, o: sub(self, o)
    __rsub__ = lambda self, o: sub(o, self)
    __mul__ = lambda self, o: mul(self, o)
    __rmul__ = lambda self, o: mul(o, self)
    __truediv__ = lambda self, o: div(self, o)
    __rtruediv__ = lambda self, o: div(o, self)
    __matmul__ = lambda self, o: matmul(self, o)
    __neg__ = lambda self: neg(self)


def tensor(data, requires_grad: bool = False) -> Node:
    return Node(data, requires_grad=requires_grad)


def param(data) -> Node:
    return Node(data, requires_grad=True)


def _lift(x) -> Node:
    return x if isinstance(x, Node) else Node(x)


def _result(value: np.ndarray, parents: Sequence[Node], backward_fn, op: str) -> Node:
    value = np.asarray(value, dtype=np.float64)
    value.setflags(write=False)
    needs = any(p.requires_grad for p in parents)
    return Node(
        value,
        requires_grad=needs,
        parents=parents if needs else (),
        backward_fn=backward_fn if needs else None,
        op=op,
        _checked=True,
    )


def detach(node: Node) -> Node:
    """Same value, cut from the graph."""
    return Node(node.value, requires_grad=False, op="detach", _checked=True)


def zero_grad(nodes: Iterable[Node]) -> None:
    for n in nodes:
        n.zero_grad()


def backward(root: Node) -> None:
    """Accumulate d(root)/d(node) into ``node.grad`` for every reachable node."""
    if root.value.ndim != 0:
        raise ShapeError("backward (root must be scalar)", root.shape)
    if not root.requires_grad:
        return
    seen: dict[int, Node] = {}
    stack = [root]
    while stack:
        n = stack.pop()
        if n.id in seen:
            continue
        seen[n.id] = n
        stack.extend(p for p in n.parents if p.requires_grad and p.id not in seen)
    # creation order is a topological order, so descending ids is a reverse one
    order = sorted(seen.values(), key=lambda n: n.id, reverse=True)
    local = {root.id: np.ones(())}
    for n in order:
        g = local.pop(n.id, None)
        if g is None:
            continue
        n.grad = n.grad + g
        if n.backward_fn is None:
            continue
        for p, pg in zip(n.parents, n.backward_fn(g)):
            if pg is None or not p.requires_grad:
                continue
            local[p.id] = local[p.id] + pg if p.id in local else pg


# ---------------------------------------------------------------- elementwise


def _binary_shapes(op: str, a: Node, b: Node) -> None:
    if a.shape != b.shape and a.value.ndim != 0 and b.value.ndim != 0:
        raise ShapeError(op, a.shape, b.shape)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    return np.sum(g) if shape == () and g.shape != () else g


def add(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    _binary_shapes("add", a, b)
    sa, sb = a.shape, b.shape
    return _result(a.value + b.value, (a, b),
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    _binary_shapes("sub", a, b)
    sa, sb = a.shape, b.shape
    return _result(a.value - b.value, (a, b),
                   lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub")


def mul(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    _binary_shapes("mul", a, b)
    av, bv = a.value, b.value
    return _result(av * bv, (a, b),
                   lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)),
                   "mul")


def _guard(d: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Clamp |d| to at least eps, keeping sign (zero counts as positive)."""
    small = np.abs(d) < eps
    if not np.any(small):
        return d, small
    return np.where(small, np.where(d < 0, -eps, eps), d), small


def div(a, b, eps: float = EPS) -> Node:
    """Elementwise a / b; denominators below ``eps`` in magnitude are clamped."""
    a, b = _lift(a), _lift(b)
    _binary_shapes("div", a, b)
    av = a.value
    bv, clamped = _guard(b.value, eps)
    out = av / bv

    def bw(g):
        gb = np.where(clamped, 0.0, -g * out / bv)
        return _unbroadcast(g / bv, av.shape), _unbroadcast(gb, bv.shape)

    return _result(out, (a, b), bw, "div")


def neg(a: Node) -> Node:
    return _result(-a.value, (a,), lambda g: (-g,), "neg")


def scalar_mul(a: Node, c: float) -> Node:
    c = float(c)
    return _result(a.value * c, (a,), lambda g: (g * c,), "scalar_mul")


def square(a: Node) -> Node:
    v = a.value
    return _result(v * v, (a,), lambda g: (2.0 * v * g,), "square")


def sqrt(a: Node) -> Node:
    if np.any(a.value < 0):
        raise ValueError("sqrt of negative value")
    out = np.sqrt(a.value)
    safe, _ = _guard(out, EPS)
    return _result(out, (a,), lambda g: (g / (2.0 * safe),), "sqrt")


def abs(a: Node) -> Node:  # noqa: A001 - mirrors numpy naming
    v = a.value
    return _result(np.abs(v), (a,), lambda g: (g * np.sign(v),), "abs")


def max_with_zero(a: Node) -> Node:
    v = a.value
    return _result(np.maximum(v, 0.0), (a,), lambda g: (g * (v > 0),), "relu")


relu = max_with_zero


def tanh(a: Node) -> Node:
    out = np.tanh(a.value)
    return _result(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


# ---------------------------------------------------------------- reductions


def sum(a: Node) -> Node:  # noqa: A001
    shape = a.shape
    return _result(np.sum(a.value), (a,), lambda g: (np.full(shape, float(g)),), "sum")


def mean(a: Node) -> Node:
    n = a.value.size
    shape = a.shape
    return _result(np.mean(a.value), (a,), lambda g: (np.full(shape, float(g) / n),), "mean")


def variance(a: Node) -> Node:
    """Population variance over all entries."""
    n = a.value.size
    dev = a.value - np.mean(a.value)
    return _result(np.mean(dev * dev), (a,), lambda g: (2.0 * float(g) * dev / n,), "variance")


def std(a: Node, eps: float = EPS) -> Node:
    """Population standard deviation; a constant input gets zero gradient."""
    n = a.value.size
    dev = a.value - np.mean(a.value)
    out = np.sqrt(np.mean(dev * dev))
    denom = max(float(out), eps)
    return _result(out, (a,), lambda g: (float(g) * dev / (n * denom),), "std")


def dot(a: Node, b: Node) -> Node:
    if a.value.ndim != 1 or a.shape != b.shape:
        raise ShapeError("dot", a.shape, b.shape)
    av, bv = a.value, b.value
    return _result(av @ bv, (a, b), lambda g: (g * bv, g * av), "dot")


def l2_norm(a: Node, eps: float = EPS) -> Node:
    v = a.value
    out = np.sqrt(np.sum(v * v))
    denom = max(float(out), eps)
    return _result(out, (a,), lambda g: (g * v / denom,), "l2_norm")


def cosine_similarity(a: Node, b: Node, eps: float = EPS) -> Node:
    """Cosine of the angle between two vectors.

    With ``eps=0`` a zero-norm operand raises instead of being guarded.
    """
    if a.value.ndim != 1 or a.shape != b.shape:
        raise ShapeError("cosine_similarity", a.shape, b.shape)
    na, nb = np.linalg.norm(a.value), np.linalg.norm(b.value)
    if eps <= 0 and (na == 0 or nb == 0):
        raise ValueError("cosine_similarity: zero-norm operand")
    na, nb = max(na, eps), max(nb, eps)
    ua, ub = a.value / na, b.value / nb
    c = float(ua @ ub)

    def bw(g):
        g = float(g)
        return g * (ub - c * ua) / na, g * (ua - c * ub) / nb

    return _result(np.clip(c, -1.0, 1.0), (a, b), bw, "cosine_similarity")


def cosine_matrix(x: Node, eps: float = EPS) -> Node:
    """All-pairs cosine similarities between the rows of a matrix."""
    if x.value.ndim != 2:
        raise ShapeError("cosine_matrix", x.shape)
    norms = np.maximum(np.linalg.norm(x.value, axis=1, keepdims=True), eps)
    u = x.value / norms
    s = u @ u.T

    def bw(g):
        gu = (g + g.T) @ u
        radial = np.sum(gu * u, axis=1, keepdims=True)
        return ((gu - radial * u) / norms,)

    return _result(np.clip(s, -1.0, 1.0), (x,), bw, "cosine_matrix")


# ---------------------------------------------------------------- structure


def matmul(a: Node, b: Node) -> Node:
    av, bv = a.value, b.value
    if av.ndim != 2 or bv.ndim not in (1, 2) or av.shape[1] != bv.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)

    def bw(g):
        if bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        return g @ bv.T, av.T @ g

    return _result(av @ bv, (a, b), bw, "matmul")


def add_bias(x: Node, bias: Node) -> Node:
    """Add a length-k vector to every row of an m x k matrix."""
    if x.value.ndim != 2 or bias.value.ndim != 1 or x.shape[1] != bias.shape[0]:
        raise ShapeError("add_bias", x.shape, bias.shape)
    return _result(x.value + bias.value, (x, bias), lambda g: (g, g.sum(axis=0)), "add_bias")


def reshape(a: Node, shape: tuple) -> Node:
    old = a.shape
    try:
        out = a.value.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", old, tuple(shape)) from None
    return _result(out, (a,), lambda g: (np.reshape(g, old),), "reshape")


def take(a: Node, idx) -> Node:
    """Gather entries of a vector by integer index (repeats allowed)."""
    if a.value.ndim != 1:
        raise ShapeError("take", a.shape)
    idx = np.asarray(idx, dtype=np.intp)
    shape = a.shape

    def bw(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _result(a.value[idx], (a,), bw, "take")


def gather(a: Node, rows, cols) -> Node:
    """Vector of matrix entries ``a[rows[t], cols[t]]``."""
    if a.value.ndim != 2:
        raise ShapeError("gather", a.shape)
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    shape = a.shape

    def bw(g):
        out = np.zeros(shape)
        np.add.at(out, (rows, cols), g)
        return (out,)

    return _result(a.value[rows, cols], (a,), bw, "gather")


def row(a: Node, i: int) -> Node:
    if a.value.ndim != 2:
        raise ShapeError("row", a.shape)
    shape = a.shape

    def bw(g):
        out = np.zeros(shape)
        out[i] = g
        return (out,)

    return _result(a.value[i], (a,), bw, "row")
