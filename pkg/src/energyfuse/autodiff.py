"""Reverse-mode differentiation over a flat operation tape.

A DiffGraph records every tensor operation as a node (op tag, input ids,
value). Inputs always precede consumers on the tape, so one reverse scan
visits each node exactly once and accumulates exact adjoints.
"""

import numpy as np

from . import numeric
from .numeric import ContractError, as_matrix


class Tensor:
    """A (rows, cols) float64 value recorded on a DiffGraph."""

    __slots__ = ("graph", "nid", "data")

    def __init__(self, graph, nid, data):
        self.graph = graph
        self.nid = nid
        self.data = data

    @property
    def shape(self):
        return self.data.shape

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    def item(self) -> float:
        if self.data.shape != (1, 1):
            raise ContractError(f"item() on non-scalar shape {self.data.shape}")
        return float(self.data[0, 0])

    # keep numpy from taking over mixed expressions; reflected ops run instead
    __array_ufunc__ = None

    def _coerce(self, other):
        """Plain arrays become graph constants so mixed arithmetic works."""
        if isinstance(other, np.ndarray):
            return self.graph.constant(other)
        return other

    # arithmetic sugar; scalars route through scale / shift
    def __add__(self, other):
        other = self._coerce(other)
        if isinstance(other, Tensor):
            return self.graph.add(self, other)
        return self.graph.shift(self, float(other))

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        other = self._coerce(other)
        if isinstance(other, Tensor):
            return self.graph.sub(self, other)
        return self.graph.shift(self, -float(other))

    def __rsub__(self, other):
        return self.graph.scale(self, -1.0).__add__(other)

    def __mul__(self, other):
        other = self._coerce(other)
        if isinstance(other, Tensor):
            return self.graph.mul(self, other)
        return self.graph.scale(self, float(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return self.graph.scale(self, -1.0)

    def __matmul__(self, other):
        return self.graph.matmul(self, other)

    def __repr__(self):
        return f"Tensor(nid={self.nid}, shape={self.data.shape})"


class _Node:
    __slots__ = ("op", "inputs", "data", "aux")

    def __init__(self, op, inputs, data, aux=None):
        self.op = op
        self.inputs = inputs
        self.data = data
        self.aux = aux


class DiffGraph:
    """Single-writer tape of tensor operations."""

    def __init__(self):
        self.nodes = []

    def _record(self, op, inputs, data, aux=None) -> Tensor:
        self.nodes.append(_Node(op, tuple(t.nid for t in inputs), data, aux))
        return Tensor(self, len(self.nodes) - 1, data)

    def leaf(self, value) -> Tensor:
        """A differentiable input; its gradient is reported by backward."""
        return self._record("leaf", (), as_matrix(value).copy())

    def constant(self, value) -> Tensor:
        """Data that participates in values but never needs a gradient."""
        return self._record("const", (), as_matrix(value).copy())

    def _same_graph(self, *ts):
        for t in ts:
            if t.graph is not self:
                raise ContractError("tensors belong to different graphs")

    # ---- elementwise / structural ops ----

    def add(self, a, b) -> Tensor:
        self._same_graph(a, b)
        if a.shape != b.shape:
            raise ContractError(f"add shape mismatch: {a.shape} vs {b.shape}")
        return self._record("add", (a, b), a.data + b.data)

    def sub(self, a, b) -> Tensor:
        self._same_graph(a, b)
        if a.shape != b.shape:
            raise ContractError(f"sub shape mismatch: {a.shape} vs {b.shape}")
        return self._record("sub", (a, b), a.data - b.data)

    def mul(self, a, b) -> Tensor:
        self._same_graph(a, b)
        if a.shape != b.shape:
            raise ContractError(f"mul shape mismatch: {a.shape} vs {b.shape}")
        return self._record("mul", (a, b), a.data * b.data)

    def scale(self, a, c: float) -> Tensor:
        return self._record("scale", (a,), a.data * c, aux=c)

    def shift(self, a, c: float) -> Tensor:
        return self._record("shift", (a,), a.data + c, aux=c)

    def add_col(self, a, b) -> Tensor:
        """a (K, N) plus a column vector b (K, 1) broadcast over columns."""
        self._same_graph(a, b)
        if b.cols != 1 or a.rows != b.rows:
            raise ContractError(f"add_col shapes: {a.shape} vs {b.shape}")
        return self._record("add_col", (a, b), a.data + b.data)

    def sub_row(self, a, b) -> Tensor:
        """a (K, N) minus a row vector b (1, N) broadcast over rows."""
        self._same_graph(a, b)
        if b.rows != 1 or a.cols != b.cols:
            raise ContractError(f"sub_row shapes: {a.shape} vs {b.shape}")
        return self._record("sub_row", (a, b), a.data - b.data)

    def matmul(self, a, b) -> Tensor:
        self._same_graph(a, b)
        if a.cols != b.rows:
            raise ContractError(f"matmul shape mismatch: {a.shape} x {b.shape}")
        return self._record("matmul", (a, b), a.data @ b.data)

    def transpose(self, a) -> Tensor:
        return self._record("transpose", (a,), a.data.T.copy())

    # ---- nonlinearities ----

    def exp(self, a) -> Tensor:
        return self._record("exp", (a,), np.exp(a.data))

    def log(self, a) -> Tensor:
        return self._record("log", (a,), np.log(a.data))

    def sigmoid(self, a) -> Tensor:
        return self._record("sigmoid", (a,), numeric.sigmoid(a.data))

    def tanh(self, a) -> Tensor:
        return self._record("tanh", (a,), np.tanh(a.data))

    def abs(self, a) -> Tensor:
        return self._record("abs", (a,), np.abs(a.data))

    def softmax_cols(self, a) -> Tensor:
        return self._record("softmax_cols", (a,), numeric.softmax_cols(a.data))

    def lse_cols(self, a) -> Tensor:
        return self._record("lse_cols", (a,), numeric.lse_cols(a.data))

    # ---- reductions / markers ----

    def sum(self, a) -> Tensor:
        return self._record("sum", (a,), np.array([[a.data.sum()]]))

    def stop_grad(self, a) -> Tensor:
        """Value passes through; gradients do not."""
        return self._record("stop_grad", (a,), a.data)

    # ---- reverse pass ----

    def backward(self, output: Tensor) -> list:
        """Adjoint of `output` for every node; None where unreachable.

        Entries at leaf ids are d(output)/d(leaf).
        """
        self._same_graph(output)
        if output.data.shape != (1, 1):
            raise ContractError(
                f"backward needs a scalar output, got shape {output.data.shape}"
            )
        grads = [None] * len(self.nodes)
        grads[output.nid] = np.ones((1, 1))
        for nid in range(output.nid, -1, -1):
            g = grads[nid]
            if g is None:
                continue
            node = self.nodes[nid]
            for iid, ig in zip(node.inputs, self._vjp(node, g)):
                if ig is None:
                    continue
                if grads[iid] is None:
                    # vjps may hand back g itself; copy before accumulating
                    grads[iid] = ig.copy()
                else:
                    grads[iid] += ig
        return grads

    def _vjp(self, node, g):
        op = node.op
        ins = [self.nodes[i] for i in node.inputs]
        if op in ("leaf", "const"):
            return ()
        if op == "add":
            return (g, g)
        if op == "sub":
            return (g, -g)
        if op == "mul":
            return (g * ins[1].data, g * ins[0].data)
        if op == "scale":
            return (g * node.aux,)
        if op == "shift":
            return (g,)
        if op == "add_col":
            return (g, g.sum(axis=1, keepdims=True))
        if op == "sub_row":
            return (g, -g.sum(axis=0, keepdims=True))
        if op == "matmul":
            return (g @ ins[1].data.T, ins[0].data.T @ g)
        if op == "transpose":
            return (g.T,)
        if op == "exp":
            return (g * node.data,)
        if op == "log":
            return (g / ins[0].data,)
        if op == "sigmoid":
            return (g * node.data * (1.0 - node.data),)
        if op == "tanh":
            return (g * (1.0 - node.data * node.data),)
        if op == "abs":
            return (g * np.sign(ins[0].data),)
        if op == "softmax_cols":
            s = node.data
            return (s * (g - np.sum(g * s, axis=0, keepdims=True)),)
        if op == "lse_cols":
            return (numeric.softmax_cols(ins[0].data) * g,)
        if op == "sum":
            return (np.full(ins[0].data.shape, g[0, 0]),)
        if op == "stop_grad":
            return (None,)
        raise AssertionError(f"no vjp for op {op!r}")


# ---- generic helpers usable on Tensors or plain arrays ----


def _lift(graph, x):
    return x if isinstance(x, Tensor) else graph.constant(x)


def matmul(a, b):
    if isinstance(a, Tensor):
        return a.graph.matmul(a, _lift(a.graph, b))
    if isinstance(b, Tensor):
        return b.graph.matmul(_lift(b.graph, a), b)
    return numeric.matmul(a, b)


def transpose(a):
    if isinstance(a, Tensor):
        return a.graph.transpose(a)
    return np.asarray(a).T


def softmax_cols(a):
    if isinstance(a, Tensor):
        return a.graph.softmax_cols(a)
    return numeric.softmax_cols(a)


def lse_cols(a):
    if isinstance(a, Tensor):
        return a.graph.lse_cols(a)
    return numeric.lse_cols(a)


def sub_row(a, b):
    """a (K, N) minus a row (1, N), broadcast over rows."""
    if isinstance(a, Tensor):
        return a.graph.sub_row(a, _lift(a.graph, b))
    return np.asarray(a) - np.asarray(b)


def add_col(a, b):
    """a (K, N) plus a column (K, 1), broadcast over columns."""
    if isinstance(a, Tensor):
        return a.graph.add_col(a, _lift(a.graph, b))
    if isinstance(b, Tensor):
        return b.graph.add_col(_lift(b.graph, a), b)
    return np.asarray(a) + np.asarray(b)


def tanh(a):
    if isinstance(a, Tensor):
        return a.graph.tanh(a)
    return np.tanh(a)


def sigmoid(a):
    if isinstance(a, Tensor):
        return a.graph.sigmoid(a)
    return numeric.sigmoid(np.asarray(a, dtype=np.float64))


def log(a):
    if isinstance(a, Tensor):
        return a.graph.log(a)
    return np.log(a)


def absolute(a):
    if isinstance(a, Tensor):
        return a.graph.abs(a)
    return np.abs(a)


def sum_all(a):
    """Scalar sum: a (1, 1) Tensor on a graph, a float on plain arrays."""
    if isinstance(a, Tensor):
        return a.graph.sum(a)
    return float(np.sum(a))


def detach(a):
    """Block gradient flow on a graph; identity on plain arrays."""
    if isinstance(a, Tensor):
        return a.graph.stop_grad(a)
    return a


def raw(a) -> np.ndarray:
    """The numeric value of a Tensor or array, as an ndarray."""
    return a.data if isinstance(a, Tensor) else np.asarray(a, dtype=np.float64)


def grad_check(f, point: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between analytic gradient of f and central FD.

    f maps a Tensor to a scalar Tensor; it is re-run on fresh graphs for
    the finite-difference probes. Error per coordinate is
    |analytic - fd| / max(1e-12, |analytic| + |fd|).
    """
    point = as_matrix(point)
    g = DiffGraph()
    x = g.leaf(point)
    out = f(x)
    analytic = g.backward(out)[x.nid]
    if analytic is None:
        analytic = np.zeros_like(point)

    def value_at(p):
        gg = DiffGraph()
        return f(gg.leaf(p)).item()

    fd = np.zeros_like(point)
    for idx in np.ndindex(point.shape):
        dp = point.copy()
        dp[idx] += h
        up = value_at(dp)
        dp[idx] -= 2 * h
        dn = value_at(dp)
        fd[idx] = (up - dn) / (2 * h)

    denom = np.maximum(1e-12, np.abs(analytic) + np.abs(fd))
    return float(np.max(np.abs(analytic - fd) / denom))
