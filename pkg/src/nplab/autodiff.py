"""Tape-based reverse-mode automatic differentiation with nested forward mode.

A :class:`Graph` is an append-only list of nodes.  Every :class:`Tensor`
produced by an operation is appended after its parents, so walking the list
backwards is a valid reverse topological order.  :class:`DualTensor` carries
a directional derivative alongside a primal value; both components are
ordinary graph tensors (or duals themselves), which makes the tangent
differentiable with respect to the parameters recorded on the graph.
"""

import numpy as np

from .exceptions import ContractError

__all__ = [
    "Graph",
    "Tensor",
    "DualTensor",
    "backward",
    "spatial_derivatives",
    "value_of",
    "tanh",
    "relu",
    "leaky_relu",
    "activation",
    "absolute",
    "exp",
    "log",
    "sqrt",
    "square",
    "sin",
    "matmul",
    "tsum",
    "tmean",
    "concat",
    "jet_bias",
    "jet_activation",
    "record_branches",
]

# when not None, piecewise-linear operations append the sign pattern of
# their arguments here (see record_branches)
_branch_log = None


class record_branches:
    """Context manager collecting the branch taken by every kinked operation.

    Inside the block, ``leaky_relu``, ``relu``, ``absolute`` and the
    piecewise-linear jet activations append a boolean array (argument
    ``>= 0``, or ``> 0`` for ``absolute``) to the returned list.  Two
    evaluations with equal logs lie on the same linear piece.
    """

    def __enter__(self):
        global _branch_log
        self._previous = _branch_log
        _branch_log = self.log = []
        return self.log

    def __exit__(self, *exc):
        global _branch_log
        _branch_log = self._previous
        return False


def _log_branch(x, strict=False):
    if _branch_log is not None:
        x = np.asarray(x)
        _branch_log.append(x > 0.0 if strict else x >= 0.0)
        if strict:
            _branch_log.append(x < 0.0)


class Graph:
    """Append-only record of tensor operations."""

    def __init__(self):
        self.nodes = []
        self.params = []

    def __len__(self):
        return len(self.nodes)

    def _append(self, tensor):
        tensor.index = len(self.nodes)
        self.nodes.append(tensor)
        return tensor

    def param(self, value, name=None):
        """Register a trainable leaf."""
        t = Tensor(self, value, kind="param", requires_grad=True, name=name)
        self.params.append(t)
        return t

    def input(self, value, requires_grad=False, name=None):
        """Register a non-trainable input leaf.

        Inputs are skipped by :func:`backward` unless requested explicitly
        through ``wrt``; ``requires_grad`` must then be set.
        """
        return Tensor(self, value, kind="input", requires_grad=requires_grad, name=name)

    def constant(self, value):
        return Tensor(self, value, kind="const")

    def release(self):
        """Drop the tape so its arrays are freed at once.

        Tensors point back at their graph, so without this a finished tape
        waits for the cyclic garbage collector.
        """
        self.nodes = []
        self.params = []


class Tensor:
    """A float64 array recorded on a :class:`Graph`."""

    __slots__ = ("graph", "value", "parents", "vjp", "index", "kind", "requires_grad", "name")
    __array_priority__ = 1000
    __array_ufunc__ = None

    def __init__(self, graph, value, parents=(), vjp=None, kind="op", requires_grad=False, name=None):
        self.graph = graph
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.vjp = vjp
        self.kind = kind
        self.requires_grad = requires_grad
        self.name = name
        graph._append(self)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor<{self.kind}{label} #{self.index} shape={self.shape}>"

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def T(self):
        return transpose(self)

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
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _op(graph, value, parents, vjp):
    needs = any(p.requires_grad for p in parents)
    return Tensor(graph, value, parents, vjp if needs else None, requires_grad=needs)


def _graph_of(*items):
    for item in items:
        if isinstance(item, Tensor):
            return item.graph
    raise ContractError("operation needs at least one graph tensor operand")


def _lift(graph, x):
    if isinstance(x, Tensor):
        if x.graph is not graph:
            raise ContractError("tensors from different graphs cannot be combined")
        return x
    return graph.constant(x)


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    if lead > 0:
        grad = grad.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def value_of(x):
    """Innermost primal array of a tensor, dual or plain array."""
    while isinstance(x, DualTensor):
        x = x.primal
    if isinstance(x, Tensor):
        return x.value
    return np.asarray(x, dtype=np.float64)


# --------------------------------------------------------------------------
# primitive operations on Tensor


def add(a, b):
    if isinstance(a, DualTensor) or isinstance(b, DualTensor):
        return DualTensor._lift(a) + b
    g = _graph_of(a, b)
    a, b = _lift(g, a), _lift(g, b)
    sa, sb = a.shape, b.shape
    return _op(g, a.value + b.value, (a, b),
               lambda G: (_unbroadcast(G, sa), _unbroadcast(G, sb)))


def sub(a, b):
    if isinstance(a, DualTensor) or isinstance(b, DualTensor):
        return DualTensor._lift(a) - b
    g = _graph_of(a, b)
    a, b = _lift(g, a), _lift(g, b)
    sa, sb = a.shape, b.shape
    return _op(g, a.value - b.value, (a, b),
               lambda G: (_unbroadcast(G, sa), -_unbroadcast(G, sb)))


def mul(a, b):
    if isinstance(a, DualTensor) or isinstance(b, DualTensor):
        return DualTensor._lift(a) * b
    g = _graph_of(a, b)
    a, b = _lift(g, a), _lift(g, b)
    av, bv = a.value, b.value

    def vjp(G):
        return (_unbroadcast(G * bv, av.shape) if a.requires_grad else None,
                _unbroadcast(G * av, bv.shape) if b.requires_grad else None)

    return _op(g, av * bv, (a, b), vjp)


def div(a, b):
    if isinstance(a, DualTensor) or isinstance(b, DualTensor):
        return DualTensor._lift(a) / b
    g = _graph_of(a, b)
    a, b = _lift(g, a), _lift(g, b)
    av, bv = a.value, b.value
    out = av / bv

    def vjp(G):
        return (_unbroadcast(G / bv, av.shape) if a.requires_grad else None,
                _unbroadcast(-G * out / bv, bv.shape) if b.requires_grad else None)

    return _op(g, out, (a, b), vjp)


def neg(a):
    if isinstance(a, DualTensor):
        return -a
    return _op(a.graph, -a.value, (a,), lambda G: (-G,))


def power(a, exponent):
    if isinstance(a, DualTensor):
        return a ** exponent
    k = float(exponent)
    av = a.value
    if k == 2.0:
        return _op(a.graph, av * av, (a,), lambda G: (2.0 * G * av,))
    return _op(a.graph, av ** k, (a,), lambda G: (G * k * av ** (k - 1.0),))


def matmul(a, b):
    """Matrix product; a 3-d left operand is treated as a stack of rows."""
    if isinstance(a, DualTensor) or isinstance(b, DualTensor):
        return DualTensor._lift(a) @ b
    g = _graph_of(a, b)
    a, b = _lift(g, a), _lift(g, b)
    av, bv = a.value, b.value
    if bv.ndim != 2:
        raise ContractError("right matmul operand must be 2-d")
    if av.ndim == 1:
        return _op(g, av @ bv, (a, b),
                   lambda G: (bv @ G, np.outer(av, G)))
    flat = av.reshape(-1, av.shape[-1])
    out = (flat @ bv).reshape(av.shape[:-1] + (bv.shape[1],))

    def vjp(G):
        G2 = G.reshape(-1, G.shape[-1])
        ga = (G2 @ bv.T).reshape(av.shape) if a.requires_grad else None
        gb = flat.T @ G2 if b.requires_grad else None
        return ga, gb

    return _op(g, out, (a, b), vjp)


def transpose(a):
    if isinstance(a, DualTensor):
        return DualTensor(transpose(a.primal), transpose(a.tangent))
    return _op(a.graph, a.value.T, (a,), lambda G: (G.T,))


def reshape(a, shape):
    if isinstance(a, DualTensor):
        return DualTensor(reshape(a.primal, shape), reshape(a.tangent, shape))
    old = a.shape
    return _op(a.graph, a.value.reshape(shape), (a,), lambda G: (G.reshape(old),))


def getitem(a, key):
    if isinstance(a, DualTensor):
        return DualTensor(a.primal[key], a.tangent[key])
    shape = a.shape
    basic = _is_basic_index(key)

    def vjp(G):
        out = np.zeros(shape)
        if basic:
            out[key] = G
        else:
            np.add.at(out, key, G)
        return (out,)

    return _op(a.graph, a.value[key], (a,), vjp)


def _is_basic_index(key):
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(k, (int, np.integer, slice)) or k is None or k is Ellipsis for k in parts)


def tsum(a, axis=None, keepdims=False):
    if isinstance(a, DualTensor):
        return DualTensor(tsum(a.primal, axis, keepdims), tsum(a.tangent, axis, keepdims))
    shape = a.shape
    out = a.value.sum(axis=axis, keepdims=keepdims)

    def vjp(G):
        if axis is not None and not keepdims:
            G = np.expand_dims(G, axis)
        return (np.broadcast_to(G, shape),)

    return _op(a.graph, out, (a,), vjp)


def tmean(a, axis=None, keepdims=False):
    if isinstance(a, DualTensor):
        return DualTensor(tmean(a.primal, axis, keepdims), tmean(a.tangent, axis, keepdims))
    shape = a.shape
    count = a.value.size if axis is None else np.prod([shape[i] for i in np.atleast_1d(axis)])
    out = a.value.mean(axis=axis, keepdims=keepdims)

    def vjp(G):
        if axis is not None and not keepdims:
            G = np.expand_dims(G, axis)
        return (np.broadcast_to(G / count, shape),)

    return _op(a.graph, out, (a,), vjp)


def concat(items, axis=0):
    if any(isinstance(x, DualTensor) for x in items):
        items = [DualTensor._lift(x) for x in items]
        return DualTensor(concat([x.primal for x in items], axis),
                          concat([x.tangent for x in items], axis))
    g = _graph_of(*items)
    items = [_lift(g, x) for x in items]
    sizes = [x.shape[axis] for x in items]
    cuts = np.cumsum(sizes)[:-1]
    return _op(g, np.concatenate([x.value for x in items], axis=axis), tuple(items),
               lambda G: tuple(np.split(G, cuts, axis=axis)))


def _unary(a, fn, dfn_from):
    """Elementwise map; ``dfn_from(x, y)`` returns dy/dx as an array."""
    av = a.value
    out = fn(av)
    return _op(a.graph, out, (a,), lambda G: (G * dfn_from(av, out),))


def tanh(a):
    if isinstance(a, DualTensor):
        y = tanh(a.primal)
        return DualTensor(y, (1.0 - y * y) * a.tangent)
    return _unary(a, np.tanh, lambda x, y: 1.0 - y * y)


def relu(a):
    return leaky_relu(a, 0.0)


def leaky_relu(a, slope=0.1):
    """Leaky ReLU with the right-hand derivative at the kink."""
    if isinstance(a, DualTensor):
        _log_branch(value_of(a.primal))
        mask = np.where(value_of(a.primal) >= 0.0, 1.0, slope)
        return DualTensor(leaky_relu(a.primal, slope), a.tangent * mask)
    _log_branch(value_of(a))
    return _unary(a, lambda x: np.where(x >= 0.0, x, slope * x),
                  lambda x, y: np.where(x >= 0.0, 1.0, slope))


def activation(a, name, slope=0.1):
    if name == "tanh":
        return tanh(a)
    if name == "relu":
        return relu(a)
    if name == "leaky_relu":
        return leaky_relu(a, slope)
    if name == "identity":
        return a
    raise ContractError(f"unknown activation {name!r}")


def absolute(a):
    if isinstance(a, DualTensor):
        return DualTensor(absolute(a.primal), a.tangent * np.sign(value_of(a.primal)))
    _log_branch(value_of(a), strict=True)
    return _unary(a, np.abs, lambda x, y: np.sign(x))


def exp(a):
    if isinstance(a, DualTensor):
        y = exp(a.primal)
        return DualTensor(y, y * a.tangent)
    return _unary(a, np.exp, lambda x, y: y)


def log(a):
    if isinstance(a, DualTensor):
        return DualTensor(log(a.primal), a.tangent / a.primal)
    return _unary(a, np.log, lambda x, y: 1.0 / x)


def sqrt(a):
    if isinstance(a, DualTensor):
        y = sqrt(a.primal)
        return DualTensor(y, a.tangent / (2.0 * y))
    return _unary(a, np.sqrt, lambda x, y: 0.5 / y)


def square(a):
    return power(a, 2)


def sin(a):
    if isinstance(a, DualTensor):
        return DualTensor(sin(a.primal), cos(a.primal) * a.tangent)
    return _unary(a, np.sin, lambda x, y: np.cos(x))


def cos(a):
    if isinstance(a, DualTensor):
        return DualTensor(cos(a.primal), -sin(a.primal) * a.tangent)
    return _unary(a, np.cos, lambda x, y: -np.sin(x))


def batch_norm_train(x, gamma, beta, eps):
    """Batch-statistics normalization over axis 0, then scale and shift.

    Returns the output tensor with the batch mean and (biased) variance.
    """
    if isinstance(x, DualTensor):
        mu = tmean(x, axis=0, keepdims=True)
        c = x - mu
        var = tmean(c * c, axis=0, keepdims=True)
        out = c / sqrt(var + eps) * gamma + beta
        return out, value_of(mu)[0], value_of(var)[0]
    g = _graph_of(x, gamma, beta)
    x, gamma, beta = _lift(g, x), _lift(g, gamma), _lift(g, beta)
    xv = x.value
    n = xv.shape[0]
    mu = xv.mean(axis=0)
    c = xv - mu
    var = (c * c).mean(axis=0)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = c * inv
    gv = gamma.value

    def vjp(G):
        dxhat = G * gv
        dx = inv / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        return dx, (G * xhat).sum(axis=0), G.sum(axis=0)

    out = _op(g, xhat * gv + beta.value, (x, gamma, beta), vjp)
    return out, mu, var


# --------------------------------------------------------------------------
# fused jet primitives
#
# A jet is a (S, n, k) tensor: stream 0 holds values, streams 1..P first
# directional derivatives, the remaining Q streams second derivatives along
# the first-order direction ``second_of[q]``.


def jet_bias(J, b):
    """Add a bias vector to the value stream of a jet only."""
    g = _graph_of(J, b)
    J, b = _lift(g, J), _lift(g, b)
    out = J.value.copy()
    out[0] += b.value
    return _op(g, out, (J, b), lambda G: (G, G[0].sum(axis=0)))


def jet_activation(J, name, n_first, second_of=(), slope=0.1, bias=None):
    """Propagate a jet through ``act(. + bias)``.

    The bias (optional) is added to the value stream only.  Derivative
    streams are updated with the chain rule; for piecewise-linear
    activations the second derivative of the activation is taken as zero.
    """
    g = _graph_of(J, bias) if bias is not None else J.graph
    parents = (J,) if bias is None else (J, _lift(g, bias))
    Z = J.value
    P = n_first
    second_of = [int(j) for j in second_of]
    v = Z[0] if bias is None else Z[0] + parents[1].value
    d1, d2 = Z[1:1 + P], Z[1 + P:]
    out = np.empty_like(Z)
    a = out[0]
    if name == "tanh":
        np.tanh(v, out=a)
        s = a * a
        np.subtract(1.0, s, out=s)
        s2 = a * s
        s2 *= -2.0
    elif name in ("relu", "leaky_relu"):
        lo = 0.0 if name == "relu" else slope
        _log_branch(v)
        s = np.where(v >= 0.0, 1.0, lo)
        np.multiply(v, s, out=a)
        s2 = None
    elif name == "identity":
        a[...] = v
        s, s2 = np.ones_like(v), None
    else:
        raise ContractError(f"unknown activation {name!r}")
    np.multiply(d1, s, out=out[1:1 + P])
    if second_of:
        np.multiply(d2, s, out=out[1 + P:])
        if s2 is not None:
            for q, j in enumerate(second_of):
                sq = d1[j] * d1[j]
                sq *= s2
                out[1 + P + q] += sq

    def vjp(G):
        g0, g1, g2 = G[0], G[1:1 + P], G[1 + P:]
        dZ = np.empty_like(Z)
        np.multiply(g1, s, out=dZ[1:1 + P])
        dv = dZ[0]
        np.multiply(g0, s, out=dv)
        if second_of:
            np.multiply(g2, s, out=dZ[1 + P:])
        if s2 is not None:
            acc = (g1 * d1).sum(axis=0)
            if second_of:
                acc += (g2 * d2).sum(axis=0)
                ds2 = a * a
                ds2 *= 4.0
                ds2 -= 2.0 * s
                ds2 *= s
                for q, j in enumerate(second_of):
                    gs = g2[q] * d1[j]
                    acc_j = gs * d1[j]
                    acc_j *= ds2
                    dv += acc_j
                    gs *= s2
                    gs *= 2.0
                    dZ[1 + j] += gs
            acc *= s2
            dv += acc
        if bias is None:
            return (dZ,)
        return dZ, dv.sum(axis=0)

    return _op(g, out, parents, vjp)


# --------------------------------------------------------------------------
# forward mode


class DualTensor:
    """Primal value plus one directional derivative.

    Components are graph tensors, arrays, or nested duals.  Arithmetic is
    expressed through the generic operations above, so tangents remain
    recorded on the graph.
    """

    __slots__ = ("primal", "tangent")
    __array_priority__ = 1001
    __array_ufunc__ = None

    def __init__(self, primal, tangent):
        ps, ts = np.shape(value_of(primal)), np.shape(value_of(tangent))
        if ps != ts:
            raise ContractError(f"primal shape {ps} != tangent shape {ts}")
        self.primal = primal
        self.tangent = tangent

    @staticmethod
    def _lift(x):
        if isinstance(x, DualTensor):
            return x
        return DualTensor(x, np.zeros(np.shape(value_of(x))))

    def __repr__(self):
        return f"DualTensor(primal={self.primal!r}, tangent={self.tangent!r})"

    @property
    def shape(self):
        return np.shape(value_of(self.primal))

    @property
    def T(self):
        return transpose(self)

    def __add__(self, other):
        if isinstance(other, DualTensor):
            return DualTensor(self.primal + other.primal, self.tangent + other.tangent)
        return DualTensor(self.primal + other, self.tangent)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, DualTensor):
            return DualTensor(self.primal - other.primal, self.tangent - other.tangent)
        return DualTensor(self.primal - other, self.tangent)

    def __rsub__(self, other):
        return DualTensor(other - self.primal, -self.tangent)

    def __neg__(self):
        return DualTensor(-self.primal, -self.tangent)

    def __mul__(self, other):
        if isinstance(other, DualTensor):
            return DualTensor(self.primal * other.primal,
                              self.primal * other.tangent + self.tangent * other.primal)
        return DualTensor(self.primal * other, self.tangent * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, DualTensor):
            q = self.primal / other.primal
            return DualTensor(q, (self.tangent - q * other.tangent) / other.primal)
        return DualTensor(self.primal / other, self.tangent / other)

    def __rtruediv__(self, other):
        q = other / self.primal
        return DualTensor(q, -q * self.tangent / self.primal)

    def __pow__(self, exponent):
        k = float(exponent)
        if k == 2.0:
            return DualTensor(self.primal * self.primal, 2.0 * self.primal * self.tangent)
        return DualTensor(self.primal ** k, k * self.primal ** (k - 1.0) * self.tangent)

    def __matmul__(self, other):
        if isinstance(other, DualTensor):
            return DualTensor(self.primal @ other.primal,
                              self.primal @ other.tangent + self.tangent @ other.primal)
        return DualTensor(self.primal @ other, self.tangent @ other)

    def __rmatmul__(self, other):
        return DualTensor(other @ self.primal, other @ self.tangent)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


# --------------------------------------------------------------------------
# reverse sweep


def backward(output, wrt=None):
    """Gradient of a scalar graph node.

    Returns a dict mapping each trainable leaf (or each tensor in ``wrt``)
    to its gradient array.  Leaves the output does not depend on get zeros.
    """
    if not isinstance(output, Tensor):
        raise ContractError("backward needs a graph tensor")
    if output.value.size != 1:
        raise ContractError(f"backward needs a scalar output, got shape {output.shape}")
    graph = output.graph
    nodes = graph.nodes
    if output.index >= len(nodes) or nodes[output.index] is not output:
        raise ContractError("the graph of this tensor was released")
    grads = [None] * (output.index + 1)
    grads[output.index] = np.ones_like(output.value)
    for i in range(output.index, -1, -1):
        G = grads[i]
        if G is None:
            continue
        node = nodes[i]
        if node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(G)):
            if pg is None or not parent.requires_grad:
                continue
            j = parent.index
            grads[j] = pg if grads[j] is None else grads[j] + pg
        if node.kind == "op":
            grads[i] = None
    targets = graph.params if wrt is None else wrt
    result = {}
    for leaf in targets:
        g = grads[leaf.index] if leaf.index <= output.index else None
        result[leaf] = np.zeros_like(leaf.value) if g is None else np.array(g, dtype=np.float64).reshape(leaf.shape)
    return result


def spatial_derivatives(fn, graph, points, second=()):
    """Value, input gradient and selected pure second derivatives of ``fn``.

    ``fn`` maps a graph tensor (or dual) of shape (n, D) to outputs of shape
    (n, m).  One forward pass is made per input coordinate; coordinates in
    ``second`` use a nested dual to also obtain the pure second derivative.
    Returns ``(value, [d/dz_j for j < D], {j: d2/dz_j2})``, all recorded on
    ``graph``.
    """
    points = np.asarray(points, dtype=np.float64)
    n, D = points.shape
    X = graph.input(points)
    zero = np.zeros_like(points)
    value, grads, hess = None, [None] * D, {}
    for j in range(D):
        e = zero.copy()
        e[:, j] = 1.0
        if j in second:
            out = fn(DualTensor(DualTensor(X, e), DualTensor(e, zero)))
            value = out.primal.primal
            grads[j] = out.primal.tangent
            hess[j] = out.tangent.tangent
        else:
            out = fn(DualTensor(X, e))
            if value is None:
                value = out.primal
            grads[j] = out.tangent
    if D == 0:
        value = fn(X)
    def lift(v):
        # derivatives that do not depend on the graph come back as plain arrays
        return v if isinstance(v, Tensor) else graph.constant(np.asarray(v, dtype=np.float64))

    return lift(value), [lift(v) for v in grads], {j: lift(v) for j, v in hess.items()}
