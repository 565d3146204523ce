"""Multilayer perceptrons with optional batch normalization.

Two layouts are supported:

* plain stacks ``[scale] -> (Dense+bias -> act) x L -> Dense+bias``;
* batch-normalized stacks
  ``BN -> (Dense -> BN -> act) x L -> Dense -> BN`` with bias-free dense layers.

Trainable parameters of one or several networks live in a single flat
vector (:class:`ParamSet`) so the optimizer sees one ``theta``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .exceptions import ConfigurationError, ContractError, DegenerateBatchError

ACTIVATIONS = ("tanh", "relu", "leaky_relu")
BN_EPS = 1e-6
BN_MOMENTUM = 0.99
SNAPSHOT_MAGIC = "NPLAB1"


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a fully connected network.

    ``hidden`` is a sequence of ``(width, activation)`` pairs.  When
    ``input_scaling`` is given as ``(low, high)`` the inputs are mapped
    affinely from that box onto ``[-1, 1]`` before the first dense layer.
    """

    input_dim: int
    hidden: tuple
    output_dim: int
    use_batch_norm: bool = False
    dense_bias: bool = True
    input_scaling: tuple = None
    leaky_slope: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple((int(w), str(a)) for w, a in self.hidden))
        if self.input_scaling is not None:
            low, high = (tuple(float(v) for v in np.atleast_1d(b)) for b in self.input_scaling)
            object.__setattr__(self, "input_scaling", (low, high))
        self.validate()

    def validate(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ConfigurationError("input and output dimensions must be positive")
        for width, act in self.hidden:
            if width < 1:
                raise ConfigurationError(f"hidden width must be positive, got {width}")
            if act not in ACTIVATIONS:
                raise ConfigurationError(f"unknown activation {act!r}")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ConfigurationError("leaky slope must lie in (0, 1)")
        if self.use_batch_norm and self.dense_bias:
            raise ConfigurationError("dense layers followed by batch norm carry no bias")
        if self.input_scaling is not None:
            low, high = self.input_scaling
            if len(low) != self.input_dim or len(high) != self.input_dim:
                raise ConfigurationError("input scaling box does not match input_dim")
            if any(h <= lo for lo, h in zip(low, high)):
                raise ConfigurationError("input scaling box is degenerate")

    @classmethod
    def plain(cls, input_dim, widths, activation, output_dim, input_scaling=None, leaky_slope=0.1):
        return cls(input_dim, tuple((w, activation) for w in widths), output_dim,
                   input_scaling=input_scaling, leaky_slope=leaky_slope)

    @classmethod
    def batch_normed(cls, input_dim, widths, activation, output_dim):
        return cls(input_dim, tuple((w, activation) for w in widths), output_dim,
                   use_batch_norm=True, dense_bias=False)

    @property
    def sizes(self):
        return [self.input_dim] + [w for w, _ in self.hidden] + [self.output_dim]

    @property
    def n_dense(self):
        return len(self.hidden) + 1


def layout(spec, prefix=""):
    """Ordered ``(name, shape)`` list of trainable arrays."""
    entries = []
    sizes = spec.sizes
    if spec.use_batch_norm:
        entries += [(f"{prefix}bn0.gamma", (sizes[0],)), (f"{prefix}bn0.beta", (sizes[0],))]
    for layer in range(spec.n_dense):
        entries.append((f"{prefix}W{layer}", (sizes[layer], sizes[layer + 1])))
        if spec.dense_bias:
            entries.append((f"{prefix}b{layer}", (sizes[layer + 1],)))
        if spec.use_batch_norm:
            k = layer + 1
            entries += [(f"{prefix}bn{k}.gamma", (sizes[layer + 1],)),
                        (f"{prefix}bn{k}.beta", (sizes[layer + 1],))]
    return entries


def param_count(spec):
    """Number of trainable scalars (batch-norm scale and shift included)."""
    return int(sum(np.prod(shape) for _, shape in layout(spec)))


class ParamSet:
    """Named views into one flat float64 parameter vector."""

    def __init__(self, entries):
        self.entries = []
        offset = 0
        for name, shape in entries:
            size = int(np.prod(shape))
            self.entries.append((name, tuple(shape), offset, size))
            offset += size
        self.theta = np.zeros(offset)
        self._index = {name: i for i, (name, *_rest) in enumerate(self.entries)}

    def __len__(self):
        return self.theta.size

    def __contains__(self, name):
        return name in self._index

    def __getitem__(self, name):
        _, shape, offset, size = self.entries[self._index[name]]
        return self.theta[offset:offset + size].reshape(shape)

    def names(self):
        return [e[0] for e in self.entries]

    def register(self, graph):
        """Create one trainable leaf per named array on ``graph``."""
        return {name: graph.param(self[name], name=name) for name, *_ in self.entries}

    def flat_grad(self, leaves, grads):
        out = np.zeros_like(self.theta)
        for name, _, offset, size in self.entries:
            out[offset:offset + size] = grads[leaves[name]].ravel()
        return out


class MlpParams:
    """Parameters of one network: views into a :class:`ParamSet` plus BN buffers."""

    def __init__(self, spec, pset=None, prefix=""):
        self.spec = spec
        self.prefix = prefix
        self.pset = ParamSet(layout(spec, prefix)) if pset is None else pset
        self.running = {}
        if spec.use_batch_norm:
            for k, width in enumerate(spec.sizes):
                self.running[k] = (np.zeros(width), np.ones(width))
        self.pending = []

    def __getitem__(self, name):
        return self.pset[self.prefix + name]

    @property
    def theta(self):
        return self.pset.theta

    def leaf(self, leaves, name):
        return leaves[self.prefix + name]

    def commit_stats(self, momentum=BN_MOMENTUM):
        """Fold the batch statistics of the last train-mode forward into the running averages."""
        for k, mu, var in self.pending:
            rm, rv = self.running[k]
            rm *= momentum
            rm += (1.0 - momentum) * mu
            rv *= momentum
            rv += (1.0 - momentum) * var
        self.pending = []

    def buffers(self):
        out = []
        for k, (rm, rv) in sorted(self.running.items()):
            out.append((f"{self.prefix}bn{k}.mean", rm))
            out.append((f"{self.prefix}bn{k}.var", rv))
        return out

    def copy(self):
        clone = MlpParams(self.spec)
        for name, _ in layout(self.spec):
            clone[name][...] = self[name]
        clone.running = {k: (m.copy(), v.copy()) for k, (m, v) in self.running.items()}
        return clone


def init(spec, seed, pset=None, prefix=""):
    """Glorot-uniform weights, zero biases, unit BN scale, zero BN shift."""
    params = MlpParams(spec, pset, prefix)
    rng = np.random.default_rng(seed)
    sizes = spec.sizes
    for layer in range(spec.n_dense):
        fan_in, fan_out = sizes[layer], sizes[layer + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params[f"W{layer}"][...] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        if spec.dense_bias:
            params[f"b{layer}"][...] = 0.0
    if spec.use_batch_norm:
        for k in range(len(sizes)):
            params[f"bn{k}.gamma"][...] = 1.0
            params[f"bn{k}.beta"][...] = 0.0
    return params


def _scale_inputs(spec, X):
    if spec.input_scaling is None:
        return X
    low, high = (np.asarray(b) for b in spec.input_scaling)
    scale = 2.0 / (high - low)
    return X * scale + (-1.0 - low * scale)


def _norm(params, leaves, h, k, mode):
    gamma = params.leaf(leaves, f"bn{k}.gamma")
    beta = params.leaf(leaves, f"bn{k}.beta")
    if mode == "train":
        n = ad.value_of(h).shape[0]
        if n < 2:
            raise DegenerateBatchError("train-mode batch normalization needs at least two samples")
        out, mu, var = ad.batch_norm_train(h, gamma, beta, BN_EPS)
        params.pending.append((k, np.array(mu), np.array(var)))
        return out
    rm, rv = params.running[k]
    return (h - rm) * (1.0 / np.sqrt(rv + BN_EPS)) * gamma + beta


def forward(params, batch, mode="infer", leaves=None, graph=None):
    """Evaluate the network on an (n, input_dim) batch.

    ``batch`` may be an array, a graph tensor or a dual.  Without ``leaves``
    a fresh graph is created and the parameters are registered on it.  In
    train mode batch statistics are used and stashed in ``params.pending``;
    :meth:`MlpParams.commit_stats` folds them into the running averages.
    """
    if mode not in ("train", "infer"):
        raise ContractError(f"mode must be 'train' or 'infer', got {mode!r}")
    spec = params.spec
    if leaves is None:
        graph = ad.Graph() if graph is None else graph
        leaves = params.pset.register(graph)
    n = ad.value_of(batch).shape[0]
    if n < 1:
        raise ContractError("empty batch")
    if mode == "train":
        params.pending = []
    h = batch
    if not isinstance(h, (ad.Tensor, ad.DualTensor)):
        h = next(iter(leaves.values())).graph.constant(np.asarray(h, dtype=np.float64))
    h = _scale_inputs(spec, h)
    if spec.use_batch_norm:
        h = _norm(params, leaves, h, 0, mode)
    for layer in range(spec.n_dense):
        h = h @ params.leaf(leaves, f"W{layer}")
        if spec.dense_bias:
            h = h + params.leaf(leaves, f"b{layer}")
        if spec.use_batch_norm:
            h = _norm(params, leaves, h, layer + 1, mode)
        if layer < len(spec.hidden):
            h = ad.activation(h, spec.hidden[layer][1], spec.leaky_slope)
    return h


def predict(params, X):
    """Infer-mode evaluation returning a plain array."""
    return forward(params, np.atleast_2d(np.asarray(X, dtype=np.float64)), "infer").value


def jet(params, leaves, points, second=()):
    """Outputs with all first input derivatives and selected pure second derivatives.

    Uses one stacked forward pass (value, D first-order streams and one
    stream per entry of ``second``).  Returns ``(u, [du/dz_j], {j: d2u/dz_j2})``
    with tensors of shape (n, output_dim) recorded on the leaves' graph.
    Only networks without batch normalization are supported.
    """
    spec = params.spec
    if spec.use_batch_norm:
        raise ContractError("jet evaluation is not defined for batch-normalized networks")
    points = np.asarray(points, dtype=np.float64)
    n, D = points.shape
    second = tuple(second)
    S = 1 + D + len(second)
    Z = np.zeros((S, n, D))
    Z[0] = points
    for j in range(D):
        Z[1 + j, :, j] = 1.0
    if spec.input_scaling is not None:
        low, high = (np.asarray(b) for b in spec.input_scaling)
        scale = 2.0 / (high - low)
        Z *= scale
        Z[0] += -1.0 - low * scale
    graph = next(iter(leaves.values())).graph
    J = graph.constant(Z)
    for layer in range(spec.n_dense):
        J = J @ params.leaf(leaves, f"W{layer}")
        bias = params.leaf(leaves, f"b{layer}") if spec.dense_bias else None
        if layer < len(spec.hidden):
            J = ad.jet_activation(J, spec.hidden[layer][1], D, second, spec.leaky_slope, bias)
        elif bias is not None:
            J = ad.jet_bias(J, bias)
    u = J[0]
    grads = [J[1 + j] for j in range(D)]
    hess = {j: J[1 + D + q] for q, j in enumerate(second)}
    return u, grads, hess


def write_snapshot(path, entries):
    """Write named arrays as a text header followed by little-endian float64 data.

    ``entries`` is a sequence of ``(kind, name, array)`` with kind ``param``
    or ``buffer``.
    """
    lines = [SNAPSHOT_MAGIC, f"entries {len(entries)}"]
    chunks = []
    total = 0
    for kind, name, arr in entries:
        arr = np.asarray(arr, dtype=np.float64)
        dims = " ".join(str(d) for d in arr.shape) or "scalar"
        lines.append(f"{kind} {name} {dims}")
        chunks.append(arr.ravel())
        total += arr.size
    lines.append(f"data {total}")
    header = ("\n".join(lines) + "\n").encode("ascii")
    flat = np.concatenate(chunks) if chunks else np.zeros(0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(flat.astype("<f8").tobytes())


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`; returns a list of ``(kind, name, array)``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    lines = []
    pos = 0
    while True:
        end = blob.index(b"\n", pos)
        line = blob[pos:end].decode("ascii")
        pos = end + 1
        lines.append(line)
        if line.startswith("data "):
            break
    if lines[0] != SNAPSHOT_MAGIC:
        raise ContractError(f"not an {SNAPSHOT_MAGIC} snapshot: {lines[0]!r}")
    total = int(lines[-1].split()[1])
    flat = np.frombuffer(blob[pos:pos + 8 * total], dtype="<f8").astype(np.float64)
    out = []
    offset = 0
    for line in lines[2:-1]:
        kind, name, *dims = line.split()
        shape = () if dims == ["scalar"] else tuple(int(d) for d in dims)
        size = int(np.prod(shape))
        out.append((kind, name, flat[offset:offset + size].reshape(shape)))
        offset += size
    return out


def snapshot_entries(pset, buffers=()):
    entries = [("param", name, pset[name]) for name in pset.names()]
    entries += [("buffer", name, arr) for name, arr in buffers]
    return entries


def load_into(pset, entries, buffers=None):
    """Copy snapshot arrays back into a parameter set (and optional buffer dict)."""
    for kind, name, arr in entries:
        if kind == "param":
            pset[name][...] = arr
        elif buffers is not None and name in buffers:
            buffers[name][...] = arr
