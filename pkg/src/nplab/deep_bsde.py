"""Deep BSDE solver for semilinear parabolic final-value problems.

For ``u_t + 1/2 sigma sigma^T : D^2 u + mu . grad u + f(t, x, u, sigma^T grad u) = 0``
with ``u(T, x) = g(x)``, the value ``u(0, x0)`` is learned together with
networks for ``Z_n = sigma^T grad u(t_n, X_n)`` by driving the discretized
backward process

    Y_{n+1} = Y_n - f(t_n, X_n, Y_n, Z_n) dt + Z_n . dW_n

to the terminal value ``g(X_N)`` along Euler-Maruyama paths.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import nn
from . import streams
from .exceptions import ConfigurationError, RolloutDiverged, SimulationBlowUp
from .optimize import LrSchedule
from .results import RunResult
from .training import TrainConfig, run_adam


@dataclass
class FbsdeProblem:
    """Coefficients of the forward-backward system.

    ``generator(t, X, Y, Z)`` receives the state array (n, d) and graph
    tensors ``Y`` (n, 1) and ``Z`` (n, d) and returns an (n, 1) tensor.
    ``terminal`` maps (n, d) arrays to (n,) arrays.  ``drift`` is
    ``None`` (zero) or a callable; ``sigma`` a constant (d, d) matrix or a
    callable returning (n, d, d).
    """

    key: str
    d: int
    x0: np.ndarray
    T: float
    N: int
    sigma: object
    generator: object
    terminal: object
    drift: object = None
    y0_range: tuple = (0.0, 1.0)

    def __post_init__(self):
        self.x0 = np.broadcast_to(np.asarray(self.x0, dtype=float), (self.d,)).copy()
        if self.N < 1:
            raise ConfigurationError("need at least one time step")
        if not self.T > 0:
            raise ConfigurationError("horizon T must be positive")
        if not callable(self.sigma):
            self.sigma = np.asarray(self.sigma, dtype=float)
            if self.sigma.shape != (self.d, self.d):
                raise ConfigurationError("sigma must be a d x d matrix")

    @property
    def dt(self):
        return self.T / self.N

    def with_steps(self, N):
        return FbsdeProblem(self.key, self.d, self.x0, self.T, N, self.sigma, self.generator,
                            self.terminal, self.drift, self.y0_range)


# --------------------------------------------------------------------------
# registered problems


def lqg_terminal(x):
    return np.log(0.5 * (1.0 + np.einsum("ij,ij->i", x, x)))


def _lqg_generator(t, X, Y, Z):
    return -0.5 * (Z * Z).sum(axis=1, keepdims=True)


def lqg_hjb(d=100, T=1.0, N=20):
    """``u_t + Laplace u - |grad u|^2 = 0``, ``g(x) = log((1 + |x|^2) / 2)``, started at 0."""
    return FbsdeProblem("lqg-hjb", d, np.zeros(d), T, N, np.sqrt(2.0) * np.eye(d),
                        _lqg_generator, lqg_terminal)


def allen_cahn_terminal(x):
    return 1.0 / (2.0 + 0.4 * np.einsum("ij,ij->i", x, x))


def _allen_cahn_generator(t, X, Y, Z):
    return Y - Y * Y * Y


def allen_cahn(d=100, T=1.0, N=20):
    """``u_t + Laplace u + u - u^3 = 0``, ``g(x) = 1 / (2 + 0.4 |x|^2)``, started at 0."""
    return FbsdeProblem("allen-cahn", d, np.zeros(d), T, N, np.sqrt(2.0) * np.eye(d),
                        _allen_cahn_generator, allen_cahn_terminal)


PROBLEMS = {"lqg-hjb": lqg_hjb, "allen-cahn": allen_cahn}

# name -> (time steps, hidden stacks, width)
PRESETS = {
    "simple": (1, 0, 0),
    "reference": (20, 2, 110),
    "l3": (30, 3, 200),
    "l5": (50, 5, 300),
}

PROBLEM_TRAINING = {
    "lqg-hjb": dict(epochs=2000, rate=0.01),
    "allen-cahn": dict(epochs=4000, rate=5e-4),
}


def default_config(problem, seed=0):
    setup = PROBLEM_TRAINING.get(problem.key, dict(epochs=2000, rate=0.01))
    return TrainConfig(epochs=setup["epochs"], schedule=LrSchedule.constant(setup["rate"]),
                       batch_size=64, seed=seed)


# --------------------------------------------------------------------------
# parameters


class BsdeParams:
    """``y0``, ``z0`` and ``N - 1`` batch-normalized subnetworks in one flat vector."""

    def __init__(self, problem, hidden_layers, width, seed=0):
        d = problem.d
        self.problem = problem
        self.subnet_spec = nn.MlpSpec.batch_normed(d, [width] * hidden_layers, "relu", d)
        entries = [("y0", (1,)), ("z0", (d,))]
        for n in range(1, problem.N):
            entries += nn.layout(self.subnet_spec, f"net{n}.")
        self.pset = nn.ParamSet(entries)
        rng = streams.generator(seed, "bsde-init")
        lo, hi = problem.y0_range
        self.pset["y0"][...] = rng.uniform(lo, hi)
        self.pset["z0"][...] = 0.0
        self.subnets = [nn.init(self.subnet_spec, [seed, n], self.pset, f"net{n}.")
                        for n in range(1, problem.N)]
        # With unit output scale Z . dW starts with standard deviation sqrt(d dt) per
        # step, which blows up cubic generators on the first rollout; start at 1/d.
        out = f"bn{hidden_layers + 1}.gamma"
        for n in range(1, problem.N):
            self.pset[f"net{n}.{out}"][...] = 1.0 / d

    @property
    def theta(self):
        return self.pset.theta

    @property
    def y0(self):
        return float(self.pset["y0"][0])

    def commit_stats(self):
        for net in self.subnets:
            net.commit_stats()

    def buffers(self):
        return [b for net in self.subnets for b in net.buffers()]


# --------------------------------------------------------------------------
# simulation and rollout


def simulate_forward(problem, n, seed, key=()):
    """Brownian increments (n, N, d) and Euler-Maruyama states (n, N+1, d) from ``x0``."""
    if n < 1:
        raise ConfigurationError("need at least one path")
    N, d, dt = problem.N, problem.d, problem.dt

    def block(rng, lo, hi):
        m = hi - lo
        dW = np.sqrt(dt) * rng.standard_normal((m, N, d))
        X = np.empty((m, N + 1, d))
        X[:, 0] = problem.x0
        for k in range(N):
            Xk = X[:, k]
            if callable(problem.sigma):
                step = np.einsum("nij,nj->ni", problem.sigma(k * dt, Xk), dW[:, k])
            else:
                step = dW[:, k] @ problem.sigma.T
            if problem.drift is not None:
                step = step + problem.drift(k * dt, Xk) * dt
            X[:, k + 1] = Xk + step
            if not np.all(np.isfinite(X[:, k + 1])):
                raise SimulationBlowUp(k + 1)
        return dW, X

    parts = streams.map_blocks(seed, ("bsde",) + tuple(key), n, block)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def rollout_backward(problem, params, dW, X, mode="train", leaves=None):
    """Backward value and control processes along given paths.

    Returns ``(Y, Z)``: lists of graph tensors with ``N + 1`` entries of
    shape (n, 1) and ``N`` entries of shape (n, d).
    """
    n, N, d = dW.shape
    if N != problem.N or d != problem.d or X.shape != (n, N + 1, d):
        raise ConfigurationError("path arrays do not match the problem")
    if leaves is None:
        leaves = params.pset.register(ad.Graph())
    graph = leaves["y0"].graph
    ones = np.ones((n, 1))
    Y = [ones * leaves["y0"]]
    Z = [ones * leaves["z0"]]
    dt = problem.dt
    for k in range(N):
        if k > 0:
            Z.append(nn.forward(params.subnets[k - 1], X[:, k], mode, leaves, graph))
        f = problem.generator(k * dt, X[:, k], Y[k], Z[k])
        Y.append(Y[k] - f * dt + (Z[k] * dW[:, k]).sum(axis=1, keepdims=True))
        if not np.all(np.isfinite(Y[-1].value)):
            raise RolloutDiverged(k + 1)
    return Y, Z


def bsde_loss(y_terminal, g_terminal):
    """Mean squared terminal mismatch."""
    if isinstance(y_terminal, ad.Tensor):
        e = y_terminal - np.asarray(g_terminal, dtype=float).reshape(y_terminal.shape)
        return (e * e).mean()
    y = np.asarray(y_terminal, dtype=float).reshape(-1)
    g = np.asarray(g_terminal, dtype=float).reshape(-1)
    if y.shape != g.shape or y.size < 1:
        raise ConfigurationError("terminal batches must have equal nonzero length")
    return float(np.mean((y - g) ** 2))


def train(problem, preset="reference", config=None, hidden_layers=None, width=None):
    """Train ``y0``, ``z0`` and the subnetworks; ``y0`` is logged per epoch.

    ``preset`` names a (time steps, stacks, width) triple from
    :data:`PRESETS`; explicit ``hidden_layers``/``width`` override it.
    """
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigurationError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        steps, stacks, size = PRESETS[preset]
        problem = problem.with_steps(steps)
        hidden_layers = stacks if hidden_layers is None else hidden_layers
        width = size if width is None else width
    hidden_layers = hidden_layers or 0
    width = width or problem.d
    config = config or default_config(problem)
    params = BsdeParams(problem, hidden_layers, width, config.seed)
    pset = params.pset

    def step(epoch):
        dW, X = simulate_forward(problem, config.batch_size, config.seed, key=("train", epoch))
        graph = ad.Graph()
        leaves = pset.register(graph)
        Y, _ = rollout_backward(problem, params, dW, X, "train", leaves)
        loss = bsde_loss(Y[-1], problem.terminal(X[:, -1]))
        flat = pset.flat_grad(leaves, ad.backward(loss))
        graph.release()
        return float(loss.value), {}, flat, {"y0": params.y0}

    result = RunResult("deep-bsde", problem.key, config.seed)
    result.summary.update(preset=preset, time_steps=problem.N, hidden_layers=hidden_layers, width=width)
    try:
        run_adam(pset.theta, step, config, result, after_step=params.commit_stats)
    finally:
        result.summary["y0"] = params.y0
        result.snapshot = nn.snapshot_entries(pset, params.buffers())
        result.params = params
    return result


# --------------------------------------------------------------------------
# Cole-Hopf reference


def lqg_reference(d=100, T=1.0, x=None, n_samples=10**6, seed=0, terminal=lqg_terminal):
    """``-log E[exp(-g(x + sqrt(2) W_T))]`` by Monte Carlo, with delta-method standard error."""
    x = np.zeros(d) if x is None else np.broadcast_to(np.asarray(x, dtype=float), (d,))
    if T == 0:
        return float(terminal(x.reshape(1, d))[0]), 0.0
    if n_samples < 2:
        raise ConfigurationError("need at least two samples")

    def values(rng, lo, hi):
        W = rng.standard_normal((hi - lo, d))
        return -terminal(x + np.sqrt(2.0 * T) * W)

    first = values(streams.generator(seed, "cole-hopf", 0), 0, min(streams.BLOCK, n_samples))
    shift = first[0]

    def moments(rng, lo, hi):
        a = (first if lo == 0 else values(rng, lo, hi)) - shift
        e = np.exp(a)
        return e.sum(), (e * e).sum()

    sums = streams.map_blocks(seed, ("cole-hopf",), n_samples, moments)
    s1 = sum(s for s, _ in sums)
    s2 = sum(q for _, q in sums)
    mean = s1 / n_samples
    var = max(s2 / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    value = -(shift + np.log(mean))
    return float(value), float(np.sqrt(var / n_samples) / mean)
