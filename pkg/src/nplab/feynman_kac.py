"""Feynman-Kac regression for linear parabolic PDEs.

For ``du/dt = 1/2 sigma sigma^T : D^2 u + mu . grad u - r u + f`` with
``u(0, x) = g(x)``, the solution at time T is the conditional expectation
of a path functional of the diffusion ``dX = mu dt + sigma dW`` started at
``x``.  A network is fitted to that expectation by least squares on freshly
simulated ``(x, y)`` pairs.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import nn
from . import streams
from .exceptions import ConfigurationError, SimulationBlowUp
from .optimize import HEAT_PIECEWISE_SCHEDULE
from .results import RunResult
from .training import TrainConfig, run_adam


@dataclass
class KolmogorovProblem:
    """Coefficients, data and sampling mode of a linear parabolic problem.

    ``drift``, ``potential`` and ``source`` are callables of ``(t, X)`` or
    ``None`` (identically zero).  ``sigma`` is a constant (d, d) matrix or a
    callable returning (n, d, d).  ``terminal`` maps (n, d) states to (n,)
    values.  ``mode`` is ``exact`` (requires zero drift and constant sigma)
    or ``em`` (Euler-Maruyama with ``n_steps`` uniform steps).
    """

    key: str
    d: int
    T: float
    sigma: object
    terminal: object
    drift: object = None
    potential: object = None
    source: object = None
    mode: str = "exact"
    n_steps: int = 20
    low: object = -1.0
    high: object = 1.0
    exact: object = None

    def __post_init__(self):
        self.low = np.broadcast_to(np.asarray(self.low, dtype=float), (self.d,)).copy()
        self.high = np.broadcast_to(np.asarray(self.high, dtype=float), (self.d,)).copy()
        if not self.T > 0:
            raise ConfigurationError("horizon T must be positive")
        if np.any(self.high <= self.low):
            raise ConfigurationError("domain box is degenerate")
        if self.mode not in ("exact", "em"):
            raise ConfigurationError(f"unknown sampling mode {self.mode!r}")
        if self.mode == "exact" and (self.drift is not None or callable(self.sigma)
                                     or self.potential is not None or self.source is not None):
            raise ConfigurationError("exact sampling needs zero drift, constant sigma and no potential or source")
        if self.mode == "em" and self.n_steps < 1:
            raise ConfigurationError("Euler-Maruyama needs at least one step")
        if not callable(self.sigma):
            self.sigma = np.asarray(self.sigma, dtype=float)
            if self.sigma.shape != (self.d, self.d):
                raise ConfigurationError("sigma must be a d x d matrix")


@dataclass
class PathBatch:
    """Simulated start points, terminal states, targets and final discounts."""

    starts: np.ndarray
    terminals: np.ndarray
    targets: np.ndarray
    discount: np.ndarray
    discount_history: np.ndarray = None

    def __len__(self):
        return len(self.targets)


# --------------------------------------------------------------------------
# registered problems


def _sq_norm(x):
    return np.einsum("ij,ij->i", x, x)


def heat(d=100, T=1.0):
    """``du/dt = Laplace u``, ``u(0, x) = |x|^2``; solution ``|x|^2 + 2 t d``."""
    return KolmogorovProblem(
        key="heat", d=d, T=T, sigma=np.sqrt(2.0) * np.eye(d), terminal=_sq_norm,
        exact=lambda x: _sq_norm(x) + 2.0 * T * d)


def heat_potential(d=10, T=1.0, r=0.5, f=1.0, n_steps=20):
    """Heat equation with constant potential ``r`` and source ``f``.

    ``exact`` is the solution of the continuous problem,
    ``f (1 - e^{-rT}) / r + e^{-rT} (|x|^2 + 2 T d)``; the left-point
    discretization of the source integral differs from it by O(T/N).
    """
    decay = np.exp(-r * T)
    return KolmogorovProblem(
        key="heat-potential", d=d, T=T, sigma=np.sqrt(2.0) * np.eye(d), terminal=_sq_norm,
        potential=lambda t, x: np.full(x.shape[0], r), source=lambda t, x: np.full(x.shape[0], f),
        mode="em", n_steps=n_steps,
        exact=lambda x: f * (1.0 - decay) / r + decay * (_sq_norm(x) + 2.0 * T * d))


PROBLEMS = {"heat": heat, "heat-potential": heat_potential}


def default_spec(problem, width=200):
    """Batch-normalized two-hidden-layer tanh network."""
    return nn.MlpSpec.batch_normed(problem.d, [width, width], "tanh", 1)


def default_config(problem):
    return TrainConfig(epochs=750000, schedule=HEAT_PIECEWISE_SCHEDULE, batch_size=256)


# --------------------------------------------------------------------------
# sampling


def _uniform_starts(problem, rng, m):
    return problem.low + (problem.high - problem.low) * rng.random((m, problem.d))


def _block_starts(problem, rng, lo, hi, start):
    if start is None:
        return _uniform_starts(problem, rng, hi - lo)
    return np.broadcast_to(np.asarray(start, dtype=float), (hi - lo, problem.d)).copy()


def _exact_block(problem, rng, lo, hi, start, xi):
    X = _block_starts(problem, rng, lo, hi, start)
    noise = rng.standard_normal(X.shape) if xi is None else xi[lo:hi]
    XT = X + np.sqrt(problem.T) * noise @ problem.sigma.T
    Y = problem.terminal(XT)
    return X, XT, Y, np.ones(hi - lo), None


def _sigma_dw(problem, t, X, dW):
    if callable(problem.sigma):
        return np.einsum("nij,nj->ni", problem.sigma(t, X), dW)
    return dW @ problem.sigma.T


def _em_block(problem, rng, lo, hi, start, history):
    X0 = _block_starts(problem, rng, lo, hi, start)
    m = hi - lo
    N = problem.n_steps
    dt = problem.T / N
    X = X0.copy()
    R = np.ones(m)
    Y = np.zeros(m)
    hist = np.ones((m, N + 1)) if history else None
    for k in range(N):
        t = k * dt
        if problem.source is not None:
            Y += R * problem.source(t, X) * dt
        if problem.potential is not None:
            R = R * np.exp(-problem.potential(t, X) * dt)
        dW = np.sqrt(dt) * rng.standard_normal((m, problem.d))
        step = _sigma_dw(problem, t, X, dW)
        if problem.drift is not None:
            step = step + problem.drift(t, X) * dt
        X = X + step
        if not np.all(np.isfinite(X)):
            raise SimulationBlowUp(k + 1)
        if history:
            hist[:, k + 1] = R
    Y += R * problem.terminal(X)
    return X0, X, Y, R, hist


def _collect(parts):
    starts, terms, ys, rs, hs = zip(*parts)
    hist = None if hs[0] is None else np.vstack(hs)
    return PathBatch(np.vstack(starts), np.vstack(terms), np.concatenate(ys), np.concatenate(rs), hist)


def sample_exact(problem, n, seed, key=(), start=None, xi=None):
    """Exact Gaussian terminals ``X + sqrt(T) sigma xi`` for zero-drift constant-sigma problems.

    ``start`` fixes all paths at one point instead of uniform starts;
    ``xi`` supplies the (n, d) standard normals explicitly.
    """
    if problem.mode != "exact":
        raise ConfigurationError("exact sampling requested for a problem in Euler-Maruyama mode")
    if n < 1:
        raise ConfigurationError("need at least one path")
    parts = streams.map_blocks(seed, ("fk",) + tuple(key), n,
                               lambda rng, lo, hi: _exact_block(problem, rng, lo, hi, start, xi))
    return _collect(parts)


def sample_em(problem, n, seed, key=(), start=None, history=False):
    """Euler-Maruyama paths with the discounted source/terminal target.

    ``Y = sum_n R_n f(t_n, X_n) dt + R_N g(X_N)`` with
    ``R_{n+1} = R_n exp(-r(t_n, X_n) dt)`` and ``R_0 = 1``.
    """
    if problem.mode != "em":
        raise ConfigurationError("Euler-Maruyama sampling requested for a problem in exact mode")
    if n < 1:
        raise ConfigurationError("need at least one path")
    parts = streams.map_blocks(seed, ("fk",) + tuple(key), n,
                               lambda rng, lo, hi: _em_block(problem, rng, lo, hi, start, history))
    return _collect(parts)


def sample(problem, n, seed, key=(), start=None):
    if problem.mode == "exact":
        return sample_exact(problem, n, seed, key, start)
    return sample_em(problem, n, seed, key, start)


def mc_reference(problem, x, n_samples, seed):
    """Monte Carlo estimate of ``u(T, x)`` and its CLT standard error."""
    if n_samples < 2:
        raise ConfigurationError("need at least two samples")
    x = np.asarray(x, dtype=float).reshape(problem.d)
    block = streams.BLOCK

    def targets(rng, lo, hi):
        if problem.mode == "exact":
            return _exact_block(problem, rng, lo, hi, x, None)[2]
        return _em_block(problem, rng, lo, hi, x, False)[2]

    first = targets(streams.generator(seed, "fk-ref", 0), 0, min(block, n_samples))
    shift = first[0]

    def moments(rng, lo, hi):
        y = (first if lo == 0 else targets(rng, lo, hi)) - shift
        return y.sum(), (y * y).sum()

    sums = streams.map_blocks(seed, ("fk-ref",), n_samples, moments, block)
    s1 = sum(s for s, _ in sums)
    s2 = sum(q for _, q in sums)
    mean = s1 / n_samples
    var = max(s2 - s1 * mean, 0.0) / (n_samples - 1)
    return shift + mean, float(np.sqrt(var / n_samples))


# --------------------------------------------------------------------------
# regression


def evaluation_points(problem, n_eval, seed):
    rng = streams.generator(seed, "fk-eval")
    return _uniform_starts(problem, rng, n_eval)


def domain_error(problem, net, n_eval=10000, seed=0):
    """Absolute L1, relative L1 and absolute max error over uniform points of the domain.

    ``net`` is :class:`~nplab.nn.MlpParams` (evaluated in infer mode) or any
    callable mapping (n, d) points to n values.
    """
    if problem.exact is None:
        raise ConfigurationError("error metrics need an exact solution")
    X = evaluation_points(problem, n_eval, seed)
    pred = nn.predict(net, X)[:, 0] if isinstance(net, nn.MlpParams) else np.asarray(net(X)).reshape(-1)
    exact = problem.exact(X)
    err = np.abs(pred - exact)
    abs_l1 = err.mean()
    return abs_l1, abs_l1 / np.abs(exact).mean(), err.max()


def train_regression(problem, spec, config, n_eval=10000):
    """Fresh-batch least-squares fit of ``u(T, .)`` on the domain of interest."""
    if spec.input_dim != problem.d or spec.output_dim != 1:
        raise ConfigurationError("network must map d inputs to one output")
    params = nn.init(spec, config.seed)
    pset = params.pset

    def step(epoch):
        batch = sample(problem, config.batch_size, config.seed, key=("train", epoch))
        graph = ad.Graph()
        leaves = pset.register(graph)
        u = nn.forward(params, batch.starts, "train" if spec.use_batch_norm else "infer", leaves)
        e = u - batch.targets.reshape(-1, 1)
        loss = (e * e).mean()
        flat = pset.flat_grad(leaves, ad.backward(loss))
        graph.release()
        return float(loss.value), {}, flat, {}

    def evaluate(epoch):
        if problem.exact is None:
            return {}
        a, r, m = domain_error(problem, params, n_eval, config.seed)
        return {"abs_l1": a, "rel_l1": r, "abs_linf": m}

    result = RunResult("feynman-kac", problem.key, config.seed)
    try:
        run_adam(params.theta, step, config, result, evaluate=evaluate, after_step=params.commit_stats)
    finally:
        result.snapshot = nn.snapshot_entries(pset, params.buffers())
        result.params = params
    return result
