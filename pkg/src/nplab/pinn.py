"""Physics-informed neural networks.

A network ``u(t, x)`` is trained to make the strong residual
``+-du/dt + N[u]`` vanish at collocation points while matching initial (or
final) and boundary data.  Also contains the discrete-time Runge-Kutta
variant and parameter identification from observations.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import nn
from . import streams
from .exceptions import ConfigurationError, ContractError
from .optimize import EIKONAL_SCHEDULE, BURGERS_SCHEDULE
from .results import RunResult
from .training import TrainConfig, run_adam

LAMBDA = "lambda"


class _SecondDerivatives(dict):
    def __missing__(self, key):
        raise ContractError(f"second derivative along spatial coordinate {key} was not enabled")


@dataclass
class Fields:
    """Quantities an operator may use at a batch of points.

    ``t`` and ``x`` are plain arrays of shapes (n, 1) and (n, d); the
    remaining entries are graph tensors of shape (n, m).
    """

    t: np.ndarray
    x: np.ndarray
    u: object
    u_t: object
    u_x: list
    u_xx: dict
    lam: object = None


@dataclass
class PinnProblem:
    """``+-du/dt + N[u] = 0`` on a box with Dirichlet data.

    ``time_direction`` is ``forward`` (data at t=0, residual ``du/dt + N``)
    or ``backward`` (data at t=T, residual ``-du/dt + N``).  ``operator``
    maps :class:`Fields` to ``N[u]``; ``second`` lists the spatial
    coordinates whose pure second derivatives it uses.
    """

    key: str
    low: tuple
    high: tuple
    T: float
    time_direction: str
    operator: object
    data: object
    boundary: object
    second: tuple = ()
    exact: object = None
    lam_true: float = None
    lam_init: float = 1.0

    def __post_init__(self):
        self.low = tuple(float(v) for v in np.atleast_1d(self.low))
        self.high = tuple(float(v) for v in np.atleast_1d(self.high))
        if len(self.low) != len(self.high) or any(h <= l for l, h in zip(self.low, self.high)):
            raise ConfigurationError("domain box is degenerate")
        if not self.T > 0:
            raise ConfigurationError("horizon T must be positive")
        if self.time_direction not in ("forward", "backward"):
            raise ConfigurationError(f"unknown time direction {self.time_direction!r}")

    @property
    def spatial_dim(self):
        return len(self.low)

    @property
    def has_parameter(self):
        return self.lam_true is not None

    @property
    def data_time(self):
        return 0.0 if self.time_direction == "forward" else self.T

    @property
    def input_box(self):
        return (0.0,) + self.low, (self.T,) + self.high


# --------------------------------------------------------------------------
# registered problems

BURGERS_NU = 0.01 / np.pi


def _burgers_operator(f):
    return f.u * f.u_x[0] - BURGERS_NU * f.u_xx[0]


def _eikonal_operator(f):
    return ad.absolute(f.u_x[0]) - 1.0


def _eikonal_param_operator(f):
    return ad.absolute(f.u_x[0]) - 1.0 / f.lam


def eikonal_exact(t, x):
    return np.minimum(1.0 - t, 1.0 - np.abs(x))


def _zero_data(x):
    return np.zeros((x.shape[0], 1))


def _zero_boundary(t, x):
    return np.zeros((x.shape[0], 1))


def burgers():
    return PinnProblem(
        key="burgers", low=(-1.0,), high=(1.0,), T=1.0, time_direction="forward",
        operator=_burgers_operator,
        data=lambda x: -np.sin(np.pi * x[:, :1]),
        boundary=_zero_boundary, second=(0,))


def eikonal():
    return PinnProblem(
        key="eikonal", low=(-1.0,), high=(1.0,), T=1.0, time_direction="backward",
        operator=_eikonal_operator, data=_zero_data, boundary=_zero_boundary,
        exact=lambda t, x: eikonal_exact(t, x[:, :1]))


def eikonal_param(lam_true=3.0, lam_init=1.0):
    return PinnProblem(
        key="eikonal-param", low=(-1.0,), high=(1.0,), T=1.0, time_direction="backward",
        operator=_eikonal_param_operator, data=_zero_data, boundary=_zero_boundary,
        exact=lambda t, x: eikonal_exact(t, x[:, :1]) / lam_true,
        lam_true=lam_true, lam_init=lam_init)


PROBLEMS = {"burgers": burgers, "eikonal": eikonal, "eikonal-param": eikonal_param}


def default_spec(problem, activation=None):
    """Network used for a registered problem."""
    if problem.key == "burgers":
        return nn.MlpSpec.plain(2, [20] * 8, activation or "tanh", 1, input_scaling=problem.input_box)
    if problem.key == "eikonal":
        return nn.MlpSpec.plain(2, [20] * 2, activation or "leaky_relu", 1)
    if problem.key == "eikonal-param":
        return nn.MlpSpec.plain(2, [20], activation or "leaky_relu", 1)
    raise ConfigurationError(f"no default network for {problem.key!r}")


def default_config(problem):
    if problem.key == "burgers":
        return TrainConfig(epochs=5000, schedule=BURGERS_SCHEDULE)
    return TrainConfig(epochs=10000, schedule=EIKONAL_SCHEDULE)


DEFAULT_COUNTS = {
    "burgers": (10000, 50, 50, 0),
    "eikonal": (2000, 25, 50, 0),
    "eikonal-param": (2000, 25, 50, 500),
}


# --------------------------------------------------------------------------
# training data


@dataclass
class TrainingSets:
    """Collocation, data-slice, boundary and observation points as rows ``[t, x]``."""

    Xr: np.ndarray
    X0: np.ndarray
    u0: np.ndarray
    Xb: np.ndarray
    ub: np.ndarray
    Xd: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    ud: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))

    def fingerprint(self):
        import hashlib

        h = hashlib.sha256()
        for arr in (self.Xr, self.X0, self.u0, self.Xb, self.ub, self.Xd, self.ud):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def _interior_times(problem, rng, n):
    u = rng.random((n, 1))
    if problem.time_direction == "forward":
        return problem.T - problem.T * u  # (0, T]
    return problem.T * u  # [0, T)


def _box(problem, rng, n):
    low, high = np.array(problem.low), np.array(problem.high)
    return low + (high - low) * rng.random((n, problem.spatial_dim))


def sample_training_sets(problem, n_r, n_0, n_b, n_d=0, seed=0, noise=0.0):
    """Uniform i.i.d. training points; reproducible for a given seed."""
    if min(n_r, n_0, n_b, n_d) < 0:
        raise ConfigurationError("point counts must be non-negative")
    if n_d > 0 and problem.exact is None:
        raise ConfigurationError("observations need an exact solution to generate data")
    d = problem.spatial_dim
    rng = streams.generator(seed, "pinn-sets", problem.key)
    Xr = np.hstack([_interior_times(problem, rng, n_r), _box(problem, rng, n_r)])
    x0 = _box(problem, rng, n_0)
    X0 = np.hstack([np.full((n_0, 1), problem.data_time), x0])
    tb = _interior_times(problem, rng, n_b)
    xb = _box(problem, rng, n_b)
    axis = rng.integers(0, d, size=n_b)
    side = rng.integers(0, 2, size=n_b)
    faces = np.where(side == 0, np.array(problem.low)[axis], np.array(problem.high)[axis])
    xb[np.arange(n_b), axis] = faces
    Xb = np.hstack([tb, xb])
    Xd = np.hstack([problem.T * rng.random((n_d, 1)), _box(problem, rng, n_d)])
    ud = np.zeros((n_d, 1))
    if n_d:
        ud = np.asarray(problem.exact(Xd[:, :1], Xd[:, 1:]), dtype=float).reshape(n_d, 1)
        if noise:
            ud = ud + noise * rng.standard_normal((n_d, 1))
    return TrainingSets(Xr=Xr, X0=X0, u0=problem.data(x0).reshape(n_0, 1),
                        Xb=Xb, ub=problem.boundary(tb, xb).reshape(n_b, 1), Xd=Xd, ud=ud)


# --------------------------------------------------------------------------
# residual and loss


def make_params(problem, spec, seed):
    """Network parameters; parametric problems get one extra scalar ``lambda``."""
    entries = nn.layout(spec)
    if problem.has_parameter:
        entries = entries + [(LAMBDA, (1,))]
    pset = nn.ParamSet(entries)
    params = nn.init(spec, seed, pset)
    if problem.has_parameter:
        pset[LAMBDA][...] = problem.lam_init
    return params


def residual(problem, params, leaves, points, lam=None):
    """Strong residual at rows ``[t, x]`` of ``points`` as an (n, m) tensor."""
    points = np.asarray(points, dtype=np.float64)
    second = tuple(1 + i for i in problem.second)
    u, grads, hess = nn.jet(params, leaves, points, second=second)
    if lam is None and problem.has_parameter:
        lam = leaves[LAMBDA]
    fields = Fields(
        t=points[:, :1], x=points[:, 1:], u=u, u_t=grads[0], u_x=grads[1:],
        u_xx=_SecondDerivatives({i: hess[1 + i] for i in problem.second}), lam=lam)
    sign = 1.0 if problem.time_direction == "forward" else -1.0
    return sign * fields.u_t + problem.operator(fields)


@dataclass
class LossTerms:
    total: object
    residual: object
    initial: object
    boundary: object
    data: object

    def values(self):
        return {k: float(ad.value_of(v)) for k, v in self.components().items()}

    def components(self):
        return {"loss_residual": self.residual, "loss_initial": self.initial,
                "loss_boundary": self.boundary, "loss_data": self.data}


def pinn_loss(problem, params, leaves, sets, lam=None, weights=(1.0, 1.0, 1.0, 1.0)):
    """Mean squared residual, data-slice, boundary and observation misfits and their sum."""
    if len(sets.Xr) == 0 or len(sets.X0) == 0 or len(sets.Xb) == 0:
        raise ConfigurationError("collocation, data-slice and boundary sets must be nonempty")
    r = residual(problem, params, leaves, sets.Xr, lam)
    phi_r = (r * r).mean()
    n0, nb = len(sets.X0), len(sets.Xb)
    stacked = np.vstack([sets.X0, sets.Xb, sets.Xd])
    u = nn.forward(params, stacked, "infer", leaves)
    e0 = u[:n0] - sets.u0
    eb = u[n0:n0 + nb] - sets.ub
    phi_0 = (e0 * e0).mean()
    phi_b = (eb * eb).mean()
    if len(sets.Xd):
        ed = u[n0 + nb:] - sets.ud
        phi_d = (ed * ed).mean()
    else:
        phi_d = leaves[next(iter(leaves))].graph.constant(0.0)
    w = weights
    total = w[0] * phi_r + w[1] * phi_0 + w[2] * phi_b + w[3] * phi_d
    return LossTerms(total, phi_r, phi_0, phi_b, phi_d)


def evaluation_grid(problem, n=101):
    """``n x n`` tensor grid on ``[0, T] x box`` (1-d problems)."""
    if problem.spatial_dim != 1:
        raise ConfigurationError("grid evaluation is defined for one spatial dimension")
    t = np.linspace(0.0, problem.T, n)
    x = np.linspace(problem.low[0], problem.high[0], n)
    tt, xx = np.meshgrid(t, x, indexing="ij")
    return np.column_stack([tt.ravel(), xx.ravel()])


def grid_errors(problem, params, n=101):
    if problem.exact is None:
        return {}
    Z = evaluation_grid(problem, n)
    exact = np.asarray(problem.exact(Z[:, :1], Z[:, 1:])).reshape(-1)
    err = np.abs(nn.predict(params, Z)[:, 0] - exact)
    abs_l1 = err.mean()
    scale = np.abs(exact).mean()
    return {"abs_l1": abs_l1, "rel_l1": abs_l1 / scale if scale > 0 else np.nan,
            "abs_linf": err.max()}


def _loss_step(problem, params, sets, lam_from_params):
    pset = params.pset

    def step(epoch):
        graph = ad.Graph()
        leaves = pset.register(graph)
        terms = pinn_loss(problem, params, leaves, sets)
        grads = ad.backward(terms.total)
        flat = pset.flat_grad(leaves, grads)
        graph.release()
        extras = {}
        if lam_from_params:
            extras["lambda"] = float(pset[LAMBDA][0])
        return float(terms.total.value), terms.values(), flat, extras

    return step


def train(problem, spec, config, counts=None, noise=0.0, params=None, sets=None, method="pinn"):
    """Fixed-set Adam training; returns a :class:`RunResult` with ``params`` attached.

    ``counts`` is ``(N_r, N_0, N_b, N_d)``; it defaults to the problem's
    registered counts.  Training sets are drawn once from ``config.seed``.
    """
    if spec.input_dim != 1 + problem.spatial_dim:
        raise ConfigurationError("network input dimension must be 1 + spatial dimension")
    if counts is None:
        counts = DEFAULT_COUNTS.get(problem.key, (1000, 50, 50, 0))
    if sets is None:
        sets = sample_training_sets(problem, *counts, seed=config.seed, noise=noise)
    if params is None:
        params = make_params(problem, spec, config.seed)
    result = RunResult(method, problem.key, config.seed)
    step = _loss_step(problem, params, sets, problem.has_parameter)
    try:
        run_adam(params.theta, step, config, result,
                 evaluate=lambda epoch: grid_errors(problem, params))
    finally:
        result.snapshot = nn.snapshot_entries(params.pset)
        result.params = params
    return result


def identify_parameter(problem, spec, config, noise=0.0, n_d=500, counts=None):
    """Train network and ``lambda`` jointly; returns ``(lambda trajectory, result)``."""
    if not problem.has_parameter or problem.exact is None:
        raise ConfigurationError("parameter identification needs a parametric problem with exact solution")
    if counts is None:
        n_r, n_0, n_b, _ = DEFAULT_COUNTS.get(problem.key, (2000, 25, 50, 0))
        counts = (n_r, n_0, n_b, n_d)
    result = train(problem, spec, config, counts=counts, noise=noise, method="pinn-ident")
    result.summary["lambda_final"] = float(result.params.pset[LAMBDA][0])
    return result.metric("lambda"), result


# --------------------------------------------------------------------------
# discrete-time Runge-Kutta variant


@dataclass(frozen=True)
class ButcherTableau:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        q = len(self.b)
        if np.shape(self.a) != (q, q) or len(self.c) != q:
            raise ConfigurationError("tableau shapes are inconsistent")
        if not np.allclose(np.sum(self.a, axis=1), self.c, rtol=0, atol=1e-14):
            raise ConfigurationError("tableau rows must sum to the nodes")

    @property
    def stages(self):
        return len(self.b)

    @property
    def extended(self):
        """Stage matrix with the weights appended as a last row, shape (q+1, q)."""
        return np.vstack([self.a, self.b])


def gauss_legendre(q):
    """q-stage Gauss-Legendre collocation tableau (order 2q)."""
    if q not in (1, 2, 3):
        raise ConfigurationError("Gauss-Legendre tableaus are provided for q = 1, 2, 3")
    nodes, _ = np.polynomial.legendre.leggauss(q)
    c = np.sort((nodes + 1.0) / 2.0)
    a = np.zeros((q, q))
    b = np.zeros(q)
    P = np.polynomial.Polynomial
    for j in range(q):
        others = [c[k] for k in range(q) if k != j]
        basis = P.fromroots(others) / np.prod([c[j] - ck for ck in others]) if others else P([1.0])
        prim = basis.integ()
        b[j] = prim(1.0) - prim(0.0)
        a[:, j] = prim(c) - prim(0.0)
    return ButcherTableau(a, b, c)


def stage_jet(problem, params, leaves, x):
    """Stage outputs of ``x -> (u^{n+c_1}, ..., u^{n+c_q}, u^{n+1})`` and their x-derivatives."""
    if problem.spatial_dim != 1:
        raise ConfigurationError("the discrete-time form is implemented for one spatial dimension")
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    U, grads, hess = nn.jet(params, leaves, x, second=problem.second)
    return U, grads, hess


def rk_stage_residuals(problem, tableau, dt, stages, u_n, t_n=0.0, lam=None):
    """Residuals ``r^1..r^{q+1}`` as an (n, q+1) array or tensor.

    ``stages`` is ``(U, [dU/dx], {0: d2U/dx2})`` with ``U`` of shape
    (n, q+1): stage values followed by the step value.
    """
    if problem.time_direction != "forward":
        raise ConfigurationError("the discrete-time form expects a forward problem")
    if not dt > 0:
        raise ConfigurationError("time step must be positive")
    U, grads, hess = stages
    q = tableau.stages
    u_n = np.asarray(u_n, dtype=np.float64).reshape(-1, 1)
    second = _SecondDerivatives({i: hess[i][:, :q] for i in problem.second if i in hess})
    fields = Fields(t=t_n + dt * tableau.c.reshape(1, q), x=None, u=U[:, :q], u_t=None,
                    u_x=[g[:, :q] for g in grads], u_xx=second, lam=lam)
    N = problem.operator(fields)
    return U - u_n + dt * (N @ tableau.extended.T)


def rk_loss(problem, params, leaves, tableau, dt, x_n, u_n, t_n=0.0, lam=None):
    """Summed squared stage residuals plus squared boundary mismatch at both endpoints."""
    if problem.spatial_dim != 1:
        raise ConfigurationError("boundary terms are implemented for one spatial dimension")
    if len(x_n) == 0:
        raise ConfigurationError("data set is empty")
    R = rk_stage_residuals(problem, tableau, dt, stage_jet(problem, params, leaves, x_n), u_n, t_n, lam)
    ends = np.array([[problem.low[0]], [problem.high[0]]])
    times = np.append(t_n + dt * tableau.c, t_n + dt)
    target = np.hstack([problem.boundary(np.full((2, 1), s), ends) for s in times])
    Ub = nn.forward(params, ends, "infer", leaves)
    eb = Ub - target
    return (R * R).sum() + (eb * eb).sum()


def train_rk(problem, spec, tableau, dt, x_n, u_n, config, t_n=0.0):
    """Fit the stage network to one Runge-Kutta step from data ``(x_n, u_n)``."""
    if spec.input_dim != 1 or spec.output_dim != tableau.stages + 1:
        raise ConfigurationError("stage network must map 1 input to q+1 outputs")
    params = nn.init(spec, config.seed)
    pset = params.pset

    def step(epoch):
        graph = ad.Graph()
        leaves = pset.register(graph)
        loss = rk_loss(problem, params, leaves, tableau, dt, x_n, u_n, t_n)
        flat = pset.flat_grad(leaves, ad.backward(loss))
        graph.release()
        return float(loss.value), {}, flat, {}

    result = RunResult("pinn-rk", problem.key, config.seed)
    try:
        run_adam(params.theta, step, config, result)
    finally:
        result.snapshot = nn.snapshot_entries(pset)
        result.params = params
    return result
