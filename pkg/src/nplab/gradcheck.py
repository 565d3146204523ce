"""Finite-difference checks of parameter gradients and spatial derivatives.

Each ``*_case`` builder returns ``(theta, value_and_grad)`` for a small
random instance of one method's loss; :func:`check_gradient` compares the
tape gradient against central differences.

Central differences only measure the derivative when the whole stencil
lies on one linear piece of every kinked operation (ReLU, leaky ReLU,
absolute value).  With ``require_smooth`` the stencil is checked with
:func:`nplab.autodiff.record_branches` and :class:`StencilCrossesKink` is
raised when it straddles a kink; :func:`run_suite` then draws a new case.
"""

import numpy as np

from . import autodiff as ad
from . import deep_bsde, feynman_kac, nn, pinn, streams


def relative_error(approx, reference):
    """Normwise relative error ``max|a - b| / max|b|``."""
    approx = np.asarray(approx, dtype=float)
    reference = np.asarray(reference, dtype=float)
    scale = np.max(np.abs(reference))
    diff = np.max(np.abs(approx - reference))
    return diff / scale if scale > 0 else diff


class StencilCrossesKink(ValueError):
    """A finite-difference stencil straddles a kink of a piecewise-linear operation."""

    def __init__(self, coord):
        super().__init__(f"stencil along coordinate {coord} crosses a kink")
        self.coord = coord


def _same_branches(a, b):
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def central_difference(fn, theta, h=1e-5, coords=None, require_smooth=False):
    """Central differences of a scalar function of ``theta`` along ``coords`` (default: all)."""
    theta = np.array(theta, dtype=float)
    coords = range(theta.size) if coords is None else coords
    if require_smooth:
        with ad.record_branches() as base:
            fn(theta)
    out = []
    for i in coords:
        old = theta[i]
        values = []
        for x in (old + h, old - h):
            theta[i] = x
            with ad.record_branches() as log:
                values.append(fn(theta))
            if require_smooth and not _same_branches(base, log):
                raise StencilCrossesKink(int(i))
        theta[i] = old
        out.append((values[0] - values[1]) / (2.0 * h))
    return np.array(out)


def check_gradient(value_and_grad, theta, h=1e-5, coords=None, require_smooth=False):
    """Relative error between the tape gradient and central differences."""
    _, grad = value_and_grad(theta)
    coords = np.arange(theta.size) if coords is None else np.asarray(coords)
    fd = central_difference(lambda th: value_and_grad(th)[0], theta, h, coords, require_smooth)
    return relative_error(grad[coords], fd)


def _bind(pset, loss_fn):
    def value_and_grad(theta):
        pset.theta[:] = theta
        leaves = pset.register(ad.Graph())
        loss = loss_fn(leaves)
        grads = ad.backward(loss)
        return float(loss.value), pset.flat_grad(leaves, grads)
    return value_and_grad


def random_plain_spec(rng, input_dim, output_dim, activation, max_layers=3, max_width=8):
    widths = [int(w) for w in rng.integers(2, max_width + 1, size=rng.integers(1, max_layers + 1))]
    return nn.MlpSpec.plain(input_dim, widths, activation, output_dim)


def pinn_case(problem_key, activation, seed, n=8):
    """PINN loss of a random small network on a random small training set."""
    rng = np.random.default_rng(seed)
    problem = pinn.PROBLEMS[problem_key]()
    spec = random_plain_spec(rng, 2, 1, activation)
    params = pinn.make_params(problem, spec, seed)
    if problem.has_parameter:
        params.pset[pinn.LAMBDA][...] = rng.uniform(1.0, 3.0)
    n_d = n if problem.has_parameter else 0
    sets = pinn.sample_training_sets(problem, n, n, n, n_d, seed=seed, noise=0.01)
    fn = _bind(params.pset, lambda leaves: pinn.pinn_loss(problem, params, leaves, sets).total)
    return params.theta.copy(), fn


def rk_case(activation, seed, n=8, stages=2):
    rng = np.random.default_rng(seed)
    problem = pinn.burgers()
    tableau = pinn.gauss_legendre(stages)
    spec = random_plain_spec(rng, 1, stages + 1, activation)
    params = nn.init(spec, seed)
    x = rng.uniform(-1.0, 1.0, size=(n, 1))
    u = problem.data(x)
    fn = _bind(params.pset, lambda leaves: pinn.rk_loss(problem, params, leaves, tableau, 0.1, x, u))
    return params.theta.copy(), fn


def feynman_kac_case(activation, seed, d=3, n=16):
    """Regression loss of a random batch-normalized network on one simulated batch."""
    rng = np.random.default_rng(seed)
    problem = feynman_kac.heat(d)
    widths = [int(w) for w in rng.integers(2, 8, size=rng.integers(1, 3))]
    spec = nn.MlpSpec.batch_normed(d, widths, activation, 1)
    params = nn.init(spec, seed)
    # perturb the batch-norm scales so they are not all exactly one
    for name in params.pset.names():
        if name.endswith("gamma") or name.endswith("beta"):
            params.pset[name][...] += 0.1 * rng.standard_normal(params.pset[name].shape)
    batch = feynman_kac.sample_exact(problem, n, seed)
    y = batch.targets.reshape(-1, 1)

    def loss(leaves):
        e = nn.forward(params, batch.starts, "train", leaves) - y
        return (e * e).mean()

    return params.theta.copy(), _bind(params.pset, loss)


def bsde_case(activation, seed, d=2, N=3, n=16, problem_key="allen-cahn"):
    """Deep BSDE terminal loss on a toy instance with random parameters."""
    rng = np.random.default_rng(seed)
    problem = deep_bsde.PROBLEMS[problem_key](d=d, T=0.5, N=N)
    params = deep_bsde.BsdeParams(problem, 1, 5, seed)
    if activation != "relu":
        spec = nn.MlpSpec.batch_normed(d, [5], activation, d)
        params.subnet_spec = spec
        params.subnets = [nn.init(spec, [seed, k], params.pset, f"net{k}.") for k in range(1, N)]
    params.pset["z0"][...] = 0.3 * rng.standard_normal(d)
    dW, X = deep_bsde.simulate_forward(problem, n, seed)
    g = problem.terminal(X[:, -1])

    def loss(leaves):
        Y, _ = deep_bsde.rollout_backward(problem, params, dW, X, "train", leaves)
        return deep_bsde.bsde_loss(Y[-1], g)

    return params.theta.copy(), _bind(params.pset, loss)


def second_derivative_error(seed, n=8, h=1e-4):
    """Relative error of jet second derivatives of a random tanh net against central differences."""
    rng = np.random.default_rng(seed)
    spec = random_plain_spec(rng, 2, 1, "tanh")
    params = nn.init(spec, seed)
    Z = rng.uniform(-1.0, 1.0, size=(n, 2))
    leaves = params.pset.register(ad.Graph())
    _, _, hess = nn.jet(params, leaves, Z, second=(0, 1))
    errs = []
    for j in (0, 1):
        e = np.zeros(2)
        e[j] = h
        fd = (nn.predict(params, Z + e) - 2.0 * nn.predict(params, Z) + nn.predict(params, Z - e)) / h**2
        errs.append(relative_error(hess[j].value, fd))
    return max(errs)


SUITES = {
    "pinn": lambda act, seed: pinn_case("eikonal" if act != "tanh" else "burgers", act, seed),
    "pinn-ident": lambda act, seed: pinn_case("eikonal-param", act, seed),
    "pinn-rk": lambda act, seed: rk_case(act, seed),
    "feynman-kac": lambda act, seed: feynman_kac_case(act, seed),
    "deep-bsde": lambda act, seed: bsde_case(act, seed),
}


def run_suite(method, n_nets=10, seed=0, activations=("tanh", "leaky_relu"), h=1e-5, stats=None):
    """``[(activation, seed, relative error)]`` for ``n_nets`` random instances of a method's loss.

    Cases whose stencil crosses a kink are redrawn; their number is stored
    under ``"redrawn"`` in ``stats`` when a dict is given.
    """
    out = []
    draw = redrawn = 0
    while len(out) < n_nets:
        act = activations[len(out) % len(activations)]
        case_seed = int(streams.generator(seed, "gradcheck", method, draw).integers(2**31))
        draw += 1
        theta, fn = SUITES[method](act, case_seed)
        try:
            out.append((act, case_seed, check_gradient(fn, theta, h, require_smooth=True)))
        except StencilCrossesKink:
            redrawn += 1
    if stats is not None:
        stats["redrawn"] = redrawn
    return out
