"""scikit-learn style wrappers around the training routines.

Hyperparameters are constructor arguments, ``fit`` trains and stores
fitted state in attributes ending in an underscore, and ``predict``
evaluates the trained network.  The wrappers are thin: all numerics live
in :mod:`nplab.pinn`, :mod:`nplab.feynman_kac` and :mod:`nplab.deep_bsde`.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import deep_bsde, feynman_kac, nn, pinn
from .exceptions import ConfigurationError
from .optimize import LrSchedule
from .training import TrainConfig


def _schedule(schedule, default):
    if schedule is None:
        return default
    if isinstance(schedule, LrSchedule):
        return schedule
    if isinstance(schedule, str):
        return LrSchedule.parse(schedule)
    return LrSchedule.constant(float(schedule))


class PinnSolver(RegressorMixin, BaseEstimator):
    """Continuous-time physics-informed network for a registered problem.

    ``fit`` samples the training sets from ``random_state`` and trains on
    them.  For ``eikonal-param`` the observations may be supplied as
    ``X`` (rows ``[t, x]``) and ``y``; otherwise they are generated from
    the exact solution with relative noise ``noise``.

    Examples
    --------
    >>> est = PinnSolver("eikonal", epochs=200).fit()
    >>> est.predict([[0.5, 0.0]]).shape
    (1,)
    """

    def __init__(self, problem="eikonal", activation=None, hidden=None, epochs=None,
                 schedule=None, n_r=None, n_0=None, n_b=None, n_d=None, noise=0.0,
                 lambda_init=1.0, target_loss=None, random_state=0):
        self.problem = problem
        self.activation = activation
        self.hidden = hidden
        self.epochs = epochs
        self.schedule = schedule
        self.n_r = n_r
        self.n_0 = n_0
        self.n_b = n_b
        self.n_d = n_d
        self.noise = noise
        self.lambda_init = lambda_init
        self.target_loss = target_loss
        self.random_state = random_state

    def _problem(self):
        if self.problem not in pinn.PROBLEMS:
            raise ConfigurationError(f"unknown problem {self.problem!r}")
        if self.problem == "eikonal-param":
            return pinn.eikonal_param(lam_init=self.lambda_init)
        return pinn.PROBLEMS[self.problem]()

    def fit(self, X=None, y=None):
        problem = self._problem()
        spec = pinn.default_spec(problem, self.activation)
        if self.hidden is not None:
            spec = nn.MlpSpec.plain(spec.input_dim, list(self.hidden), spec.hidden[0][1], 1,
                                    input_scaling=spec.input_scaling)
        base = pinn.default_config(problem)
        config = TrainConfig(epochs=base.epochs if self.epochs is None else self.epochs,
                             schedule=_schedule(self.schedule, base.schedule),
                             seed=self.random_state, target_loss=self.target_loss)
        counts = list(pinn.DEFAULT_COUNTS[problem.key])
        for i, value in enumerate((self.n_r, self.n_0, self.n_b, self.n_d)):
            if value is not None:
                counts[i] = value
        sets = None
        if X is not None:
            if not problem.has_parameter:
                raise ConfigurationError("observations are only used by parametric problems")
            if y is None:
                raise ConfigurationError("observations X need values y")
            X = check_array(X)
            y = check_array(np.asarray(y).reshape(-1, 1))
            if X.shape != (len(y), 2):
                raise ConfigurationError("observations must be (n, 2) rows [t, x] with n values")
            counts[3] = 0
            sets = pinn.sample_training_sets(problem, *counts, seed=config.seed)
            sets.Xd, sets.ud = X, y
        result = pinn.train(problem, spec, config, counts=tuple(counts), noise=self.noise,
                            sets=sets, method="pinn-ident" if problem.has_parameter else "pinn")
        self.params_ = result.params
        self.result_ = result
        self.problem_ = problem
        self.n_features_in_ = 2
        if problem.has_parameter:
            self.lambda_ = float(result.params.pset[pinn.LAMBDA][0])
        return self

    def predict(self, X):
        """Network values at rows ``[t, x]``."""
        check_is_fitted(self, "params_")
        X = check_array(X)
        if X.shape[1] != 2:
            raise ConfigurationError("expected rows [t, x]")
        return nn.predict(self.params_, X)[:, 0]


class DiscreteTimePinn(BaseEstimator):
    """One implicit Gauss-Legendre Runge-Kutta step for viscous Burgers.

    ``fit(x, u)`` takes snapshot data at ``t_n``; ``predict`` returns the
    ``q`` stage values and the step value ``u_{n+1}`` as columns.
    """

    def __init__(self, stages=2, dt=0.1, t_n=0.0, hidden=(32, 32, 32), activation="tanh",
                 epochs=2000, schedule=1e-3, random_state=0):
        self.stages = stages
        self.dt = dt
        self.t_n = t_n
        self.hidden = hidden
        self.activation = activation
        self.epochs = epochs
        self.schedule = schedule
        self.random_state = random_state

    def fit(self, X, y):
        X = check_array(X)
        u = check_array(np.asarray(y, dtype=float).reshape(-1, 1))
        if X.shape != (len(u), 1):
            raise ConfigurationError("expected one spatial coordinate per sample")
        tableau = pinn.gauss_legendre(self.stages)
        spec = nn.MlpSpec.plain(1, list(self.hidden), self.activation, self.stages + 1)
        config = TrainConfig(epochs=self.epochs, schedule=_schedule(self.schedule, None),
                             seed=self.random_state)
        result = pinn.train_rk(pinn.burgers(), spec, tableau, self.dt, X, u, config, self.t_n)
        self.params_ = result.params
        self.result_ = result
        self.tableau_ = tableau
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X)
        return nn.predict(self.params_, X)


class FeynmanKacRegressor(RegressorMixin, BaseEstimator):
    """Learn ``x -> u(T, x)`` of a linear Kolmogorov problem from simulated paths.

    Each epoch draws a fresh batch of start points uniformly on the domain
    and regresses the network on the simulated targets.
    """

    def __init__(self, problem="heat", d=10, T=1.0, width=200, layers=2, epochs=50000,
                 schedule=None, batch_size=256, potential=0.5, source=1.0, time_steps=20,
                 random_state=0):
        self.problem = problem
        self.d = d
        self.T = T
        self.width = width
        self.layers = layers
        self.epochs = epochs
        self.schedule = schedule
        self.batch_size = batch_size
        self.potential = potential
        self.source = source
        self.time_steps = time_steps
        self.random_state = random_state

    def _problem(self):
        if self.problem == "heat":
            return feynman_kac.heat(self.d, self.T)
        if self.problem == "heat-potential":
            return feynman_kac.heat_potential(self.d, self.T, self.potential, self.source,
                                              self.time_steps)
        raise ConfigurationError(f"unknown problem {self.problem!r}")

    def fit(self, X=None, y=None):
        problem = self._problem()
        spec = nn.MlpSpec.batch_normed(problem.d, [self.width] * self.layers, "tanh", 1)
        config = TrainConfig(epochs=self.epochs,
                             schedule=_schedule(self.schedule, feynman_kac.default_config(problem).schedule),
                             seed=self.random_state, batch_size=self.batch_size)
        result = feynman_kac.train_regression(problem, spec, config)
        self.params_ = result.params
        self.result_ = result
        self.problem_ = problem
        self.n_features_in_ = problem.d
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ConfigurationError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return nn.predict(self.params_, X)[:, 0]


class DeepBSDESolver(BaseEstimator):
    """Deep BSDE estimate of ``u(0, x0)`` for a registered semilinear problem.

    The solution is only learned at the fixed start point, so ``predict``
    accepts rows equal to ``x0`` (or no input) and returns ``y0_``.
    """

    def __init__(self, problem="lqg-hjb", d=100, T=1.0, preset="reference", epochs=None,
                 learning_rate=None, batch_size=64, random_state=0):
        self.problem = problem
        self.d = d
        self.T = T
        self.preset = preset
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.random_state = random_state

    def fit(self, X=None, y=None):
        if self.problem not in deep_bsde.PROBLEMS:
            raise ConfigurationError(f"unknown problem {self.problem!r}")
        problem = deep_bsde.PROBLEMS[self.problem](d=self.d, T=self.T)
        base = deep_bsde.default_config(problem, self.random_state)
        config = base.with_(
            epochs=base.epochs if self.epochs is None else self.epochs,
            schedule=base.schedule if self.learning_rate is None
            else LrSchedule.constant(self.learning_rate),
            batch_size=self.batch_size)
        result = deep_bsde.train(problem, self.preset, config)
        self.params_ = result.params
        self.result_ = result
        self.y0_ = result.params.y0
        self.x0_ = np.array(problem.x0, dtype=float)
        self.n_features_in_ = self.d
        return self

    def predict(self, X=None):
        check_is_fitted(self, "y0_")
        if X is None:
            return np.array([self.y0_])
        X = check_array(X)
        if X.shape[1] != self.d or not np.allclose(X, self.x0_):
            raise ConfigurationError("the solver only estimates the solution at its start point")
        return np.full(len(X), self.y0_)
