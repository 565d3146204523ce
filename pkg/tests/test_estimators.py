import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from nplab import nn, pinn
from nplab.estimators import DeepBSDESolver, DiscreteTimePinn, FeynmanKacRegressor, PinnSolver
from nplab.exceptions import ConfigurationError

ESTIMATORS = [PinnSolver(), DiscreteTimePinn(), FeynmanKacRegressor(), DeepBSDESolver()]


@pytest.mark.parametrize("est", ESTIMATORS, ids=lambda e: type(e).__name__)
class TestApi:
    def test_clone_keeps_params(self, est):
        est = clone(est).set_params(random_state=5)
        copy = clone(est)
        assert copy.get_params() == est.get_params() and copy is not est

    def test_unfitted_predict(self, est):
        with pytest.raises(NotFittedError):
            est.predict(np.zeros((1, 2)))


class TestPinnSolver:
    def test_zero_epochs_is_initialization(self):
        est = PinnSolver("eikonal", activation="tanh", epochs=0, random_state=3).fit()
        X = np.array([[0.25, -0.5], [0.75, 0.1]])
        spec = pinn.default_spec(pinn.eikonal(), "tanh")
        np.testing.assert_array_equal(est.predict(X), nn.predict(nn.init(spec, 3), X)[:, 0])
        assert len(est.result_) == 1

    def test_deterministic(self):
        a = PinnSolver("burgers", epochs=3, n_r=50, n_0=10, n_b=10, random_state=1).fit()
        b = PinnSolver("burgers", epochs=3, n_r=50, n_0=10, n_b=10, random_state=1).fit()
        assert a.params_.theta.tobytes() == b.params_.theta.tobytes()

    def test_observations(self):
        rng = np.random.default_rng(0)
        X = np.column_stack([rng.uniform(0, 1, 40), rng.uniform(-1, 1, 40)])
        y = pinn.eikonal().exact(X[:, :1], X[:, 1:])[:, 0]
        est = PinnSolver("eikonal-param", epochs=5, n_r=100, n_0=10, n_b=10).fit(X, y)
        assert np.isfinite(est.lambda_) and est.lambda_ != 1.0
        assert est.predict(X).shape == (40,)

    def test_observations_rejected(self):
        with pytest.raises(ConfigurationError):
            PinnSolver("eikonal", epochs=1).fit(np.zeros((3, 2)), np.zeros(3))
        with pytest.raises(ConfigurationError):
            PinnSolver("eikonal-param", epochs=1).fit(np.zeros((3, 3)), np.zeros(3))

    def test_unknown_problem(self):
        with pytest.raises(ConfigurationError):
            PinnSolver("wave").fit()

    def test_predict_shape_checked(self):
        est = PinnSolver("eikonal", epochs=0).fit()
        with pytest.raises(ConfigurationError):
            est.predict(np.zeros((2, 3)))


class TestDiscreteTimePinn:
    def test_fit_predict(self):
        x = np.linspace(-1, 1, 30)[:, None]
        est = DiscreteTimePinn(stages=2, hidden=(8,), epochs=3).fit(x, -np.sin(np.pi * x[:, 0]))
        assert est.predict(x).shape == (30, 3)
        assert len(est.tableau_.b) == 2

    def test_shape_mismatch(self):
        with pytest.raises(ConfigurationError):
            DiscreteTimePinn(epochs=1).fit(np.zeros((4, 1)), np.zeros(5))


class TestFeynmanKacRegressor:
    def test_fit_predict(self):
        est = FeynmanKacRegressor(d=2, width=8, epochs=20, batch_size=32).fit()
        assert est.predict(np.zeros((5, 2))).shape == (5,)
        assert est.result_.last("rel_l1") is not None
        with pytest.raises(ConfigurationError):
            est.predict(np.zeros((5, 3)))

    def test_score_against_exact(self):
        est = FeynmanKacRegressor(d=2, width=8, epochs=0).fit()
        X = np.random.default_rng(1).uniform(-1, 1, (50, 2))
        assert np.isfinite(est.score(X, est.problem_.exact(X)))

    def test_unknown_problem(self):
        with pytest.raises(ConfigurationError):
            FeynmanKacRegressor("wave").fit()


class TestDeepBSDESolver:
    def test_fit_predict(self):
        est = DeepBSDESolver(d=3, preset="simple", epochs=5, batch_size=8).fit()
        assert est.predict().shape == (1,)
        np.testing.assert_array_equal(est.predict(np.tile(est.x0_, (2, 1))), est.y0_)
        with pytest.raises(ConfigurationError):
            est.predict(np.ones((1, 3)))

    def test_learning_rate_override(self):
        est = DeepBSDESolver(d=2, preset="simple", epochs=2, learning_rate=0.5, batch_size=4).fit()
        assert est.result_.columns["lr"][0] == 0.5
