import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nplab import feynman_kac as fk
from nplab import gradcheck, nn
from nplab.exceptions import ConfigurationError, SimulationBlowUp
from nplab.optimize import LrSchedule
from nplab.training import TrainConfig


def _sum(x):
    return x.sum(axis=1)


def constant_coefficients(d=1, mu=0.0, sigma=0.0, terminal=_sum, **kw):
    drift = None if mu is None else (lambda t, x: np.broadcast_to(np.asarray(mu, float), x.shape))
    sig = np.asarray(sigma, dtype=float) * (np.eye(d) if np.ndim(sigma) == 0 else 1.0)
    return fk.KolmogorovProblem(key="const", d=d, T=kw.pop("T", 1.0), sigma=sig, terminal=terminal,
                                drift=drift, mode="em", **kw)


class TestProblems:
    def test_exact_mode_needs_zero_drift(self):
        with pytest.raises(ConfigurationError):
            fk.KolmogorovProblem("p", 1, 1.0, np.eye(1), _sum, drift=lambda t, x: x)

    def test_sigma_shape(self):
        with pytest.raises(ConfigurationError):
            fk.KolmogorovProblem("p", 2, 1.0, np.eye(3), _sum)

    def test_mode_mismatch(self):
        with pytest.raises(ConfigurationError):
            fk.sample_em(fk.heat(2), 4, 0)
        with pytest.raises(ConfigurationError):
            fk.sample_exact(fk.heat_potential(2), 4, 0)


class TestExactSampler:
    def test_forced_zero_noise(self):
        problem = fk.heat(3)
        batch = fk.sample_exact(problem, 5, 0, xi=np.zeros((5, 3)))
        np.testing.assert_array_equal(batch.terminals, batch.starts)
        np.testing.assert_allclose(batch.targets, (batch.starts ** 2).sum(axis=1))
        np.testing.assert_array_equal(batch.discount, 1.0)

    def test_zero_sigma(self):
        problem = fk.KolmogorovProblem("still", 4, 1.0, np.zeros((4, 4)), _sum)
        batch = fk.sample_exact(problem, 100, 1)
        np.testing.assert_array_equal(batch.terminals, batch.starts)

    def test_starts_uniform_on_domain(self):
        batch = fk.sample_exact(fk.heat(5), 20000, 2)
        assert np.all(np.abs(batch.starts) <= 1)
        np.testing.assert_allclose(batch.starts.mean(axis=0), 0.0, atol=0.03)

    def test_squared_displacement_d100(self):
        batch = fk.sample_exact(fk.heat(100), 10**6, 3)
        sq = ((batch.terminals - batch.starts) ** 2).sum(axis=1)
        assert sq.mean() == pytest.approx(200.0, rel=0.01)

    def test_deterministic(self):
        a = fk.sample_exact(fk.heat(3), 5000, 4)
        b = fk.sample_exact(fk.heat(3), 5000, 4)
        assert a.targets.tobytes() == b.targets.tobytes()
        assert a.starts.tobytes() == b.starts.tobytes()


class TestEulerMaruyama:
    @pytest.mark.parametrize("n_steps", [1, 2, 4, 8, 16, 64])
    def test_deterministic_drift_dyadic_steps(self, n_steps):
        problem = constant_coefficients(mu=1.0, n_steps=n_steps)
        batch = fk.sample_em(problem, 3, 0, start=[0.0])
        np.testing.assert_array_equal(batch.terminals, 1.0)
        np.testing.assert_array_equal(batch.targets, 1.0)

    @pytest.mark.parametrize("n_steps", [3, 7, 10, 20, 33])
    def test_deterministic_drift_other_steps(self, n_steps):
        # N * (1/N) summed in floating point is one up to rounding
        problem = constant_coefficients(mu=1.0, n_steps=n_steps)
        batch = fk.sample_em(problem, 3, 0, start=[0.0])
        np.testing.assert_allclose(batch.terminals, 1.0, rtol=0, atol=1e-14)

    def test_constant_potential_discount(self):
        r = 0.7
        problem = fk.KolmogorovProblem(
            "disc", 2, 1.5, np.eye(2), _sum, potential=lambda t, x: np.full(len(x), r),
            mode="em", n_steps=25)
        batch = fk.sample_em(problem, 50, 0, history=True)
        times = np.linspace(0.0, 1.5, 26)
        np.testing.assert_allclose(batch.discount_history, np.tile(np.exp(-r * times), (50, 1)), rtol=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_discount_nonincreasing(self, seed):
        problem = fk.KolmogorovProblem(
            "disc", 2, 1.0, np.eye(2), _sum, potential=lambda t, x: np.abs(x).sum(axis=1),
            mode="em", n_steps=10)
        hist = fk.sample_em(problem, 20, seed, history=True).discount_history
        assert np.all(np.diff(hist, axis=1) <= 0)
        assert np.all((hist > 0) & (hist <= 1))

    @pytest.mark.parametrize("n_steps", [1, 4, 16])
    def test_constant_source(self, n_steps):
        c = 2.5
        problem = fk.KolmogorovProblem(
            "src", 1, 1.0, np.eye(1), lambda x: np.zeros(len(x)),
            source=lambda t, x: np.full(len(x), c), mode="em", n_steps=n_steps)
        np.testing.assert_array_equal(fk.sample_em(problem, 40, 0).targets, c * 1.0)

    def test_blow_up_names_step(self):
        problem = constant_coefficients(mu=None, n_steps=5)
        problem.drift = lambda t, x: np.where(t > 0.3, np.inf, 0.0) * np.ones_like(x)
        with pytest.raises(SimulationBlowUp) as info:
            fk.sample_em(problem, 2, 0)
        assert info.value.step == 3

    def test_terminal_distribution(self):
        mu = np.array([0.5, -1.0, 0.25])
        sigma = np.array([[1.0, 0.0, 0.0], [0.5, 0.8, 0.0], [-0.3, 0.2, 0.6]])
        x0 = np.array([0.1, 0.2, -0.3])
        T = 2.0
        problem = constant_coefficients(3, mu, sigma, T=T, n_steps=7)
        n = 10**6
        XT = fk.sample_em(problem, n, 12, start=x0).terminals
        cov = sigma @ sigma.T * T
        se_mean = np.sqrt(np.diag(cov) / n)
        assert np.all(np.abs(XT.mean(axis=0) - (x0 + mu * T)) < 5 * se_mean)
        emp = np.cov(XT, rowvar=False)
        se_cov = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov ** 2) / n)
        assert np.all(np.abs(emp - cov) < 5 * se_cov)


class TestReference:
    def test_heat_second_moment(self):
        problem = fk.heat(100)
        est, se = fk.mc_reference(problem, np.zeros(100), 10**5, 0)
        assert abs(est - 200.0) < 4 * se

    def test_constant_terminal_has_zero_error(self):
        problem = fk.heat_potential(3, r=0.0, f=0.0)
        problem.terminal = lambda x: np.full(len(x), 4.25)
        est, se = fk.mc_reference(problem, np.ones(3), 5000, 1)
        assert est == 4.25 and se == 0.0

    def test_standard_error_scaling(self):
        problem = fk.heat(5)
        _, se_small = fk.mc_reference(problem, np.zeros(5), 10**4, 2)
        _, se_large = fk.mc_reference(problem, np.zeros(5), 10**6, 3)
        assert se_small / se_large == pytest.approx(10.0, rel=0.2)

    def test_too_few_samples(self):
        with pytest.raises(ConfigurationError):
            fk.mc_reference(fk.heat(2), np.zeros(2), 1, 0)

    def test_regression_optimum_is_conditional_mean(self):
        # two start points, empirical MSE over a grid of candidate tables
        problem = fk.heat(1)
        starts = [np.array([-0.5]), np.array([0.75])]
        ys = [fk.sample_exact(problem, 400, 5, key=(i,), start=s).targets for i, s in enumerate(starts)]
        grid = np.linspace(0.0, 5.0, 2001)
        best = []
        for y in ys:
            mse = ((y[None, :] - grid[:, None]) ** 2).mean(axis=1)
            best.append(grid[np.argmin(mse)])
        for b, y in zip(best, ys):
            assert abs(b - y.mean()) <= (grid[1] - grid[0]) / 2 + 1e-12


class TestDomainError:
    def test_exact_oracle(self):
        problem = fk.heat(4)
        assert fk.domain_error(problem, problem.exact, 1000) == (0.0, 0.0, 0.0)

    def test_offset_oracle(self):
        problem = fk.heat(4)
        a, r, m = fk.domain_error(problem, lambda x: problem.exact(x) + 1.0, 1000)
        assert a == pytest.approx(1.0) and m == pytest.approx(1.0)
        assert 0 < r < 1

    def test_needs_exact(self):
        problem = fk.KolmogorovProblem("noexact", 1, 1.0, np.eye(1), _sum)
        with pytest.raises(ConfigurationError):
            fk.domain_error(problem, lambda x: x[:, 0], 10)

    def test_batch_norm_gradients(self):
        errors = [err for _, _, err in gradcheck.run_suite("feynman-kac", n_nets=6, seed=4)]
        assert max(errors) < 1e-5


class TestRegression:
    def test_zero_epochs_echo_initialization(self):
        problem = fk.heat(3)
        spec = fk.default_spec(problem, width=8)
        result = fk.train_regression(problem, spec, TrainConfig(epochs=0, seed=2), n_eval=500)
        assert len(result) == 1
        np.testing.assert_array_equal(result.params.theta, nn.init(spec, 2).theta)
        assert result.last("rel_l1") is not None

    def test_fresh_batches(self):
        problem = fk.heat(2)
        a = fk.sample(problem, 8, 0, key=("train", 0))
        b = fk.sample(problem, 8, 0, key=("train", 1))
        assert not np.array_equal(a.starts, b.starts)

    def test_spec_mismatch(self):
        with pytest.raises(ConfigurationError):
            fk.train_regression(fk.heat(3), fk.default_spec(fk.heat(4), 8), TrainConfig(epochs=1))

    @pytest.mark.slow
    def test_linear_terminal_learned(self):
        problem = fk.KolmogorovProblem("linear", 2, 1.0, np.sqrt(2.0) * np.eye(2), _sum, exact=_sum)
        schedule = LrSchedule.piecewise((10000, 15000), (1e-3, 1e-4, 1e-5))
        result = fk.train_regression(problem, fk.default_spec(problem, width=64),
                                     TrainConfig(epochs=20000, schedule=schedule), n_eval=10000)
        assert result.last("abs_linf") < 1e-2

    @pytest.mark.slow
    def test_heat_one_dimensional(self):
        problem = fk.heat(1)
        schedule = LrSchedule.piecewise((10000, 15000), (1e-3, 1e-4, 1e-5))
        result = fk.train_regression(problem, fk.default_spec(problem, width=64),
                                     TrainConfig(epochs=20000, schedule=schedule), n_eval=10000)
        assert result.last("rel_l1") < 0.01
