"""Dispatch an :class:`~nplab.config.ExperimentConfig` to its method and write result files."""

import os
from pathlib import Path

from . import deep_bsde, feynman_kac, nn, pinn, streams
from .exceptions import TrainingDiverged
from .results import RunResult, emit_plot_data
from .training import TrainConfig


def _train_config(config):
    return TrainConfig(epochs=config.epochs, schedule=config.schedule, seed=config.seed,
                       batch_size=config.batch_size, eval_interval=config.eval_interval,
                       target_loss=config.target_loss)


def _pinn_problem(config):
    opts = config.problem_options
    if config.problem == "eikonal-param":
        return pinn.eikonal_param(opts.get("lambda_true", 3.0), opts.get("lambda_init", 1.0))
    return pinn.PROBLEMS[config.problem]()


def _pinn_spec(problem, network):
    spec = pinn.default_spec(problem, network.get("activation"))
    if "hidden" in network:
        act = network.get("activation", spec.hidden[0][1])
        spec = nn.MlpSpec.plain(spec.input_dim, network["hidden"], act, 1,
                                input_scaling=spec.input_scaling)
    return spec


def _counts(config):
    opts = config.problem_options
    defaults = pinn.DEFAULT_COUNTS[config.problem]
    names = ("n_r", "n_0", "n_b", "n_d")
    return tuple(opts.get(name, default) for name, default in zip(names, defaults))


def run_pinn(config):
    problem = _pinn_problem(config)
    spec = _pinn_spec(problem, config.network)
    noise = config.problem_options.get("noise", 0.0)
    if config.method == "pinn-ident":
        _, result = pinn.identify_parameter(problem, spec, _train_config(config), noise=noise,
                                            counts=_counts(config))
        return result
    return pinn.train(problem, spec, _train_config(config), counts=_counts(config), noise=noise)


def run_pinn_rk(config):
    problem = _pinn_problem(config)
    opts = config.problem_options
    q = opts.get("rk_stages", 2)
    tableau = pinn.gauss_legendre(q)
    dt = opts.get("rk_dt", 0.1)
    n_data = opts.get("n_d") or 200
    rng = streams.generator(config.seed, "rk-data")
    x = rng.uniform(problem.low[0], problem.high[0], size=(n_data, 1))
    u = problem.data(x)
    hidden = config.network.get("hidden", (32, 32, 32))
    spec = nn.MlpSpec.plain(1, hidden, config.network.get("activation", "tanh"), q + 1)
    result = pinn.train_rk(problem, spec, tableau, dt, x, u, _train_config(config))
    result.summary.update(stages=q, dt=dt, data_points=n_data)
    return result


def run_feynman_kac(config):
    opts = config.problem_options
    d = opts.get("dim", 10)
    T = opts.get("horizon", 1.0)
    if config.problem == "heat":
        problem = feynman_kac.heat(d, T)
    else:
        problem = feynman_kac.heat_potential(d, T, r=opts.get("potential", 0.5),
                                             f=opts.get("source", 1.0),
                                             n_steps=opts.get("time_steps", 20))
    width = config.network.get("width", 200)
    spec = nn.MlpSpec.batch_normed(d, [width] * config.network.get("layers", 2),
                                   config.network.get("activation", "tanh"), 1)
    return feynman_kac.train_regression(problem, spec, _train_config(config))


def run_deep_bsde(config):
    opts = config.problem_options
    factory = deep_bsde.PROBLEMS[config.problem]
    problem = factory(d=opts.get("dim", 100), T=opts.get("horizon", 1.0),
                      N=opts.get("time_steps", 20))
    preset = config.network.get("preset")
    if preset is None and not {"layers", "width"} & set(config.network):
        preset = "reference"
    return deep_bsde.train(problem, preset, _train_config(config),
                           hidden_layers=config.network.get("layers"),
                           width=config.network.get("width"))


METHODS = {
    "pinn": run_pinn,
    "pinn-ident": run_pinn,
    "pinn-rk": run_pinn_rk,
    "feynman-kac": run_feynman_kac,
    "deep-bsde": run_deep_bsde,
}


def run(config, out=None, threads=1):
    """Run an experiment and write ``<out>.csv``, ``<out>.json``, ``<out>.plot.csv`` and ``<out>.params``.

    Returns the :class:`RunResult`; its ``status`` is ``diverged`` when
    training produced non-finite values.
    """
    out = out or config.output
    previous = streams.get_threads()
    streams.set_threads(threads)
    try:
        result = METHODS[config.method](config)
    except TrainingDiverged as exc:
        result = exc.result or RunResult(config.method, config.problem, config.seed)
        result.status = "diverged"
        result.message = str(exc)
    finally:
        streams.set_threads(previous)
    result.summary["config_seed"] = config.seed
    if out:
        write_outputs(result, out, config)
    return result


def write_outputs(result, out, config=None):
    base = Path(out)
    if base.parent and not base.parent.exists():
        os.makedirs(base.parent, exist_ok=True)
    if config is not None:
        from .config import serialize

        result.summary["config"] = serialize(config)
    if result.snapshot:
        nn.write_snapshot(f"{base}.params", result.snapshot)
        result.summary["params_path"] = f"{base}.params"
    Path(f"{base}.csv").write_text(result.to_csv())
    if len(result):
        Path(f"{base}.plot.csv").write_text(emit_plot_data(result))
    Path(f"{base}.json").write_text(result.to_json() + "\n")


def list_problems():
    """``(key, methods)`` pairs for every registered problem."""
    from .config import METHOD_PROBLEMS

    keys = {}
    for method, problems in METHOD_PROBLEMS.items():
        for key in problems:
            keys.setdefault(key, []).append(method)
    return sorted(keys.items())
