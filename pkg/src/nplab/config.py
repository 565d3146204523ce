"""Experiment configuration files.

The format is line oriented::

    # comment
    [method]
    name = pinn
    [problem]
    key = eikonal
    [training]
    epochs = 10000
    seed = 3

Sections are ``method``, ``problem``, ``network``, ``training`` and
``output``.  Unknown sections or keys, malformed values and incompatible
method/problem pairs are rejected with the offending line number.
"""

from dataclasses import dataclass, field

from .exceptions import ConfigParseError, ConfigurationError
from .optimize import (BURGERS_SCHEDULE, EIKONAL_SCHEDULE, HEAT_PIECEWISE_SCHEDULE,
                       LrSchedule)

METHOD_PROBLEMS = {
    "pinn": ("burgers", "eikonal", "eikonal-param"),
    "pinn-rk": ("burgers",),
    "pinn-ident": ("eikonal-param",),
    "feynman-kac": ("heat", "heat-potential"),
    "deep-bsde": ("lqg-hjb", "allen-cahn"),
}
ACTIVATIONS = ("tanh", "relu", "leaky_relu")
BSDE_PRESETS = ("simple", "reference", "l3", "l5")


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise ValueError("must be a positive integer")
    return value


def _count(text):
    value = int(text)
    if value < 0:
        raise ValueError("must be a non-negative integer")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise ValueError("must be positive")
    return value


def _nonnegative_float(text):
    value = float(text)
    if not value >= 0:
        raise ValueError("must be non-negative")
    return value


def _int(text):
    return int(text)


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text
    return parse


def _int_list(text):
    values = tuple(int(v) for v in text.split(",") if v.strip())
    if any(v <= 0 for v in values):
        raise ValueError("widths must be positive")
    return values


def _schedule(text):
    try:
        return LrSchedule.parse(text)
    except ConfigurationError as exc:
        raise ValueError(str(exc)) from exc


def _text(text):
    if not text:
        raise ValueError("must not be empty")
    return text


# section -> key -> parser
SCHEMA = {
    "method": {"name": _choice(tuple(METHOD_PROBLEMS))},
    "problem": {
        "key": _text,
        "dim": _positive_int,
        "horizon": _positive_float,
        "lambda_true": _positive_float,
        "lambda_init": _positive_float,
        "noise": _nonnegative_float,
        "n_r": _count,
        "n_0": _count,
        "n_b": _count,
        "n_d": _count,
        "time_steps": _positive_int,
        "rk_stages": lambda text: int(_choice(("1", "2", "3"))(text)),
        "rk_dt": _positive_float,
        "potential": _nonnegative_float,
        "source": float,
    },
    "network": {
        "preset": _choice(BSDE_PRESETS),
        "activation": _choice(ACTIVATIONS),
        "hidden": _int_list,
        "width": _positive_int,
        "layers": _count,
    },
    "training": {
        "epochs": _count,
        "seed": _int,
        "schedule": _schedule,
        "batch_size": _positive_int,
        "eval_interval": _count,
        "target_loss": _positive_float,
    },
    "output": {"path": _text},
}
REQUIRED = (("method", "name"), ("problem", "key"))


def default_training(method, problem):
    """``(epochs, schedule, batch_size)`` used when the file leaves them out."""
    if problem == "burgers" and method == "pinn":
        return 5000, BURGERS_SCHEDULE, 256
    if problem in ("eikonal", "eikonal-param"):
        return 10000, EIKONAL_SCHEDULE, 256
    if method == "pinn-rk":
        return 2000, LrSchedule.constant(1e-3), 256
    if method == "feynman-kac":
        return 750000, HEAT_PIECEWISE_SCHEDULE, 256
    if problem == "lqg-hjb":
        return 2000, LrSchedule.constant(0.01), 64
    if problem == "allen-cahn":
        return 4000, LrSchedule.constant(5e-4), 64
    raise ConfigurationError(f"no defaults for {method}/{problem}")


@dataclass(frozen=True)
class ExperimentConfig:
    method: str
    problem: str
    epochs: int
    seed: int
    schedule: LrSchedule
    batch_size: int
    eval_interval: int = 0
    target_loss: float = None
    problem_options: dict = field(default_factory=dict)
    network: dict = field(default_factory=dict)
    output: str = None

    def __post_init__(self):
        if self.method not in METHOD_PROBLEMS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.problem not in METHOD_PROBLEMS[self.method]:
            raise ConfigurationError(
                f"method {self.method!r} does not support problem {self.problem!r}")
        if "preset" in self.network and self.method != "deep-bsde":
            raise ConfigurationError("network presets apply to the deep-bsde method only")

    def with_seed(self, seed):
        return ExperimentConfig(**{**self.__dict__, "seed": int(seed)})


def _split_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_config(text):
    """Parse and validate configuration text; defaults are filled in."""
    values = {}
    lines = {}
    section = None
    for lineno, line in _split_lines(text):
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigParseError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigParseError(f"unknown section [{section}]", lineno)
            continue
        if section is None:
            raise ConfigParseError("key outside of any section", lineno)
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigParseError(f"expected key = value, got {line!r}", lineno)
        parser = SCHEMA[section].get(key)
        if parser is None:
            raise ConfigParseError(f"unknown key {key!r} in [{section}]", lineno)
        if (section, key) in values:
            raise ConfigParseError(f"duplicate key {key!r} in [{section}]", lineno)
        try:
            values[(section, key)] = parser(raw)
        except ValueError as exc:
            raise ConfigParseError(f"invalid value for {key!r}: {raw!r} ({exc})", lineno) from None
        lines[(section, key)] = lineno
    for item in REQUIRED:
        if item not in values:
            raise ConfigParseError(f"missing required key {item[1]!r} in [{item[0]}]")
    method, problem = values[("method", "name")], values[("problem", "key")]
    if problem not in METHOD_PROBLEMS[method]:
        raise ConfigParseError(
            f"method {method!r} does not support problem {problem!r}; "
            f"expected one of {', '.join(METHOD_PROBLEMS[method])}", lines[("problem", "key")])
    if ("network", "preset") in values and method != "deep-bsde":
        raise ConfigParseError("network presets apply to the deep-bsde method only",
                               lines[("network", "preset")])
    epochs, schedule, batch = default_training(method, problem)
    train = {k: v for (s, k), v in values.items() if s == "training"}
    return ExperimentConfig(
        method=method,
        problem=problem,
        epochs=train.get("epochs", epochs),
        seed=train.get("seed", 0),
        schedule=train.get("schedule", schedule),
        batch_size=train.get("batch_size", batch),
        eval_interval=train.get("eval_interval", 0),
        target_loss=train.get("target_loss"),
        problem_options={k: v for (s, k), v in values.items() if s == "problem" and k != "key"},
        network={k: v for (s, k), v in values.items() if s == "network"},
        output=values.get(("output", "path")),
    )


def _format(value):
    if isinstance(value, LrSchedule):
        return value.describe()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize(config):
    """Configuration text that parses back to an equal :class:`ExperimentConfig`."""
    out = ["[method]", f"name = {config.method}", "", "[problem]", f"key = {config.problem}"]
    out += [f"{k} = {_format(v)}" for k, v in sorted(config.problem_options.items())]
    if config.network:
        out += ["", "[network]"] + [f"{k} = {_format(v)}" for k, v in sorted(config.network.items())]
    out += ["", "[training]", f"epochs = {config.epochs}", f"seed = {config.seed}",
            f"schedule = {config.schedule.describe()}", f"batch_size = {config.batch_size}",
            f"eval_interval = {config.eval_interval}"]
    if config.target_loss is not None:
        out.append(f"target_loss = {config.target_loss!r}")
    if config.output:
        out += ["", "[output]", f"path = {config.output}"]
    return "\n".join(out) + "\n"
