"""Adam and learning-rate schedules."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, TrainingDiverged


@dataclass(frozen=True)
class LrSchedule:
    """Learning rate as a function of the epoch counter.

    ``kind`` is ``constant`` (``values=(rate,)``), ``piecewise``
    (``boundaries`` strictly increasing, one more value than boundaries;
    segment ``i`` covers ``boundaries[i-1] <= n < boundaries[i]``) or
    ``exponential`` (``base * 10 ** (-n / scale)``).
    """

    kind: str
    values: tuple
    boundaries: tuple = ()
    scale: float = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "boundaries", tuple(int(b) for b in self.boundaries))
        if self.kind not in ("constant", "piecewise", "exponential"):
            raise ConfigurationError(f"unknown schedule kind {self.kind!r}")
        if any(not v > 0 for v in self.values):
            raise ConfigurationError("learning rates must be positive")
        if self.kind == "piecewise":
            if len(self.values) != len(self.boundaries) + 1:
                raise ConfigurationError("piecewise schedule needs one more value than boundaries")
            if any(b1 >= b2 for b1, b2 in zip(self.boundaries, self.boundaries[1:])):
                raise ConfigurationError("piecewise boundaries must be strictly increasing")
        elif len(self.values) != 1:
            raise ConfigurationError(f"{self.kind} schedule takes exactly one rate")
        if self.kind == "exponential" and not (self.scale and self.scale > 0):
            raise ConfigurationError("exponential schedule needs a positive scale")

    @classmethod
    def constant(cls, rate):
        return cls("constant", (rate,))

    @classmethod
    def piecewise(cls, boundaries, values):
        return cls("piecewise", tuple(values), tuple(boundaries))

    @classmethod
    def exponential(cls, base, scale):
        return cls("exponential", (base,), scale=float(scale))

    def __call__(self, epoch):
        return lr_at(self, epoch)

    def describe(self):
        if self.kind == "constant":
            return f"constant:{self.values[0]!r}"
        if self.kind == "exponential":
            return f"exponential:{self.values[0]!r}:{self.scale!r}"
        pairs = ",".join(f"{b}" for b in self.boundaries)
        vals = ",".join(f"{v!r}" for v in self.values)
        return f"piecewise:{pairs}:{vals}"

    @classmethod
    def parse(cls, text):
        """Inverse of :meth:`describe`."""
        kind, _, rest = text.strip().partition(":")
        try:
            if kind == "constant":
                return cls.constant(float(rest))
            if kind == "exponential":
                base, scale = rest.split(":")
                return cls.exponential(float(base), float(scale))
            if kind == "piecewise":
                bounds, vals = rest.split(":")
                return cls.piecewise([int(b) for b in bounds.split(",") if b],
                                     [float(v) for v in vals.split(",")])
        except ValueError as exc:
            raise ConfigurationError(f"malformed schedule {text!r}") from exc
        raise ConfigurationError(f"unknown schedule kind {kind!r}")


def lr_at(schedule, epoch):
    if epoch < 0:
        raise ConfigurationError("epoch must be non-negative")
    if schedule.kind == "constant":
        return schedule.values[0]
    if schedule.kind == "exponential":
        return schedule.values[0] * 10.0 ** (-epoch / schedule.scale)
    for boundary, value in zip(schedule.boundaries, schedule.values):
        if epoch < boundary:
            return value
    return schedule.values[-1]


# Named schedules used by the registered problems.
EIKONAL_SCHEDULE = LrSchedule.piecewise((3000, 7000), (0.1, 0.01, 0.001))
BURGERS_SCHEDULE = LrSchedule.piecewise((1000, 3000), (0.01, 0.001, 0.0005))
# 1e-3 up to and including epoch 250000, then 1e-4 up to 500000, then 1e-5
HEAT_PIECEWISE_SCHEDULE = LrSchedule.piecewise((250001, 500001), (1e-3, 1e-4, 1e-5))
HEAT_EXPONENTIAL_SCHEDULE = LrSchedule.exponential(0.1, 100000)


@dataclass
class AdamState:
    size: int
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)
    t: int = 0

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.size)
        if self.v is None:
            self.v = np.zeros(self.size)


def adam_step(state, theta, grad, rate):
    """One bias-corrected Adam update of ``theta`` in place.

    Raises :class:`TrainingDiverged` on a non-finite gradient without
    touching ``state`` or ``theta``.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != theta.shape:
        raise ConfigurationError(f"gradient shape {grad.shape} != parameter shape {theta.shape}")
    if not np.all(np.isfinite(grad)):
        raise TrainingDiverged("non-finite gradient")
    b1, b2 = state.beta1, state.beta2
    state.t += 1
    state.m *= b1
    state.m += (1.0 - b1) * grad
    state.v *= b2
    state.v += (1.0 - b2) * grad * grad
    m_hat = state.m / (1.0 - b1 ** state.t)
    v_hat = state.v / (1.0 - b2 ** state.t)
    theta -= rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return state, theta
