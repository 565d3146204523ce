"""Training configuration and the shared Adam loop."""

import ctypes
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConfigurationError, RolloutDiverged, SimulationBlowUp, TrainingDiverged
from .optimize import AdamState, LrSchedule, adam_step, lr_at


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and sampling settings shared by all methods.

    ``eval_interval`` controls how often error metrics are computed
    (0 means only at the final epoch).  ``target_loss`` stops training as
    soon as the recorded loss falls below it.
    """

    epochs: int = 1000
    schedule: LrSchedule = field(default_factory=lambda: LrSchedule.constant(1e-3))
    seed: int = 0
    batch_size: int = 256
    eval_interval: int = 0
    target_loss: float = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ConfigurationError("batch size must be positive")
        if self.eval_interval < 0:
            raise ConfigurationError("eval interval must be non-negative")

    def with_(self, **changes):
        return replace(self, **changes)


_heap_kept = False


def keep_freed_heap():
    """Ask glibc to keep freed heap memory for reuse within the process.

    Each epoch frees a tape of up to a few hundred MB and then allocates
    the same again.  By default glibc trims the freed top of the heap back
    to the OS and page-faults it in on the next epoch, which cost about a
    quarter of the Burgers run time.  No effect on other C libraries.
    """
    global _heap_kept
    if _heap_kept:
        return
    _heap_kept = True
    try:
        mallopt = ctypes.CDLL(None).mallopt
    except (OSError, AttributeError, TypeError):
        return
    mallopt(-1, 1 << 30)   # M_TRIM_THRESHOLD
    mallopt(-3, 32 << 20)  # M_MMAP_THRESHOLD


def run_adam(theta, step, config, result, evaluate=None, after_step=None):
    """Run ``config.epochs`` Adam steps on ``theta`` in place, logging into ``result``.

    ``step(epoch)`` returns ``(loss, components, grad, extras)`` at the
    current parameters.  One row per epoch ``0..E`` is recorded; row ``n``
    holds the loss at the parameters after ``n`` updates and the rate used
    for update ``n + 1``.  ``evaluate(epoch)`` returns error metrics and is
    called every ``eval_interval`` epochs and at the last row.
    ``after_step()`` runs after each update (batch-norm statistics).
    """
    keep_freed_heap()
    state = AdamState(theta.size)
    start = time.perf_counter()
    last = config.epochs
    for epoch in range(last + 1):
        try:
            loss, components, grad, extras = step(epoch)
        except (RolloutDiverged, SimulationBlowUp) as exc:
            result.status = "diverged"
            result.message = f"epoch {epoch}: {exc}"
            raise TrainingDiverged(result.message, result) from exc
        done = epoch == last
        if config.target_loss is not None and loss < config.target_loss:
            done = True
            result.summary["reached_target"] = True
        rate = lr_at(config.schedule, epoch)
        metrics = {}
        interval = config.eval_interval
        if evaluate is not None and (done or (interval and epoch % interval == 0)):
            metrics = evaluate(epoch)
        row = dict(loss=loss, **components, lr=rate, **metrics, **extras)
        if not np.isfinite(loss) or (grad is not None and not np.all(np.isfinite(grad))):
            result.add_row(epoch, time.perf_counter() - start, **row)
            result.status = "diverged"
            result.message = f"non-finite loss or gradient at epoch {epoch}"
            raise TrainingDiverged(result.message, result)
        result.add_row(epoch, time.perf_counter() - start, **row)
        if done:
            break
        adam_step(state, theta, grad, rate)
        if after_step is not None:
            after_step()
    result.summary.setdefault("reached_target", False)
    result.summary["epochs_run"] = epoch
    return result
