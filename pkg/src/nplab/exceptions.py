"""Exception hierarchy shared by all solvers."""


class NplabError(Exception):
    """Base class for every error raised by nplab."""


class ContractError(NplabError, ValueError):
    """An operation was called outside of its documented preconditions."""


class ConfigurationError(NplabError, ValueError):
    """A problem, network or training configuration is inconsistent."""


class DegenerateBatchError(ContractError):
    """Batch normalization in train mode needs at least two samples."""


class TrainingDiverged(NplabError, RuntimeError):
    """A non-finite loss or gradient was produced during training.

    ``result`` carries the partial run history when it is available.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SimulationBlowUp(NplabError, FloatingPointError):
    """A simulated SDE state became non-finite."""

    def __init__(self, step):
        super().__init__(f"non-finite state after Euler-Maruyama step {step}")
        self.step = step


class RolloutDiverged(NplabError, FloatingPointError):
    """The backward value process of the deep BSDE rollout became non-finite."""

    def __init__(self, step):
        super().__init__(f"non-finite value process at time step {step}")
        self.step = step


class ConfigParseError(NplabError, ValueError):
    def __init__(self, message, lineno=None):
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message)
        self.lineno = lineno
