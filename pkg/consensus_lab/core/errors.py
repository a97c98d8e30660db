"""
Exception hierarchy.

Every error raised by consensus_lab derives from ConsensusLabError so the CLI can map the
whole family to a single exit code. Parameter problems additionally subclass ValueError and
numeric failures FloatingPointError, so generic callers keep working.
"""


class ConsensusLabError(Exception):
    """Base class for all consensus_lab errors."""


class ParameterError(ConsensusLabError, ValueError):
    """Invalid argument value or dimension."""


class TopologyError(ConsensusLabError):
    """A graph could not be constructed (e.g. still disconnected after the retry budget)."""


class MixingValidationError(ConsensusLabError):
    def __init__(self, condition: str, detail: str):
        self.condition = condition
        self.detail = detail
        super().__init__(f"{condition}: {detail}")

    def __reduce__(self):
        return type(self), (self.condition, self.detail)


class NumericError(ConsensusLabError, FloatingPointError):
    """Non-finite input or intermediate value."""


class DivergenceError(NumericError):
    """Solver state became non-finite."""


class DegenerateProblemError(ConsensusLabError):
    """Problem constants make the stepsize rules undefined (e.g. L_max == 0)."""


class ConstantValidationError(ConsensusLabError):
    """Lyapunov constants are not all positive for the given stepsize."""


class OracleError(ConsensusLabError):
    """Centralized reference solver failed to reach its accuracy target."""


class InsufficientDataError(ConsensusLabError):
    """Not enough usable points to fit a rate."""


class ConfigError(ConsensusLabError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        prefix = ""
        if source is not None:
            prefix = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class OutputError(ConsensusLabError):
    """An output file or directory could not be written."""


class RunError(ConsensusLabError):
    """A single (algorithm, topology, seed) run failed; carries the run context."""

    def __init__(self, message: str, *, algorithm: str, topology: str, seed: int):
        self.message = message
        self.algorithm = algorithm
        self.topology = topology
        self.seed = seed
        super().__init__(f"[{algorithm} / {topology} / seed={seed}] {message}")

    def __reduce__(self):
        return _rebuild_run_error, (self.message, self.algorithm, self.topology, self.seed)


def _rebuild_run_error(message: str, algorithm: str, topology: str, seed: int) -> RunError:
    return RunError(message, algorithm=algorithm, topology=topology, seed=seed)
