class IssPllError(RuntimeError):
    """Base class for every error raised by the simulator and its tools."""


class ConfigError(IssPllError, ValueError):
    pass


class SimulationError(IssPllError):
    """
    Raised when the loop state stops being finite. The message names the
    reference cycle where it happened.
    """

    def __init__(self, cycle_index: int, detail: str):
        super().__init__(f"cycle {cycle_index}: {detail}")
        self.cycle_index = cycle_index


class AnalysisError(IssPllError, ValueError):
    pass
