from typing import List, Optional


class LowMixError(Exception):
    pass


class ConfigError(LowMixError):
    pass


class DomainError(LowMixError, ValueError):
    pass


class GeometryError(LowMixError):
    pass


class CFLError(LowMixError):
    pass


class SolverError(LowMixError):
    def __init__(self, message: str, trace: Optional[List[float]] = None) -> None:
        super().__init__(message)
        self.trace: List[float] = list(trace or [])

    @property
    def iterations(self) -> int:
        return len(self.trace)


class NonFiniteError(LowMixError):
    def __init__(self, stage: str) -> None:
        super().__init__(f"non-finite values detected at stage {stage!r}")
        self.stage = stage


class StabilityWarning(UserWarning):
    pass


class UnstableStratificationWarning(UserWarning):
    pass
