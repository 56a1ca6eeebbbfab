"""Exception types shared by the simulator packages."""
from __future__ import annotations

from collections.abc import Mapping


class ConfigError(ValueError):
    pass


class OptimizationError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


class SolverError(NumericalError):
    def __init__(self, message: str, *, iterations: int, residual: float) -> None:
        super().__init__(f"{message} (iterations={iterations}, max_residual={residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class FitError(NumericalError):
    def __init__(self, message: str, diagnostics: Mapping[str, object] | None = None) -> None:
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
