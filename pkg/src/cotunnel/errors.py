"""Exception types shared across the package."""

from __future__ import annotations


class CotunnelError(Exception):
    """Base class for all package errors."""


class ConfigError(CotunnelError, ValueError):
    """Invalid or inconsistent physical configuration."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class PoleError(CotunnelError, ArithmeticError):
    """An energy denominator vanished (within tolerance)."""

    def __init__(self, factor: str, value: float | None = None):
        self.factor = factor
        self.value = value
        msg = f"pole: {factor}"
        if value is not None:
            msg += f" = {value:.3e}"
        super().__init__(msg)


class SectorLeakError(CotunnelError, ValueError):
    """A state has weight outside the expected particle sector."""


class NumericError(CotunnelError, ArithmeticError):
    """A numerical method failed to reach its target accuracy."""

    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")


class RegimeError(CotunnelError, ValueError):
    """Data lie outside the regime an analysis assumes."""
