"""Typed errors raised across the package.

Every error derives from :class:`CarbonAttribError` so callers (and the CLI)
can catch data problems with a single ``except`` clause.
"""

from __future__ import annotations


class CarbonAttribError(Exception):
    """Base class for all data and domain errors."""


# grid validation
class UnknownSource(CarbonAttribError):
    pass


class LengthMismatch(CarbonAttribError):
    pass


class NegativeGeneration(CarbonAttribError):
    pass


class NonFiniteValue(CarbonAttribError):
    pass


class InvalidPortfolio(CarbonAttribError):
    """PPA fraction outside [0, 1] or placed on a non-eligible source."""


class InvalidParameter(CarbonAttribError):
    """A domain object was built with values violating its invariants."""


# attribution
class ZeroTotalGeneration(CarbonAttribError):
    def __init__(self, hour: int, region_id: str = ""):
        self.hour = hour
        self.region_id = region_id
        super().__init__(f"total generation is zero at hour {hour} (region {region_id!r})")


class DegenerateResidualHour(CarbonAttribError):
    def __init__(self, hour: int, region_id: str = ""):
        self.hour = hour
        self.region_id = region_id
        super().__init__(
            f"residual generation is (near) zero at hour {hour} (region {region_id!r})"
        )


class WrongInputMethod(CarbonAttribError):
    pass


class EmptyAfterExclusion(CarbonAttribError):
    pass


# optimizers
class NoEligibleDc(CarbonAttribError):
    pass


class EmptyWindow(CarbonAttribError):
    pass


class InfeasibleDeadline(CarbonAttribError):
    pass


# evaluation
class SignalSpanMismatch(CarbonAttribError):
    pass


class MismatchedScenarios(CarbonAttribError):
    pass


class ZeroBaselineEmissions(CarbonAttribError):
    """Savings are undefined: the baseline emits nothing but the optimized trace does."""


class EmptyInput(CarbonAttribError):
    pass


# dataio
class ParseError(CarbonAttribError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class GapInSeries(CarbonAttribError):
    def __init__(self, region_id: str, hour, source: str | None = None):
        self.region_id = region_id
        self.hour = hour
        self.source = source
        what = f" source {source!r}" if source else ""
        super().__init__(f"region {region_id!r}{what} has no row for hour {hour}")


class DuplicateRow(CarbonAttribError):
    def __init__(self, line: int, key):
        self.line = line
        self.key = key
        super().__init__(f"line {line}: duplicate row for {key}")


class NegativeCef(CarbonAttribError):
    pass


class IoError(CarbonAttribError):
    pass
